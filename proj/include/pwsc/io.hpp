#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "pwsc/integrator.hpp"
#include "pwsc/orbits.hpp"

namespace pwsc {

inline constexpr const char* kVersion = "0.1.0";

/// Round-trip decimal form with 17 significant digits.
std::string format_real(double v);

void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
void write_events_csv(std::ostream& out, const Trajectory& traj);
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);
void write_shadow_csv(std::ostream& out, const ShadowComparison& cmp);

/// Writes `text` to `path`, throwing pwsc::Error on failure.
void write_file(const std::string& path, const std::string& text);

struct RunManifest {
    std::string command;
    std::string input;
    nlohmann::json parameters = nlohmann::json::object();
    double wall_clock_seconds = 0.0;
    std::vector<std::string> outputs;

    nlohmann::json to_json() const;
};

}  // namespace pwsc
