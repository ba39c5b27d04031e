#include "pwsc/io.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

#include "pwsc/error.hpp"

namespace pwsc {

std::string format_real(double v) {
    char buf[40];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    if (ec != std::errc()) throw Error("float formatting failed");
    return std::string(buf, end);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << "t,x,y,region\n";
    for (const Sample& s : traj.samples)
        out << format_real(s.t) << ',' << format_real(s.x) << ',' << format_real(s.y) << ',' << side_letter(s.region)
            << '\n';
}

void write_events_csv(std::ostream& out, const Trajectory& traj) {
    out << "event_id,t,x,y,direction\n";
    for (const EventRecord& e : traj.events)
        out << e.id << ',' << format_real(e.t) << ',' << format_real(e.x) << ',' << format_real(e.y) << ','
            << e.direction << '\n';
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
    out << "lambda,found,amplitude,period,cycle_type,multiplier\n";
    for (const SweepPoint& p : sweep.points) {
        out << format_real(p.lambda) << ',' << (p.found ? "true" : "false") << ',';
        if (p.found)
            out << format_real(p.amplitude) << ',' << format_real(p.period) << ',' << cycle_type_name(p.type) << ','
                << format_real(p.multiplier);
        else
            out << ",,,";
        out << '\n';
    }
}

void write_shadow_csv(std::ostream& out, const ShadowComparison& cmp) {
    out << "t,x_true,y_true,R_true,x_shadow,y_shadow,R_shadow\n";
    for (const ShadowRow& r : cmp.rows)
        out << format_real(r.t) << ',' << format_real(r.x_true) << ',' << format_real(r.y_true) << ','
            << format_real(r.R_true) << ',' << format_real(r.x_shadow) << ',' << format_real(r.y_shadow) << ','
            << format_real(r.R_shadow) << '\n';
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path + " for writing");
    f << text;
    if (!f) throw Error("write to " + path + " failed");
}

nlohmann::json RunManifest::to_json() const {
    return {{"command", command},     {"input", input},
            {"parameters", parameters}, {"version", kVersion},
            {"wall_clock_seconds", wall_clock_seconds}, {"outputs", outputs}};
}

}  // namespace pwsc
