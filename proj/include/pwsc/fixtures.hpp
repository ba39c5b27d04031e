#pragma once

#include <string>
#include <vector>

#include "pwsc/system.hpp"

namespace pwsc {

struct Fixture {
    std::string name;         // "sys_a", ...
    std::string description;  // one line
    std::string ini;          // contents of fixtures/<name>.ini
};

/// Bundled systems, in name order.
const std::vector<Fixture>& fixtures();

/// Throws NotFoundError for an unknown name.
const Fixture& fixture(const std::string& name);
SystemDefinition load_fixture(const std::string& name);

}  // namespace pwsc
