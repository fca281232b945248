#pragma once

#include <iostream>
#include <string>

namespace xvad {

inline void log_warn(const std::string& msg) { std::cerr << "[xvad] warning: " << msg << "\n"; }
inline void log_info(const std::string& msg) { std::cerr << "[xvad] " << msg << "\n"; }

}  // namespace xvad
