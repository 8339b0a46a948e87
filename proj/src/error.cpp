#include "sonofield/error.hpp"

#include <atomic>
#include <iostream>

namespace sonofield {

namespace {
std::atomic<bool> g_warnings_enabled{true};
}

void set_warnings_enabled(bool enabled) { g_warnings_enabled = enabled; }

void warn(const std::string& message) {
    if (g_warnings_enabled) std::cerr << "warning: " << message << '\n';
}

}  // namespace sonofield
