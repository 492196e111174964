#include "stegodetect/mat.hpp"

namespace stegodetect {

namespace {
bool g_debug_checks = false;
}

bool debug_checks_enabled() { return g_debug_checks; }
void set_debug_checks(bool enabled) { g_debug_checks = enabled; }

}  // namespace stegodetect
