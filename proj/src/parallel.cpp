#include "treescan/parallel.hpp"

#include <atomic>

namespace treescan {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

}  // namespace treescan
