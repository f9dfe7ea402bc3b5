#include "gmred/parallel.hpp"

#include <atomic>

namespace gmred {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int n) { g_threads.store(n < 1 ? 1 : n); }

int num_threads() noexcept { return g_threads.load(); }

}  // namespace gmred
