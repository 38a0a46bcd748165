#include "corrsync/parallel.hpp"

namespace corrsync {

namespace {
std::atomic<std::size_t> g_thread_limit{0};
}

void set_thread_limit(std::size_t threads) { g_thread_limit.store(threads); }

std::size_t thread_limit() {
  const std::size_t limit = g_thread_limit.load();
  if (limit != 0) return limit;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

}  // namespace corrsync
