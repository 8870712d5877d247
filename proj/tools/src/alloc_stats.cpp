#include "alloc_stats.hpp"

#include <malloc.h>

#include <atomic>
#include <cerrno>
#include <cstring>

extern "C" {
void* __libc_malloc(std::size_t);
void* __libc_calloc(std::size_t, std::size_t);
void* __libc_realloc(void*, std::size_t);
void* __libc_memalign(std::size_t, std::size_t);
void __libc_free(void*);
}

namespace {

std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_peak{0};

void* add(void* p) noexcept {
  if (!p) return p;
  const std::size_t n = malloc_usable_size(p);
  const std::size_t now = g_current.fetch_add(n, std::memory_order_relaxed) + n;
  std::size_t peak = g_peak.load(std::memory_order_relaxed);
  while (now > peak && !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
  }
  return p;
}

void remove(void* p) noexcept {
  if (p) g_current.fetch_sub(malloc_usable_size(p), std::memory_order_relaxed);
}

}  // namespace

// glibc-specific interposition: every heap allocation of the process,
// including Eigen's and libpng's, is counted.
extern "C" {

void* malloc(std::size_t n) { return add(__libc_malloc(n)); }
void* calloc(std::size_t n, std::size_t m) { return add(__libc_calloc(n, m)); }
void free(void* p) {
  remove(p);
  __libc_free(p);
}
void* realloc(void* p, std::size_t n) {
  remove(p);
  void* q = __libc_realloc(p, n);
  if (!q && n != 0) add(p);  // the old block survives a failed realloc
  return add(q);
}
void* memalign(std::size_t a, std::size_t n) { return add(__libc_memalign(a, n)); }
void* aligned_alloc(std::size_t a, std::size_t n) { return add(__libc_memalign(a, n)); }
int posix_memalign(void** out, std::size_t a, std::size_t n) {
  void* p = __libc_memalign(a, n);
  if (!p) return ENOMEM;
  *out = add(p);
  return 0;
}

}  // extern "C"

namespace edffd::tools {

void reset_peak() noexcept { g_peak.store(g_current.load()); }
std::size_t current_bytes() noexcept { return g_current.load(); }
std::size_t peak_bytes() noexcept { return g_peak.load(); }

}  // namespace edffd::tools
