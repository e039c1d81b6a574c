#include "ddsd/parallel.hpp"

#include <cstdlib>
#include <string>

namespace ddsd {

std::size_t worker_count() {
  if (const char* env = std::getenv("DDSD_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace ddsd
