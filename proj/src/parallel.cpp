#include "gtsynth/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace gtsynth {

int worker_count() {
  if (const char* env = std::getenv("GTSYNTH_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  return omp_get_max_threads();
}

}  // namespace gtsynth
