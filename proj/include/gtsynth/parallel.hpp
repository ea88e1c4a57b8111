#pragma once

namespace gtsynth {

/// Worker count for the OpenMP kernels: GTSYNTH_THREADS when set to a
/// positive integer, otherwise the OpenMP default.
int worker_count();

}  // namespace gtsynth
