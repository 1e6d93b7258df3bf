#pragma once

namespace emm {

// Execution policy for the data-parallel kernels. Every parallel kernel has a
// serial twin with identical summation order, so results are bit-identical
// across policies and thread counts.
enum class Execution { serial, parallel };

// Number of worker threads a parallel kernel will use (0 = runtime default).
int effective_jobs(int jobs);

// Process-wide default used by Execution::parallel (CLI --jobs).
void set_global_jobs(int jobs);

}  // namespace emm
