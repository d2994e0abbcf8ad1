#pragma once

namespace qmap {

// Worker-count control for the OpenMP kernels. Every parallel loop in the
// library assigns each output element to exactly one thread and keeps the
// per-element accumulation order fixed, so results are bit-identical for any
// worker count. Reductions that cross elements (losses, batch statistics,
// poolings) stay sequential.
void set_workers(int n);   // n <= 0 selects the hardware default
int workers();

} // namespace qmap
