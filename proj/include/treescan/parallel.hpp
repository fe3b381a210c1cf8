#pragma once

namespace treescan {

/// Global switch for the OpenMP kernels. All kernels are written so that the
/// parallel and serial paths produce bitwise identical results; this toggle
/// exists for the --serial pipeline mode and for benchmarking.
void set_parallel(bool enabled);
bool parallel_enabled();

}  // namespace treescan
