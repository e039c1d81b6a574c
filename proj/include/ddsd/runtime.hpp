#pragma once

namespace ddsd {

// Keeps large training buffers on the heap instead of fresh mmap'd pages;
// without it most of a GRU epoch is spent in page faults.
void tune_allocator();

}  // namespace ddsd
