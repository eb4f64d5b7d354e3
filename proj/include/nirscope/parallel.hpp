#pragma once

namespace nirscope {

// Caps OpenMP worker threads from NIRSCOPE_THREADS when set to a positive
// integer. Returns the effective maximum thread count.
int configure_threads_from_env();

int max_threads();

} // namespace nirscope
