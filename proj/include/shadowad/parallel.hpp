#pragma once

namespace shadowad {

// Applies the SHADOWAD_THREADS cap to the OpenMP runtime. Call once at
// process start; safe to call again (idempotent for a fixed environment).
void apply_thread_cap();

// Number of worker threads parallel regions will use (1 without OpenMP).
int worker_threads();

}  // namespace shadowad
