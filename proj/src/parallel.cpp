#include "shadowad/parallel.hpp"

#include <cstdlib>
#include <string>

#include "shadowad/common.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace shadowad {

void apply_thread_cap() {
    const char* raw = std::getenv("SHADOWAD_THREADS");
    if (raw == nullptr || *raw == '\0') return;
    int cap = 0;
    try {
        cap = std::stoi(raw);
    } catch (const std::exception&) {
        fail(ErrorKind::validation, std::string("SHADOWAD_THREADS is not an integer: ") + raw);
    }
    require(cap >= 1, ErrorKind::validation, "SHADOWAD_THREADS must be >= 1");
#ifdef _OPENMP
    if (cap < omp_get_max_threads()) omp_set_num_threads(cap);
#endif
}

int worker_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace shadowad
