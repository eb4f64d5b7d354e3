#include "nirscope/parallel.hpp"

#include <omp.h>

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace nirscope {

int configure_threads_from_env()
{
    if (const char* env = std::getenv("NIRSCOPE_THREADS")) {
        int cap = 0;
        const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), cap);
        if (ec == std::errc() && cap > 0 && cap < omp_get_max_threads()) omp_set_num_threads(cap);
    }
    return omp_get_max_threads();
}

int max_threads() { return omp_get_max_threads(); }

} // namespace nirscope
