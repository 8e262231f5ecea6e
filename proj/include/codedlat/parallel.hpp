#pragma once

#include <cstddef>
#include <vector>

#ifdef CODEDLAT_HAVE_OPENMP
#include <omp.h>
#endif

namespace codedlat {

// Evaluates fn(i) for i in [0, count) into a vector. With threads > 1 and
// OpenMP available the loop is parallel; each index writes only its own
// slot, so the result is identical to the serial path bit for bit. Any
// reduction over the results must then run serially in index order --
// that discipline is what keeps multi-threaded runs deterministic.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, int threads, Fn&& fn) {
    std::vector<T> out(count);
#ifdef CODEDLAT_HAVE_OPENMP
    if (threads > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
        for (long long i = 0; i < static_cast<long long>(count); ++i)
            out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
        return out;
    }
#else
    (void)threads;
#endif
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
}

inline int hardware_threads() {
#ifdef CODEDLAT_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace codedlat
