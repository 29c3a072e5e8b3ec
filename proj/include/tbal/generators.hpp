#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "tbal/dense_array.hpp"
#include "tbal/error.hpp"

namespace tbal {

/// H_n: h_ij = 0 iff j < i - 1, otherwise 1.
inline DenseArray gen_hessenberg(std::size_t n) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "Hessenberg size must be at least 1");
    DenseArray H = DenseArray::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) H.data()[i * n + j] = j + 1 < i ? 0.0 : 1.0;
    return H;
}

/// Order-N array with side n and entries uniform on [lo, hi), from mt19937_64.
inline DenseArray gen_random(std::size_t order, std::size_t n, std::uint64_t seed, double lo = 0.1, double hi = 1.0) {
    if (order < 1 || n < 1) throw Error(ErrorKind::InvalidArgument, "random array needs order and side at least 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    DenseArray A = DenseArray::filled(order, n, 0.0);
    for (auto& v : A.data()) v = u(rng);
    return A;
}

}  // namespace tbal
