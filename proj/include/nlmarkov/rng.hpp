#pragma once

// Seeding discipline: every module derives an independent stream from
// (seed, stream index) through SplitMix64, so parallel replicas stay
// reproducible regardless of scheduling.

#include <cstdint>
#include <random>

#include "nlmarkov/simplex.hpp"

namespace nlmarkov {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ (0x100000001b3ULL * (stream + 1))));
}

// Uniform sample from the simplex (Dirichlet(1,..,1)), optionally blended
// toward the barycenter so every coordinate is at least `margin`.
inline SimplexPoint random_simplex_point(std::mt19937_64& rng, Eigen::Index d, Scalar margin = 0.0) {
    std::exponential_distribution<Scalar> expo(1.0);
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = expo(rng);
    v /= v.sum();
    if (margin > 0.0) {
        Scalar blend = margin * static_cast<Scalar>(d);
        v = (1.0 - blend) * v + Vector::Constant(d, margin);
    }
    return SimplexPoint(std::move(v));
}

inline TangentVector random_tangent_vector(std::mt19937_64& rng, Eigen::Index d, Scalar scale = 1.0) {
    std::normal_distribution<Scalar> gauss(0.0, 1.0);
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = gauss(rng);
    Vector t = project_onto_tangent(v);
    Scalar n = t.norm();
    if (n > 0.0) t *= scale / n;
    return TangentVector(std::move(t));
}

}  // namespace nlmarkov
