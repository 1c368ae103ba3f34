#pragma once

// The nonlinear forward equation dp/dt = p Gamma(p): fixed-step integration,
// stationary laws of frozen generators, and fixed-point search/classification.

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "nlmarkov/models.hpp"
#include "nlmarkov/simplex.hpp"

namespace nlmarkov {

struct Trajectory {
    std::vector<Scalar> times;
    std::vector<SimplexPoint> points;
    std::string model_label;

    std::size_t size() const noexcept { return times.size(); }
    const SimplexPoint& back() const { return points.back(); }
};

enum class Stability { Stable, Unstable, Inconclusive };

const char* to_string(Stability s) noexcept;

struct FixedPointReport {
    SimplexPoint point;
    Scalar residual = 0.0;  // || p Gamma(p) ||_1
    Stability classification = Stability::Inconclusive;
    // Spectrum of the vector-field Jacobian restricted to H0.
    std::vector<std::complex<Scalar>> jacobian_spectrum;
};

// Unique stationary law of an irreducible generator, by a dense solve of the
// augmented balance system (one equation replaced by sum pi = 1).
SimplexPoint stationary_distribution(const RateMatrix& gamma);

// r Gamma(r); lies in H0 by the zero row sums.
TangentVector vector_field(const RateFamily& model, const SimplexPoint& r);

struct IntegrateOptions {
    // Pre-clamp coordinates below this signal a step too coarse for the
    // stiffness of the model.
    Scalar negative_tolerance = 1e-9;
    // Keep only every nth step in the trajectory (1 = all).
    int record_every = 1;
};

// Classical fixed-step RK4 with per-step renormalization. Records the state
// at every accepted step, including t = 0. Deterministic.
Trajectory integrate_ode(const RateFamily& model, const SimplexPoint& p0, Scalar t_end, Scalar dt,
                         const IntegrateOptions& opts = {});

struct FixedPointSearchOptions {
    Scalar picard_damping = 0.5;
    Scalar tolerance = 1e-12;       // on || p - pi(p) ||_1
    int max_iterations = 100000;
    Scalar dedup_distance = 1e-6;   // l1
    Scalar classify_threshold = 1e-8;
    int grid_resolution = 6;        // coarse multistart grid
    Scalar grid_margin = 0.05;
};

// Damped Picard iteration p <- (1-theta) p + theta pi(p) from grid plus
// seeded random interior starts; survivors are polished by a damped Newton
// residual minimization and classified through the H0-restricted Jacobian.
std::vector<FixedPointReport> find_fixed_points(const RateFamily& model, int multistarts,
                                                std::uint64_t seed,
                                                const FixedPointSearchOptions& opts = {});

}  // namespace nlmarkov
