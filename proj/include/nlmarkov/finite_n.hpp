#pragma once

// The exact empirical-measure Markov chain on the lattice simplex
// S_N = S intersect (1/N) Z^d: enumerated states, sparse generator, forward
// evolution, stationary law, large-deviation rate estimates, the scaled
// relative entropy F_t^N, and an exact-jump Gillespie simulator for the
// N-particle dynamics.

#include <Eigen/SparseCore>

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nlmarkov/models.hpp"
#include "nlmarkov/simplex.hpp"

namespace nlmarkov {

struct LatticeChain {
    int n = 0;                             // particle count N
    Eigen::Index d = 0;                    // state-space dimension
    std::vector<Eigen::VectorXi> states;   // count vectors summing to N, lexicographic
    Eigen::SparseMatrix<Scalar, Eigen::RowMajor> generator;  // L^N, rows sum to 0
    std::string model_label;

    Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(states.size()); }
    Eigen::Index index_of(const Eigen::VectorXi& counts) const;
    SimplexPoint point_of(Eigen::Index state) const;
};

using LatticeChainPtr = std::shared_ptr<const LatticeChain>;

struct LatticeDistribution {
    LatticeChainPtr chain;
    Vector mass;       // one probability per lattice state
    Scalar time = 0.0;
};

LatticeDistribution make_lattice_distribution(LatticeChainPtr chain, Vector mass, Scalar time = 0.0);

// Sparse generator with rate N r_x Gamma_xy(r) from r to r + (e_y - e_x)/N.
// Guarded at binomial(N+d-1, d-1) <= 2e5 states.
LatticeChainPtr build_lattice_chain(const RateFamily& model, int n);

enum class EvolveMethod { RungeKutta, Uniformization };

// Linear forward evolution over time t. Fixed-step RK4 for mild horizons;
// switches to uniformization automatically when max |diagonal| * t > 50.
LatticeDistribution evolve_distribution(const LatticeChain& chain, const LatticeDistribution& u0,
                                        Scalar t, Scalar dt,
                                        EvolveMethod* method_used = nullptr);

// Null left vector of the generator by a sparse solve, normalized.
LatticeDistribution stationary_of_chain(LatticeChainPtr chain);

struct RateEstimate {
    Vector value;                   // -(1/N) log mass, shifted so the minimum is 0
    std::vector<uint8_t> present;   // zero-mass states are flagged missing
};

RateEstimate rate_estimate(const LatticeDistribution& u);

// F^N(q) = (1/N) R(q^{tensor N} || law of the particle configuration), via
// the exact type decomposition of the exchangeable configuration law.
Scalar scaled_relative_entropy(const SimplexPoint& q, const LatticeDistribution& u);

// ---------------------------------------------------------------------------
// Gillespie simulation
// ---------------------------------------------------------------------------

class InitialSampler {
  public:
    // Deterministic start at the lattice state nearest to q.
    static InitialSampler point_mass(SimplexPoint q);
    // n particles drawn i.i.d. from q (exchangeable by construction).
    static InitialSampler iid(SimplexPoint q);
    // Explicit lattice law: atoms (counts, probability).
    static InitialSampler explicit_law(std::vector<std::pair<Eigen::VectorXi, Scalar>> atoms);

    Eigen::VectorXi draw(std::mt19937_64& rng, int n, Eigen::Index d) const;

  private:
    enum class Kind { PointMass, Iid, Explicit };
    Kind kind_ = Kind::PointMass;
    std::optional<SimplexPoint> q_;
    std::vector<std::pair<Eigen::VectorXi, Scalar>> atoms_;
};

struct EmpiricalPath {
    std::vector<Scalar> jump_times;    // starts at 0 with the initial state
    std::vector<SimplexPoint> states;  // values in S_N
    std::uint64_t seed = 0;

    // State right before time t (left-continuous sample path value at t).
    const SimplexPoint& at(Scalar t) const;
};

// Exact-jump simulation of the empirical-measure chain: total rate
// sum N r_x Gamma_xy(r), exponential holding times, next edge proportional
// to its rate. Deterministic given (seed, replica).
EmpiricalPath gillespie_simulate(const RateFamily& model, int n, const InitialSampler& initial,
                                 Scalar t_end, std::uint64_t seed, std::uint64_t replica = 0);

}  // namespace nlmarkov
