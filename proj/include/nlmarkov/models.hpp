#pragma once

// The rate-family abstraction r -> Gamma(r) and the catalog of concrete
// model families: Glauber-type Gibbs dynamics, slow adaptation, birth-death
// chains, Metropolis-type dynamics with occupancy-dependent rates, the
// three-state families, nearest-neighbor cost models, the multi-class
// loss-network (telecom) model, and the solvable example that is not
// locally Gibbs. Families expose their closed-form stationary laws and
// potentials wherever those exist.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nlmarkov/expression.hpp"
#include "nlmarkov/simplex.hpp"

namespace nlmarkov {

// ---------------------------------------------------------------------------
// Rate matrices
// ---------------------------------------------------------------------------

// Conservative generator: off-diagonal entries >= 0, rows sum to zero.
class RateMatrix {
  public:
    explicit RateMatrix(Matrix entries);
    // Builds the diagonal as minus the off-diagonal row sums.
    static RateMatrix from_off_diagonal(Matrix off_diagonal);

    const Matrix& entries() const noexcept { return m_; }
    operator const Matrix&() const noexcept { return m_; }
    Scalar operator()(Eigen::Index x, Eigen::Index y) const { return m_(x, y); }
    Eigen::Index dim() const noexcept { return m_.rows(); }

  private:
    Matrix m_;
};

// True iff the directed graph of strictly positive off-diagonal entries is
// strongly connected.
bool check_irreducible(const RateMatrix& gamma);

// ---------------------------------------------------------------------------
// Model specifications (one variant per catalog entry)
// ---------------------------------------------------------------------------

struct ConstantSpec {
    Matrix gamma;  // fixed generator; the linear Markov baseline
};

struct GibbsAffineSpec {
    Vector V;          // environment potential, one entry per state
    Matrix W;          // symmetric interaction, row-major d x d
    Scalar beta = 0.0; // inverse temperature, >= 0
    Matrix adjacency;  // 0/1 symmetric irreducible, zero diagonal
};

struct ModelSpec;

struct SlowAdaptationSpec {
    std::shared_ptr<const ModelSpec> base;
    Vector pi_star;
    Scalar lambda = 1.0;  // in [0, 1]; 0 freezes the base at pi_star
};

struct BirthDeathPhiPsiSpec {
    std::vector<Expression> psi;  // psi_0..psi_{d-1}, positive fields on S
    std::vector<Expression> phi;  // phi_1..phi_d, positive 1-D functions of w
};

struct MetropolisGGibbsSpec {
    std::vector<Expression> K;  // C^1 fields on S, one per state
    std::vector<Expression> R;  // continuous 1-D functions of w, one per state
    Matrix adjacency;
};

struct ThreeStateBSpec {
    Scalar a1 = 1.0, a2 = 1.0, b2 = 1.0, b3 = 1.0;
    Scalar kappa = 0.0;
    Vector c;                      // 3 entries
    std::optional<Vector> r_star;  // defaults to the stationary law at kappa = 0
};

struct ThreeStateNonGibbsSpec {
    Scalar a1 = 1.0, a2 = 1.0, b2 = 1.0, b3 = 1.0;
    Scalar kappa = 0.0;
    Vector c;  // 3 entries with c2 == c3
};

struct NearestNeighborCostSpec {
    Eigen::Index d = 0;
    std::vector<Expression> up;    // a^1..a^{d-1}, positive 1-D functions
    std::vector<Expression> down;  // b^2..b^d, positive 1-D functions
};

struct TelecomSpec {
    int capacity = 0;              // per-node capacity C
    Vector lambda, mu, gamma;      // one positive rate triple per class
    std::vector<int> requirement;  // capacity requirement A_m per class
};

struct NonLocallyGibbsSpec {
    Expression a1, a2;  // fields on S with values in (0, 1)
    Expression psi;     // continuous function [0,1] -> (0,1), bounded away from 0
};

struct ModelSpec {
    using Variant =
        std::variant<ConstantSpec, GibbsAffineSpec, SlowAdaptationSpec, BirthDeathPhiPsiSpec,
                     MetropolisGGibbsSpec, ThreeStateBSpec, ThreeStateNonGibbsSpec,
                     NearestNeighborCostSpec, TelecomSpec, NonLocallyGibbsSpec>;
    Variant value;
    std::string label;  // defaults to the variant name
};

const char* variant_name(const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Telecom state space
// ---------------------------------------------------------------------------

// Exhaustive enumeration of {x in Z_+^M : sum_m x_m A_m <= C}, ordered by
// graded lexicographic rank on (sum x, x) so indices are stable across runs.
struct TelecomStateSpace {
    std::vector<Eigen::VectorXi> states;
    Eigen::Index dim() const noexcept { return static_cast<Eigen::Index>(states.size()); }
    Eigen::Index index_of(const Eigen::VectorXi& x) const;
};

TelecomStateSpace telecom_state_space(int capacity, const std::vector<int>& requirement);

// ---------------------------------------------------------------------------
// Built families
// ---------------------------------------------------------------------------

// A potential U on the simplex together with its exact coordinate gradient
// (tangent-project the gradient to differentiate along H0).
struct PotentialField {
    ScalarField value;
    std::function<Vector(const Vector&)> gradient;
};

// Per-state Gibbs data: K^x(r) and H^x(r) = d/dr_x sum_z K^z(r) r_z.
struct GibbsStructure {
    std::function<Vector(const Vector&)> K;
    std::function<Vector(const Vector&)> H;
};

class RateFamily {
  public:
    const ModelSpec& spec() const noexcept { return *spec_; }
    const std::string& label() const noexcept { return spec_->label; }
    Eigen::Index dim() const noexcept { return dim_; }

    // Generator at r. Accepts vectors within roundoff of the simplex so
    // integrator stages and finite-difference probes evaluate cleanly.
    RateMatrix operator()(const Vector& r) const;
    RateMatrix operator()(const SimplexPoint& r) const { return (*this)(r.weights()); }

    bool has_analytic_stationary() const noexcept { return static_cast<bool>(stationary_); }
    SimplexPoint analytic_stationary(const Vector& r) const;

    bool has_analytic_potential() const noexcept { return potential_.has_value(); }
    const PotentialField& analytic_potential() const;

    bool has_gibbs_structure() const noexcept { return gibbs_.has_value(); }
    const GibbsStructure& gibbs_structure() const;

  private:
    friend RateFamily build_model(ModelSpec spec);
    std::shared_ptr<const ModelSpec> spec_;
    Eigen::Index dim_ = 0;
    std::function<Matrix(const Vector&)> entries_;             // off-diagonal entries
    std::function<Vector(const Vector&)> stationary_;          // unnormalized pi(r)
    std::optional<PotentialField> potential_;
    std::optional<GibbsStructure> gibbs_;
};

// Validates the specification, constructs the family, and spot-checks the
// attached stationary law on 25 random points (pi(r) Gamma(r) = 0 to 1e-10).
RateFamily build_model(ModelSpec spec);

inline RateMatrix evaluate_rates(const RateFamily& model, const SimplexPoint& r) {
    return model(r);
}

// Max over sampled pairs of ||Gamma(r) - Gamma(r')||_1 / ||r - r'||_1 with
// entrywise matrix l1 norm; a lower bound on the Lipschitz constant.
struct LipschitzEstimate {
    Scalar value = 0.0;
    int pairs = 0;
};
LipschitzEstimate lipschitz_estimate(const RateFamily& model, int samples, std::uint64_t seed);

}  // namespace nlmarkov
