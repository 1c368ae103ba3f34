#pragma once

// Candidate Lyapunov functions on the simplex: relative entropy, the Gibbs
// free energy, the locally Gibbs J = sum r log r + U, and custom fields.
// Probes for positive definiteness, descent along trajectories, existence of
// a potential for the frozen stationary laws, and the slow-adaptation rate
// bounds.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nlmarkov/dynamics.hpp"
#include "nlmarkov/models.hpp"
#include "nlmarkov/simplex.hpp"

namespace nlmarkov {

// ---------------------------------------------------------------------------
// Candidates
// ---------------------------------------------------------------------------

enum class CandidateKind { RelativeEntropy, GibbsFreeEnergy, LocallyGibbsJ, Custom };

class LyapunovCandidate {
  public:
    LyapunovCandidate(CandidateKind kind, std::string description, ScalarField value,
                      std::function<Vector(const Vector&)> analytic_gradient = nullptr,
                      Scalar fd_step = 1e-5);

    CandidateKind kind() const noexcept { return kind_; }
    const std::string& description() const noexcept { return description_; }
    bool has_analytic_gradient() const noexcept { return static_cast<bool>(analytic_gradient_); }
    Scalar fd_step() const noexcept { return fd_step_; }

    Scalar operator()(const Vector& r) const { return value_(r); }
    Scalar value(const SimplexPoint& r) const { return value_(r.weights()); }
    const ScalarField& field() const noexcept { return value_; }

    // Analytic tangent gradient when available, otherwise central finite
    // differences along the Helmert basis.
    TangentVector gradient(const SimplexPoint& r) const;

  private:
    CandidateKind kind_;
    std::string description_;
    ScalarField value_;
    std::function<Vector(const Vector&)> analytic_gradient_;  // coordinate gradient
    Scalar fd_step_;
};

// Factories. Each validates the construction invariants: finite values at 25
// random interior points, and (when analytic) agreement with the finite
// difference gradient to 1e-6 at 25 random interior points.
LyapunovCandidate make_relative_entropy_candidate(const SimplexPoint& pi);
LyapunovCandidate make_free_energy_candidate(const RateFamily& model);
LyapunovCandidate make_locally_gibbs_candidate(const RateFamily& model);
LyapunovCandidate make_zero_candidate(Eigen::Index d);
LyapunovCandidate make_custom_candidate(Eigen::Index d, ScalarField value, std::string description,
                                        std::function<Vector(const Vector&)> gradient = nullptr);

// ---------------------------------------------------------------------------
// Scalar functionals
// ---------------------------------------------------------------------------

// sum_x p_x log(p_x / q_x) with 0 log 0 = 0; >= 0 and zero iff p = q.
Scalar relative_entropy(const SimplexPoint& p, const SimplexPoint& q);

// F(r) = sum_x (K^x(r) + log r_x) r_x for per-state fields K.
Scalar gibbs_free_energy(const std::function<Vector(const Vector&)>& K, const SimplexPoint& r);
Scalar gibbs_free_energy(const RateFamily& model, const SimplexPoint& r);

// J(r) = sum_x r_x log r_x + U(r).
Scalar locally_gibbs_J(const ScalarField& U, const SimplexPoint& r);

// U(r) = sum_z [ int_0^{r_z} R_z(w) dw + K^z(r) r_z ], quadrature to 1e-12.
Scalar ggibbs_potential(const std::function<Vector(const Vector&)>& K,
                        const std::vector<std::function<Scalar(Scalar)>>& R, const SimplexPoint& r);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct PositiveDefinitenessReport {
    bool minimum_ok = false;    // J(r) > J(pi*) at every sampled r != pi*
    bool shrinkage_ok = false;  // sublevel radii nondecreasing across levels
    bool pass = false;
    int samples = 0;
    Scalar radius = 0.0;
    std::vector<Vector> witnesses;  // sampled points with J(r) <= J(pi*)
    std::vector<Scalar> level_values;
    std::vector<Scalar> level_radii;
};

struct DescentSample {
    Scalar t = 0.0;
    Scalar value = 0.0;               // J(p(t))
    Scalar orbital_derivative = 0.0;  // <DJ(p), p Gamma(p)>
    Scalar discrete_difference = 0.0; // J(p_{k+1}) - J(p_k), 0 at the last sample
};

struct DescentReport {
    std::string trajectory_label;
    std::vector<DescentSample> samples;
    int violations = 0;
    Scalar epsilon_ball = 0.0;  // l1 radius around pi* excluded from the count
    Scalar margin = 1e-12;      // counted when orbital derivative > -margin
};

struct PotentialExistenceReport {
    Scalar max_asymmetry = 0.0;  // worst curl of the log-ratio 1-form
    Scalar threshold = 1e-4;
    bool pass = false;
    Vector worst_point;
    // Potential reconstructed by line integrals from the barycenter, aligned
    // with the grid points; empty when the curl test fails.
    std::vector<Scalar> reconstructed_potential;
};

struct SlowAdaptationBoundReport {
    Scalar gamma_min = 0.0;
    Scalar pi_star_min = 0.0;
    Scalar lipschitz_C = 0.0;
    Scalar quadratic_c = 0.0;
    Scalar lambda_1 = 0.0;  // min(gamma_min / (16 C), 1)
    Scalar lambda_2 = 0.0;  // min(lambda_1, c pi*_min / (8 C))
};

// ---------------------------------------------------------------------------
// Probes
// ---------------------------------------------------------------------------

PositiveDefinitenessReport positive_definiteness_probe(const LyapunovCandidate& J,
                                                       const SimplexPoint& pi_star, Scalar radius,
                                                       int samples, std::uint64_t seed);

DescentReport descent_check(const LyapunovCandidate& J, const RateFamily& model,
                            const Trajectory& traj, const SimplexPoint& pi_star, Scalar eps);

// Curl test of the 1-form g_{xy}(r) = -log(pi(r)_y / pi(r)_x) over the grid,
// by second-order finite differences with step h; on success the potential
// is reconstructed by path integrals from the barycenter.
PotentialExistenceReport potential_existence_test(const RateFamily& model, const SimplexGrid& grid,
                                                  Scalar h);

SlowAdaptationBoundReport slow_adaptation_bounds(const RateFamily& model,
                                                 const SimplexPoint& pi_star, int samples);

}  // namespace nlmarkov
