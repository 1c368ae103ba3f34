#pragma once

// The large-deviation Hamiltonian H(r, alpha) of the empirical-measure chain,
// its Legendre-dual Lagrangian L(r, beta) (computed both by concave dual
// ascent and by a direct primal flow minimization), the stationary-PDE
// subsolution checker, concavity probes, and Dirichlet-form diagnostics.

#include <cstdint>
#include <string>
#include <vector>

#include "nlmarkov/lyapunov.hpp"
#include "nlmarkov/models.hpp"
#include "nlmarkov/simplex.hpp"

namespace nlmarkov {

// ---------------------------------------------------------------------------
// Hamiltonian
// ---------------------------------------------------------------------------

// H(r, alpha) = - sum_{x != y} r_x Gamma_xy(r) [ e^{-<alpha, e_y - e_x>} - 1 ].
// Invariant under alpha -> alpha + c 1. Throws OverflowGuard when an exponent
// exceeds 700.
Scalar hamiltonian_H(const RateFamily& model, const SimplexPoint& r, const Vector& alpha);

// Gradient in alpha: sum_{x != y} r_x Gamma_xy(r) e^{-(alpha_y - alpha_x)} (e_y - e_x).
// Always lies in H0.
Vector hamiltonian_gradient(const RateFamily& model, const SimplexPoint& r, const Vector& alpha);

// d^2/drho^2 H(r, alpha + rho w), in closed form.
Scalar hamiltonian_second_derivative(const RateFamily& model, const SimplexPoint& r,
                                     const Vector& alpha, const Vector& w, Scalar rho);

// ---------------------------------------------------------------------------
// Lagrangian
// ---------------------------------------------------------------------------

struct LagrangianOptions {
    Scalar gradient_tolerance = 1e-10;
    int max_iterations = 200;
    Scalar divergence_norm = 1e3;  // iterate norm beyond which beta is deemed infeasible
};

// L(r, beta) = sup_alpha [ H(r, alpha) - <alpha, beta> ], by damped Newton
// ascent in the reduced coordinates (last alpha coordinate pinned to zero).
// Throws Infeasible when the ascent diverges (beta outside the effective
// domain) and MaxIterations when the iteration cap is reached.
Scalar lagrangian_L(const RateFamily& model, const SimplexPoint& r, const TangentVector& beta,
                    const LagrangianOptions& opts = {});

// Direct minimization of sum_e r_x Gamma_xy(r) l(u_e / (r_x Gamma_xy(r)))
// over nonnegative flows u with divergence beta, where l(z) = z log z - z + 1.
// Independent primal oracle for lagrangian_L. Throws Infeasible when the flow
// polytope is empty.
Scalar lagrangian_L_primal(const RateFamily& model, const SimplexPoint& r,
                           const TangentVector& beta);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct DualityReport {
    int samples = 0;
    Scalar max_roundtrip_error = 0.0;  // | <alpha, beta*> + L(r, beta*) - H(r, alpha) |
    Scalar max_dual1_error = 0.0;      // | L(r, r Gamma(r)) |
};

DualityReport duality_check(const RateFamily& model, int samples, std::uint64_t seed);

struct ConcavityReport {
    std::vector<Scalar> rho;
    std::vector<Scalar> second_differences;  // central, at interior rho nodes
    Scalar max_second_difference = 0.0;
};

// Second differences of rho -> H(r, alpha + rho w) over a uniform rho grid.
ConcavityReport concavity_probe(const RateFamily& model, const SimplexPoint& r,
                                const Vector& alpha, const Vector& w,
                                const std::vector<Scalar>& rho_grid);

enum class SubsolutionVerdict { Solution, Subsolution, Violation };

const char* to_string(SubsolutionVerdict v) noexcept;

struct SubsolutionReport {
    std::size_t grid_size = 0;
    Scalar min_value = 0.0;      // min over the grid of H(r, -DJ(r))
    Scalar max_abs_value = 0.0;
    Vector worst_point;          // grid point attaining the minimum
    SubsolutionVerdict verdict = SubsolutionVerdict::Violation;
    Scalar tolerance = 0.0;      // tolerance the verdict was judged at
    std::vector<Scalar> values;  // per grid point, for heatmap export
};

struct SubsolutionOptions {
    // Negative means auto: 1e-7 with an analytic gradient, 1e-4 otherwise.
    Scalar tolerance = -1.0;
    int jobs = 1;
};

// Evaluates H(r, -DJ(r)) over an interior grid. Solution when max |H| <= tol,
// Subsolution when min H >= -tol, Violation otherwise.
SubsolutionReport subsolution_check(const RateFamily& model, const LyapunovCandidate& J,
                                    const SimplexGrid& grid, const SubsolutionOptions& opts = {});

// <DJ(r), r Gamma(r)> at an interior point.
Scalar orbital_derivative(const RateFamily& model, const LyapunovCandidate& J,
                          const SimplexPoint& r);

// ---------------------------------------------------------------------------
// Dirichlet forms
// ---------------------------------------------------------------------------

// E_Gamma(f, g) = - sum_x f(x) (sum_y g(y) Gamma_xy) pi_x, pi stationary.
Scalar dirichlet_form(const RateMatrix& gamma, const SimplexPoint& pi, const Vector& f,
                      const Vector& g);

// Donsker-Varadhan rate I(mu) = E(sqrt(dmu/dpi), sqrt(dmu/dpi)) for a
// reversible generator.
Scalar dv_rate_reversible(const RateMatrix& gamma, const SimplexPoint& pi, const SimplexPoint& mu);

}  // namespace nlmarkov
