#pragma once

// Adaptive Gauss-Kronrod 7/15 quadrature for the 1-D potential integrals.
// The integrands are merely continuous (possibly kinked), so the interval
// is subdivided where the embedded error estimate is largest.

#include <functional>

#include "nlmarkov/errors.hpp"
#include "nlmarkov/simplex.hpp"

namespace nlmarkov {

struct QuadratureOptions {
    Scalar abs_tol = 1e-12;
    int max_subdivisions = 10000;
};

// Integral of f over [a, b] (a may exceed b; the sign convention is the
// usual oriented one). Throws QuadratureFailure when the subdivision budget
// is exhausted before the tolerance is met.
Scalar integrate(const std::function<Scalar(Scalar)>& f, Scalar a, Scalar b,
                 const QuadratureOptions& opts = {});

}  // namespace nlmarkov
