#include "nlmarkov/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

namespace nlmarkov {

namespace {

// Gauss-Kronrod 15-point nodes and weights on [-1, 1] (Kronrod extension of
// 7-point Gauss). Nodes are symmetric; only the nonnegative half is listed.
constexpr int kKronrodHalf = 8;
constexpr Scalar kKronrodNodes[kKronrodHalf] = {
    0.000000000000000000000000000000000e+00, 2.077849550078984676006894037732449e-01,
    4.058451513773971669066064120769615e-01, 5.860872354676911302941448382587296e-01,
    7.415311855993944398638647732807884e-01, 8.648644233597690727897127886409262e-01,
    9.491079123427585245261896840478513e-01, 9.914553711208126392068546975263285e-01,
};
constexpr Scalar kKronrodWeights[kKronrodHalf] = {
    2.094821410847278280129991748917143e-01, 2.044329400752988924141619992346491e-01,
    1.903505780647854099132564024210137e-01, 1.690047266392679028265834265985503e-01,
    1.406532597155259187451895905102379e-01, 1.047900103222501838398763225415180e-01,
    6.309209262997855329070066318920429e-02, 2.293532201052922496373200805896959e-02,
};
// 7-point Gauss weights, aligned with the even-index Kronrod nodes.
constexpr Scalar kGaussWeights[4] = {
    4.179591836734693877551020408163265e-01, 3.818300505051189449503697754889751e-01,
    2.797053914892766679014677714237796e-01, 1.294849661688696932706114326790820e-01,
};

struct Panel {
    Scalar a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

Panel evaluate_panel(const std::function<Scalar(Scalar)>& f, Scalar a, Scalar b) {
    const Scalar mid = 0.5 * (a + b);
    const Scalar half = 0.5 * (b - a);
    Scalar kronrod = 0.0, gauss = 0.0;
    for (int i = 0; i < kKronrodHalf; ++i) {
        Scalar x = half * kKronrodNodes[i];
        Scalar fsum = (i == 0) ? f(mid) : f(mid - x) + f(mid + x);
        kronrod += kKronrodWeights[i] * fsum;
        if (i % 2 == 0) gauss += kGaussWeights[i / 2] * fsum;
    }
    Panel p;
    p.a = a;
    p.b = b;
    p.value = kronrod * half;
    p.error = std::abs((kronrod - gauss) * half);
    return p;
}

}  // namespace

Scalar integrate(const std::function<Scalar(Scalar)>& f, Scalar a, Scalar b,
                 const QuadratureOptions& opts) {
    if (a == b) return 0.0;
    const Scalar sign = (b >= a) ? 1.0 : -1.0;
    const Scalar lo = std::min(a, b), hi = std::max(a, b);

    std::priority_queue<Panel> panels;
    panels.push(evaluate_panel(f, lo, hi));
    Scalar total_error = panels.top().error;
    Scalar total_value = panels.top().value;
    int splits = 0;
    while (total_error > opts.abs_tol) {
        require(splits < opts.max_subdivisions, ErrorCode::QuadratureFailure,
                "quadrature did not reach tolerance within the subdivision budget");
        Panel worst = panels.top();
        panels.pop();
        Scalar mid = 0.5 * (worst.a + worst.b);
        require(mid > worst.a && mid < worst.b, ErrorCode::QuadratureFailure,
                "quadrature interval collapsed below machine resolution");
        Panel left = evaluate_panel(f, worst.a, mid);
        Panel right = evaluate_panel(f, mid, worst.b);
        total_value += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        panels.push(left);
        panels.push(right);
        ++splits;
    }
    return sign * total_value;
}

}  // namespace nlmarkov
