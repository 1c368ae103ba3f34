#include "nlmarkov/finite_n.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include "nlmarkov/rng.hpp"

namespace nlmarkov {

namespace {

// binomial(n + d - 1, d - 1) without overflow for the guard comparison.
double lattice_size_estimate(int n, Eigen::Index d) {
    double size = 1.0;
    for (Eigen::Index k = 1; k <= d - 1; ++k)
        size *= static_cast<double>(n + k) / static_cast<double>(k);
    return size;
}

std::vector<Eigen::VectorXi> enumerate_states(int n, Eigen::Index d) {
    std::vector<Eigen::VectorXi> states;
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(d);
    std::function<void(Eigen::Index, int)> walk = [&](Eigen::Index pos, int remaining) {
        if (pos == d - 1) {
            counts(pos) = remaining;
            states.push_back(counts);
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            counts(pos) = k;
            walk(pos + 1, remaining - k);
        }
    };
    walk(0, n);
    return states;
}

Scalar log_multinomial(int n, const Eigen::VectorXi& counts) {
    Scalar acc = std::lgamma(static_cast<Scalar>(n) + 1.0);
    for (Eigen::Index x = 0; x < counts.size(); ++x)
        acc -= std::lgamma(static_cast<Scalar>(counts(x)) + 1.0);
    return acc;
}

}  // namespace

Eigen::Index LatticeChain::index_of(const Eigen::VectorXi& counts) const {
    // Rank within the lexicographic composition enumeration.
    auto compositions = [](int m, Eigen::Index parts) {
        double c = 1.0;
        for (Eigen::Index k = 1; k <= parts - 1; ++k)
            c *= static_cast<double>(m + k) / static_cast<double>(k);
        return static_cast<Eigen::Index>(std::llround(c));
    };
    require(counts.size() == d && counts.sum() == n && counts.minCoeff() >= 0,
            ErrorCode::InvalidInput, "counts are not a lattice state");
    Eigen::Index rank = 0;
    int remaining = n;
    for (Eigen::Index pos = 0; pos < d - 1; ++pos) {
        for (int k = 0; k < counts(pos); ++k) rank += compositions(remaining - k, d - pos - 1);
        remaining -= counts(pos);
    }
    return rank;
}

SimplexPoint LatticeChain::point_of(Eigen::Index state) const {
    const Eigen::VectorXi& counts = states[static_cast<std::size_t>(state)];
    Vector w(d);
    for (Eigen::Index x = 0; x < d; ++x)
        w(x) = static_cast<Scalar>(counts(x)) / static_cast<Scalar>(n);
    return SimplexPoint(std::move(w));
}

LatticeDistribution make_lattice_distribution(LatticeChainPtr chain, Vector mass, Scalar time) {
    require(chain != nullptr, ErrorCode::InvalidInput, "distribution needs a chain");
    require(mass.size() == chain->size(), ErrorCode::InvalidInput,
            "mass vector does not match the lattice size");
    require(mass.minCoeff() >= -1e-10, ErrorCode::InvalidInput, "negative probability mass");
    mass = mass.cwiseMax(0.0);
    require(std::abs(mass.sum() - 1.0) <= 1e-8, ErrorCode::InvalidInput,
            "mass must sum to 1");
    mass /= mass.sum();
    return LatticeDistribution{std::move(chain), std::move(mass), time};
}

LatticeChainPtr build_lattice_chain(const RateFamily& model, int n) {
    require(n >= 1, ErrorCode::InvalidParameters, "particle count must be >= 1");
    const Eigen::Index d = model.dim();
    require(lattice_size_estimate(n, d) <= 2e5, ErrorCode::TooLarge,
            "lattice state space exceeds the 2e5 guard");

    auto chain = std::make_shared<LatticeChain>();
    chain->n = n;
    chain->d = d;
    chain->model_label = model.label();
    chain->states = enumerate_states(n, d);
    const Eigen::Index size = chain->size();

    std::vector<Eigen::Triplet<Scalar>> triplets;
    for (Eigen::Index i = 0; i < size; ++i) {
        const Eigen::VectorXi& counts = chain->states[static_cast<std::size_t>(i)];
        SimplexPoint r = chain->point_of(i);
        Matrix gamma = model(r).entries();
        Scalar diagonal = 0.0;
        for (Eigen::Index x = 0; x < d; ++x) {
            if (counts(x) == 0) continue;
            for (Eigen::Index y = 0; y < d; ++y) {
                if (y == x) continue;
                Scalar rate = static_cast<Scalar>(counts(x)) * gamma(x, y);
                if (rate <= 0.0) continue;
                Eigen::VectorXi target = counts;
                target(x) -= 1;
                target(y) += 1;
                triplets.emplace_back(static_cast<int>(i),
                                      static_cast<int>(chain->index_of(target)), rate);
                diagonal -= rate;
            }
        }
        if (diagonal != 0.0)
            triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), diagonal);
    }
    chain->generator.resize(size, size);
    chain->generator.setFromTriplets(triplets.begin(), triplets.end());
    return chain;
}

LatticeDistribution evolve_distribution(const LatticeChain& chain, const LatticeDistribution& u0,
                                        Scalar t, Scalar dt, EvolveMethod* method_used) {
    require(u0.chain.get() == &chain, ErrorCode::InvalidInput,
            "distribution belongs to a different chain");
    require(t >= 0.0 && dt > 0.0, ErrorCode::InvalidParameters, "need t >= 0 and dt > 0");
    Scalar max_diag = 0.0;
    for (Eigen::Index i = 0; i < chain.size(); ++i)
        max_diag = std::max(max_diag, -chain.generator.coeff(i, i));
    require(max_diag == 0.0 || dt <= 0.1 / max_diag, ErrorCode::StepTooLarge,
            "dt exceeds 0.1 / max |diagonal| of the generator");

    Vector mass = u0.mass;
    Eigen::SparseMatrix<Scalar> transposed = chain.generator.transpose();

    if (max_diag * t > 50.0) {
        // Uniformization, chunked so the Poisson weights stay representable.
        if (method_used != nullptr) *method_used = EvolveMethod::Uniformization;
        const Scalar uniform_rate = 1.02 * max_diag;
        Eigen::SparseMatrix<Scalar> kernel = transposed / uniform_rate;
        // kernel + I applied implicitly: m <- m + L^T m / rate.
        Scalar remaining = t;
        while (remaining > 0.0) {
            Scalar chunk = std::min(remaining, 100.0 / uniform_rate);
            remaining -= chunk;
            const Scalar a = uniform_rate * chunk;
            Vector term = mass;
            Vector acc = Vector::Zero(mass.size());
            Scalar log_weight = -a;  // log Poisson(a; 0)
            Scalar cumulative = 0.0;
            for (int k = 0; cumulative < 1.0 - 1e-14 && k < 100000; ++k) {
                if (k > 0) {
                    term = term + kernel * term;  // P^T term
                    log_weight += std::log(a) - std::log(static_cast<Scalar>(k));
                }
                Scalar weight = std::exp(log_weight);
                cumulative += weight;
                if (weight > 0.0) acc += weight * term;
            }
            mass = acc;
        }
    } else {
        if (method_used != nullptr) *method_used = EvolveMethod::RungeKutta;
        const long steps = static_cast<long>(std::ceil(t / dt - 1e-12));
        for (long k = 0; k < steps; ++k) {
            Scalar step = std::min(dt, t - static_cast<Scalar>(k) * dt);
            Vector k1 = transposed * mass;
            Vector k2 = transposed * Vector(mass + 0.5 * step * k1);
            Vector k3 = transposed * Vector(mass + 0.5 * step * k2);
            Vector k4 = transposed * Vector(mass + step * k3);
            mass += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }
    return make_lattice_distribution(u0.chain, std::move(mass), u0.time + t);
}

LatticeDistribution stationary_of_chain(LatticeChainPtr chain) {
    require(chain != nullptr, ErrorCode::InvalidInput, "null chain");
    const Eigen::Index size = chain->size();

    // Strong connectivity over the sparse pattern, forward and backward.
    auto reaches_all = [&](bool backward) {
        std::vector<char> seen(static_cast<std::size_t>(size), 0);
        std::deque<Eigen::Index> queue{0};
        seen[0] = 1;
        Eigen::Index count = 1;
        // Column adjacency needs the transposed pattern.
        Eigen::SparseMatrix<Scalar, Eigen::RowMajor> pattern =
            backward ? Eigen::SparseMatrix<Scalar, Eigen::RowMajor>(chain->generator.transpose())
                     : chain->generator;
        while (!queue.empty()) {
            Eigen::Index i = queue.front();
            queue.pop_front();
            for (Eigen::SparseMatrix<Scalar, Eigen::RowMajor>::InnerIterator it(pattern, i); it;
                 ++it) {
                Eigen::Index j = it.col();
                if (j == i || it.value() <= 0.0 || seen[static_cast<std::size_t>(j)]) continue;
                seen[static_cast<std::size_t>(j)] = 1;
                queue.push_back(j);
                ++count;
            }
        }
        return count == size;
    };
    require(reaches_all(false) && reaches_all(true), ErrorCode::NotIrreducible,
            "lattice chain is not irreducible");

    Vector pi;
    if (size <= 1024) {
        // GTH elimination: no subtractions, so entries carry componentwise
        // relative accuracy. Stationary masses decay like e^{-N J(r)}, and
        // the rate estimates need their logarithms, which a residual-accurate
        // solve cannot deliver.
        Matrix a = Matrix(chain->generator);
        for (Eigen::Index n = size - 1; n >= 1; --n) {
            Scalar total = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) total += a(n, j);
            require(total > 0.0, ErrorCode::NotIrreducible,
                    "GTH elimination hit an isolated block");
            for (Eigen::Index i = 0; i < n; ++i) a(i, n) /= total;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (a(i, n) == 0.0) continue;
                for (Eigen::Index j = 0; j < n; ++j)
                    if (j != i) a(i, j) += a(i, n) * a(n, j);
            }
        }
        pi = Vector::Zero(size);
        pi(0) = 1.0;
        Scalar scale = 1.0;
        for (Eigen::Index n = 1; n < size; ++n) {
            Scalar mass = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) mass += pi(i) * a(i, n);
            pi(n) = mass;
            scale += mass;
            if (scale > 1e280) {  // keep the recursion representable
                pi.head(n + 1) /= scale;
                scale = 1.0;
            }
        }
        pi /= pi.sum();
    } else {
        // Large lattices: augmented sparse solve, L^T pi = 0 with the first
        // equation replaced by the normalization.
        std::vector<Eigen::Triplet<Scalar>> triplets;
        for (Eigen::Index i = 0; i < size; ++i) {
            for (Eigen::SparseMatrix<Scalar, Eigen::RowMajor>::InnerIterator it(chain->generator,
                                                                                i);
                 it; ++it) {
                if (it.col() == 0) continue;  // row 0 of the augmented matrix is all ones
                triplets.emplace_back(static_cast<int>(it.col()), static_cast<int>(i), it.value());
            }
        }
        for (Eigen::Index i = 0; i < size; ++i) triplets.emplace_back(0, static_cast<int>(i), 1.0);
        Eigen::SparseMatrix<Scalar> a(size, size);
        a.setFromTriplets(triplets.begin(), triplets.end());
        a.makeCompressed();

        Eigen::SparseLU<Eigen::SparseMatrix<Scalar>> solver;
        solver.analyzePattern(a);
        solver.factorize(a);
        require(solver.info() == Eigen::Success, ErrorCode::SolverSingular,
                "sparse stationary solve failed");
        Vector rhs = Vector::Zero(size);
        rhs(0) = 1.0;
        pi = solver.solve(rhs);
        require(pi.allFinite(), ErrorCode::SolverSingular, "sparse stationary solve failed");
        pi += solver.solve(Vector(rhs - a * pi));  // one refinement pass
        pi = pi.cwiseMax(0.0);
        pi /= pi.sum();
    }

    Vector residual = chain->generator.transpose() * pi;
    require(residual.lpNorm<1>() <= 1e-10, ErrorCode::SolverSingular,
            "stationary residual did not reach tolerance");
    return make_lattice_distribution(std::move(chain), std::move(pi), 0.0);
}

RateEstimate rate_estimate(const LatticeDistribution& u) {
    const Eigen::Index size = u.mass.size();
    RateEstimate est;
    est.value = Vector::Zero(size);
    est.present.assign(static_cast<std::size_t>(size), 0);
    const Scalar n = static_cast<Scalar>(u.chain->n);
    Scalar min_value = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < size; ++i) {
        if (u.mass(i) <= 0.0) continue;
        est.present[static_cast<std::size_t>(i)] = 1;
        est.value(i) = -std::log(u.mass(i)) / n;
        min_value = std::min(min_value, est.value(i));
    }
    require(std::isfinite(min_value), ErrorCode::ZeroMass, "distribution has no positive mass");
    for (Eigen::Index i = 0; i < size; ++i)
        if (est.present[static_cast<std::size_t>(i)]) est.value(i) -= min_value;
    return est;
}

Scalar scaled_relative_entropy(const SimplexPoint& q, const LatticeDistribution& u) {
    const LatticeChain& chain = *u.chain;
    require(q.dim() == chain.d, ErrorCode::InvalidInput, "dimension mismatch");
    const int n = chain.n;
    Vector log_q(chain.d);
    for (Eigen::Index x = 0; x < chain.d; ++x)
        log_q(x) = q[x] > 0.0 ? std::log(q[x]) : -std::numeric_limits<Scalar>::infinity();

    Scalar total = 0.0;
    for (Eigen::Index i = 0; i < chain.size(); ++i) {
        const Eigen::VectorXi& counts = chain.states[static_cast<std::size_t>(i)];
        Scalar log_type = 0.0;  // log prod q_x^{N r_x}
        bool charged = true;
        for (Eigen::Index x = 0; x < chain.d; ++x) {
            if (counts(x) == 0) continue;
            if (q[x] <= 0.0) {
                charged = false;
                break;
            }
            log_type += static_cast<Scalar>(counts(x)) * log_q(x);
        }
        if (!charged) continue;
        Scalar log_comb = log_multinomial(n, counts);
        Scalar weight = std::exp(log_comb + log_type);  // q^{(x) N}-probability of the type class
        if (weight == 0.0) continue;
        require(u.mass(i) > 0.0, ErrorCode::ZeroMass,
                "configuration law puts zero mass on a type charged by q");
        // log of the per-configuration probability of the exchangeable law.
        Scalar log_p = std::log(u.mass(i)) - log_comb;
        total += weight * (log_type - log_p);
    }
    return total / static_cast<Scalar>(n);
}

// ---------------------------------------------------------------------------
// Gillespie
// ---------------------------------------------------------------------------

InitialSampler InitialSampler::point_mass(SimplexPoint q) {
    InitialSampler s;
    s.kind_ = Kind::PointMass;
    s.q_ = std::move(q);
    return s;
}

InitialSampler InitialSampler::iid(SimplexPoint q) {
    InitialSampler s;
    s.kind_ = Kind::Iid;
    s.q_ = std::move(q);
    return s;
}

InitialSampler InitialSampler::explicit_law(std::vector<std::pair<Eigen::VectorXi, Scalar>> atoms) {
    require(!atoms.empty(), ErrorCode::InvalidParameters, "explicit law needs atoms");
    Scalar total = 0.0;
    for (const auto& a : atoms) {
        require(a.second >= 0.0, ErrorCode::InvalidParameters, "atom probabilities must be >= 0");
        total += a.second;
    }
    require(total > 0.0, ErrorCode::InvalidParameters, "explicit law has no mass");
    InitialSampler s;
    s.kind_ = Kind::Explicit;
    s.atoms_ = std::move(atoms);
    for (auto& a : s.atoms_) a.second /= total;
    return s;
}

Eigen::VectorXi InitialSampler::draw(std::mt19937_64& rng, int n, Eigen::Index d) const {
    switch (kind_) {
        case Kind::PointMass: {
            require(q_.has_value() && q_->dim() == d, ErrorCode::InvalidParameters,
                    "point mass sampler dimension mismatch");
            // Nearest lattice state by largest remainders.
            Eigen::VectorXi counts(d);
            std::vector<std::pair<Scalar, Eigen::Index>> remainders;
            int assigned = 0;
            for (Eigen::Index x = 0; x < d; ++x) {
                Scalar exact = (*q_)[x] * static_cast<Scalar>(n);
                counts(x) = static_cast<int>(std::floor(exact));
                assigned += counts(x);
                remainders.push_back({exact - std::floor(exact), x});
            }
            std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            for (int k = 0; k < n - assigned; ++k)
                counts(remainders[static_cast<std::size_t>(k)].second) += 1;
            return counts;
        }
        case Kind::Iid: {
            require(q_.has_value() && q_->dim() == d, ErrorCode::InvalidParameters,
                    "iid sampler dimension mismatch");
            Eigen::VectorXi counts = Eigen::VectorXi::Zero(d);
            std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
            for (int i = 0; i < n; ++i) {
                Scalar u = unif(rng);
                Scalar acc = 0.0;
                Eigen::Index x = d - 1;
                for (Eigen::Index k = 0; k < d; ++k) {
                    acc += (*q_)[k];
                    if (u <= acc) {
                        x = k;
                        break;
                    }
                }
                counts(x) += 1;
            }
            return counts;
        }
        case Kind::Explicit: {
            std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
            Scalar u = unif(rng);
            Scalar acc = 0.0;
            for (const auto& a : atoms_) {
                acc += a.second;
                if (u <= acc) {
                    require(a.first.size() == d && a.first.sum() == n, ErrorCode::InvalidParameters,
                            "explicit atom is not a lattice state");
                    return a.first;
                }
            }
            return atoms_.back().first;
        }
    }
    fail(ErrorCode::InvalidParameters, "unknown sampler kind");
}

const SimplexPoint& EmpiricalPath::at(Scalar t) const {
    require(!states.empty(), ErrorCode::InvalidInput, "empty path");
    // Last state with jump time <= t.
    std::size_t lo = 0;
    for (std::size_t k = 1; k < jump_times.size() && jump_times[k] <= t; ++k) lo = k;
    return states[lo];
}

EmpiricalPath gillespie_simulate(const RateFamily& model, int n, const InitialSampler& initial,
                                 Scalar t_end, std::uint64_t seed, std::uint64_t replica) {
    require(n >= 1, ErrorCode::InvalidParameters, "particle count must be >= 1");
    require(t_end >= 0.0, ErrorCode::InvalidParameters, "t_end must be >= 0");
    const Eigen::Index d = model.dim();
    std::mt19937_64 rng = make_stream(seed, 0x9E0000 + replica);

    EmpiricalPath path;
    path.seed = seed;
    Eigen::VectorXi counts = initial.draw(rng, n, d);
    const Scalar scale = static_cast<Scalar>(n);
    auto point = [&](const Eigen::VectorXi& c) {
        Vector w(d);
        for (Eigen::Index x = 0; x < d; ++x) w(x) = static_cast<Scalar>(c(x)) / scale;
        return SimplexPoint(std::move(w));
    };

    Scalar t = 0.0;
    path.jump_times.push_back(t);
    path.states.push_back(point(counts));

    std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
    Matrix rates(d, d);
    while (t < t_end) {
        SimplexPoint r = point(counts);
        Matrix gamma = model(r).entries();
        Scalar total = 0.0;
        for (Eigen::Index x = 0; x < d; ++x) {
            for (Eigen::Index y = 0; y < d; ++y) {
                Scalar rate = (x == y || counts(x) == 0) ? 0.0
                              : static_cast<Scalar>(counts(x)) * gamma(x, y);
                rates(x, y) = rate;
                total += rate;
            }
        }
        if (total <= 0.0) break;  // absorbed

        std::exponential_distribution<Scalar> holding(total);
        t += holding(rng);
        if (t > t_end) break;

        Scalar target = unif(rng) * total;
        Scalar acc = 0.0;
        Eigen::Index jump_x = d - 1, jump_y = d - 1;
        bool chosen = false;
        for (Eigen::Index x = 0; x < d && !chosen; ++x)
            for (Eigen::Index y = 0; y < d && !chosen; ++y) {
                acc += rates(x, y);
                if (target <= acc && rates(x, y) > 0.0) {
                    jump_x = x;
                    jump_y = y;
                    chosen = true;
                }
            }
        if (!chosen) continue;  // roundoff tail; redraw

        counts(jump_x) -= 1;
        counts(jump_y) += 1;
        path.jump_times.push_back(t);
        path.states.push_back(point(counts));
    }
    return path;
}

}  // namespace nlmarkov
