#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/error.hpp"
#include "aoi/markov.hpp"
#include "aoi/matrix.hpp"
#include "aoi/protocol.hpp"

namespace aoi {

struct AnalysisSettings {
    int num_users = 1;
    double fp_threshold = 1e-6;
    int fp_max_iters = 10'000;
    double damping = 0.0;  // weight kept on the previous iterate, in [0, 1)
    int cov_k_max = 1000;
    double cov_term_tol = 1e-12;
    double stat_dist_tol = 1e-12;

    void validate() const {
        auto bad = [](const std::string& what) { throw ParameterError(what); };
        if (num_users < 1) bad("num_users must be >= 1");
        if (!(fp_threshold > 0.0)) bad("fp_threshold must be > 0");
        if (fp_max_iters < 1) bad("fp_max_iters must be >= 1");
        if (!(damping >= 0.0 && damping < 1.0)) bad("damping must be in [0, 1)");
        if (cov_k_max < 2) bad("cov_k_max must be >= 2");
        if (!(cov_term_tol > 0.0)) bad("cov_term_tol must be > 0");
        if (!(stat_dist_tol > 0.0)) bad("stat_dist_tol must be > 0");
    }
};

/// Below this delivery rate a protocol is treated as never delivering.
inline constexpr double kMinDeliveryRate = 1e-12;

/// Probability that none of the other N-1 users transmits.
inline double idle_probability(double tx_prob, int num_users) {
    return std::pow(1.0 - tx_prob, num_users - 1);
}

/// Long-run per-user delivery rate m = mu_tx * (1 - mu_tx)^(N-1).
inline double delivery_rate(double tx_prob, int num_users) {
    return tx_prob * idle_probability(tx_prob, num_users);
}

/// Second-order AoI estimate E[AoI] ~ (v^2/m^2 + 1/m)/2 + 1/2.
inline double aoi_second_order(double mean_rate, double temporal_variance) {
    if (!(mean_rate > 0.0))
        throw DegenerateRateError("delivery rate must be positive for an AoI estimate");
    if (!(temporal_variance >= 0.0))
        throw ParameterError("temporal variance must be non-negative");
    const double aoi =
        0.5 * (temporal_variance / (mean_rate * mean_rate) + 1.0 / mean_rate) + 0.5;
    if (!std::isfinite(aoi)) throw DegenerateRateError("AoI estimate is not finite");
    return aoi;
}

/// Outcome of the mean-field fixed-point iteration.
struct FixedPoint {
    std::vector<double> mu;
    double gamma0 = 0.0;
    double gamma1 = 0.0;
    int iterations = 0;
    double residual = 0.0;  // ||g0*mu*M0 + g1*mu*M1 - mu||_1 at the returned mu
    bool converged = false;
    std::vector<double> step_history;  // ||mu_bar - mu'||_1 per outer iteration
    int refinement_steps = 0;          // secant steps accepted after convergence
};

struct VarianceResult {
    double value = 0.0;      // clamped at 0
    double unclamped = 0.0;  // before clamping
    int terms = 0;           // covariance terms summed (k = 2 .. 1 + terms)
};

struct MeanFieldSolution {
    std::vector<double> mu;
    double gamma0 = 0.0;
    double gamma1 = 0.0;
    double mean_rate = 0.0;
    double temporal_variance = 0.0;
    double temporal_variance_unclamped = 0.0;
    double aoi_approx = 0.0;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    int covariance_terms = 0;
    double damping = 0.0;  // damping that produced this solution
};

namespace detail {

/// L1 residual of the mean-field balance equation at `mu`.
inline double fixed_point_residual(SparsePair& chain, std::span<const double> mu,
                                   std::size_t tx, int num_users,
                                   std::vector<double>& scratch) {
    const double g0 = idle_probability(mu[tx], num_users);
    chain.mix(g0, 1.0 - g0);
    return StationarySolver::residual(chain, mu, scratch);
}

}  // namespace detail

namespace detail {

// The balance equation depends on mu only through x = mu_tx, so the fixed
// point is a root of h(x) = pi_tx(gamma0(x)) - x, where pi is the limit
// distribution of the gamma0-mixed chain. Secant steps from the last two
// outer iterates drive h to rounding level. Without this the covariance
// series in `temporal_variance` is centred on a rate that is off by up to
// the outer threshold, and that bias accumulates linearly in the number of
// terms summed. Returns the number of accepted steps; `mu` and `x` are only
// replaced by strictly better iterates close to the starting point.
inline int polish_fixed_point(SparsePair& chain, StationarySolver& solver, std::size_t tx,
                              int users, double tol, double x_prev, std::vector<double>& mu) {
    constexpr int kMaxSteps = 40;
    std::vector<double> trial(mu.size());
    auto h_at = [&](double x, std::vector<double>& out) {
        const double g0 = idle_probability(x, users);
        chain.mix(g0, 1.0 - g0);
        solver.solve_into(chain, mu, tol, out);
        return out[tx] - x;
    };
    const double anchor = mu[tx];
    const double window = std::max(1e-3, 100.0 * std::abs(anchor - x_prev));
    double x0 = x_prev;
    double h0 = h_at(x0, trial);
    double x1 = anchor;
    std::vector<double> best = mu;
    double h1 = h_at(x1, trial);
    best = trial;
    double best_abs = std::abs(h1);
    int accepted = 0;
    for (int step = 0; step < kMaxSteps && best_abs > 0.0; ++step) {
        const double denom = h1 - h0;
        if (denom == 0.0) break;
        const double x2 = x1 - h1 * (x1 - x0) / denom;
        if (!(x2 >= 0.0 && x2 <= 1.0) || std::abs(x2 - anchor) > window) break;
        const double h2 = h_at(x2, trial);
        x0 = x1;
        h0 = h1;
        x1 = x2;
        h1 = h2;
        if (std::abs(h2) < best_abs) {
            best_abs = std::abs(h2);
            best = trial;
            ++accepted;
        } else if (std::abs(h2) >= 2.0 * best_abs) {
            break;
        }
        if (std::abs(x1 - x0) <= 4.0 * std::numeric_limits<double>::epsilon() * x1) break;
    }
    mu = std::move(best);
    return accepted;
}

}  // namespace detail

/// Mean-field fixed point for N symmetric users.
///
/// Starts from all mass on the transmission state. Each outer step freezes
/// gamma0 = (1 - mu_bar_tx)^(N-1), takes the limit distribution mu' of
/// gamma0*M0 + gamma1*M1 started from mu_bar, and moves
/// mu_bar <- (1 - damping)*mu' + damping*mu_bar. Stops once
/// ||mu_bar - mu'||_1 < fp_threshold and the balance residual at mu' is also
/// within the threshold; the accepted point is then polished to rounding
/// level (see detail::polish_fixed_point). Never throws on non-convergence;
/// check `converged`.
inline FixedPoint iterate_fixed_point(const ProtocolSpec& spec, const AnalysisSettings& settings) {
    const std::size_t n = static_cast<std::size_t>(spec.num_states);
    const std::size_t tx = spec.tx_index();
    const int users = settings.num_users;

    SparsePair chain(spec.m0, spec.m1);
    StationarySolver solver;
    std::vector<double> mu_bar(n, 0.0), mu_new(n, 0.0), scratch;
    mu_bar[tx] = 1.0;

    FixedPoint fp;
    for (int it = 1; it <= settings.fp_max_iters; ++it) {
        const double g0 = idle_probability(mu_bar[tx], users);
        chain.mix(g0, 1.0 - g0);
        solver.solve_into(chain, mu_bar, settings.stat_dist_tol, mu_new);
        const double step = l1_distance(mu_bar, mu_new);
        fp.step_history.push_back(step);
        fp.iterations = it;
        if (step < settings.fp_threshold) {
            const double r = detail::fixed_point_residual(chain, mu_new, tx, users, scratch);
            if (r <= settings.fp_threshold) {
                fp.converged = true;
                break;
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            mu_bar[i] = (1.0 - settings.damping) * mu_new[i] + settings.damping * mu_bar[i];
    }
    if (fp.converged && users > 1) {
        std::vector<double> polished = mu_new;
        try {
            fp.refinement_steps = detail::polish_fixed_point(
                chain, solver, tx, users, settings.stat_dist_tol, mu_bar[tx], polished);
            const double r = detail::fixed_point_residual(chain, polished, tx, users, scratch);
            const double r_old = detail::fixed_point_residual(chain, mu_new, tx, users, scratch);
            if (r <= r_old) mu_new = std::move(polished);
        } catch (const Error&) {
            fp.refinement_steps = 0;
        }
    }
    fp.mu = mu_new;
    fp.residual = detail::fixed_point_residual(chain, fp.mu, tx, users, scratch);
    fp.gamma0 = idle_probability(fp.mu[tx], users);
    fp.gamma1 = 1.0 - fp.gamma0;
    return fp;
}

/// As `iterate_fixed_point`, but raises ConvergenceError (with the step
/// history) when the iteration cap is reached.
inline FixedPoint solve_fixed_point(const ProtocolSpec& spec, const AnalysisSettings& settings) {
    settings.validate();
    require_valid(spec);
    auto fp = iterate_fixed_point(spec, settings);
    if (!fp.converged) {
        std::ostringstream os;
        os << "fixed point did not converge in " << settings.fp_max_iters
           << " iterations (last step " << fp.step_history.back() << ", residual " << fp.residual
           << ")";
        throw ConvergenceError(os.str(), std::move(fp.step_history));
    }
    return fp;
}

/// Temporal variance of one user's delivery process,
/// v^2 = m - m^2 + 2 * sum_{k>=2} (q_k - m) * m,
/// where q_k = P(D(k) = 1 | D(1) = 1) = gamma0 * [e_tx M0 P^(k-2)]_tx and
/// P = gamma0*M0 + gamma1*M1. The sum stops at cov_k_max, or earlier after
/// three consecutive terms below cov_term_tol in magnitude.
inline VarianceResult temporal_variance(const ProtocolSpec& spec, std::span<const double> mu,
                                        double gamma0, const AnalysisSettings& settings) {
    const std::size_t n = static_cast<std::size_t>(spec.num_states);
    const std::size_t tx = spec.tx_index();
    const double m = mu[tx] * gamma0;
    if (!(m >= kMinDeliveryRate)) {
        std::ostringstream os;
        os << "delivery rate " << m << " is below " << kMinDeliveryRate
           << "; AoI is unbounded";
        throw DegenerateRateError(os.str());
    }

    SparsePair chain(spec.m0, spec.m1);
    chain.mix(gamma0, 1.0 - gamma0);
    std::vector<double> r(spec.m0.row(tx).begin(), spec.m0.row(tx).end());
    std::vector<double> next(n);

    VarianceResult out;
    double sum = 0.0;
    int quiet = 0;
    for (int k = 2; k <= settings.cov_k_max; ++k) {
        if (k > 2) {
            chain.left_multiply(r, next);
            r.swap(next);
        }
        const double term = (gamma0 * r[tx] - m) * m;
        sum += term;
        ++out.terms;
        quiet = std::abs(term) < settings.cov_term_tol ? quiet + 1 : 0;
        if (quiet >= 3) break;
    }
    out.unclamped = m - m * m + 2.0 * sum;
    out.value = out.unclamped < 0.0 ? 0.0 : out.unclamped;
    if (!std::isfinite(out.value)) throw DegenerateRateError("temporal variance is not finite");
    return out;
}

namespace detail {

inline MeanFieldSolution finish(const ProtocolSpec& spec, FixedPoint fp,
                                const AnalysisSettings& settings) {
    MeanFieldSolution sol;
    sol.gamma0 = fp.gamma0;
    sol.gamma1 = fp.gamma1;
    sol.mean_rate = fp.mu[spec.tx_index()] * fp.gamma0;
    sol.iterations = fp.iterations;
    sol.residual = fp.residual;
    sol.converged = fp.converged;
    sol.damping = settings.damping;
    try {
        const auto var = temporal_variance(spec, fp.mu, fp.gamma0, settings);
        sol.temporal_variance = var.value;
        sol.temporal_variance_unclamped = var.unclamped;
        sol.covariance_terms = var.terms;
    } catch (Error& e) {
        e.set_stage("temporal variance");
        throw;
    }
    try {
        sol.aoi_approx = aoi_second_order(sol.mean_rate, sol.temporal_variance);
    } catch (Error& e) {
        e.set_stage("AoI approximation");
        throw;
    }
    sol.mu = std::move(fp.mu);
    return sol;
}

}  // namespace detail

/// Full pipeline without the convergence requirement: the returned
/// solution may have `converged == false`, in which case its numbers are
/// computed from the last iterate. Degenerate rates still throw.
inline MeanFieldSolution evaluate(const ProtocolSpec& spec, const AnalysisSettings& settings) {
    settings.validate();
    require_valid(spec);
    FixedPoint fp;
    try {
        fp = iterate_fixed_point(spec, settings);
    } catch (Error& e) {
        e.set_stage("fixed point");
        throw;
    }
    return detail::finish(spec, std::move(fp), settings);
}

/// Fixed point, delivery rate, temporal variance and AoI estimate in one
/// call. Every failure carries the stage that produced it.
inline MeanFieldSolution analyze(const ProtocolSpec& spec, const AnalysisSettings& settings) {
    settings.validate();
    require_valid(spec);
    FixedPoint fp;
    try {
        fp = solve_fixed_point(spec, settings);
    } catch (Error& e) {
        e.set_stage("fixed point");
        throw;
    }
    return detail::finish(spec, std::move(fp), settings);
}

/// `analyze`, retrying once with damping 0.5 when plain iteration fails to
/// converge.
inline MeanFieldSolution analyze_with_retry(const ProtocolSpec& spec,
                                            const AnalysisSettings& settings) {
    try {
        return analyze(spec, settings);
    } catch (const ConvergenceError&) {
        if (settings.damping != 0.0) throw;
        AnalysisSettings damped = settings;
        damped.damping = 0.5;
        return analyze(spec, damped);
    }
}

}  // namespace aoi
