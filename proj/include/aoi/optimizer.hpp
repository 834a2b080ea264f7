#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/error.hpp"
#include "aoi/meanfield.hpp"
#include "aoi/parallel.hpp"
#include "aoi/protocol.hpp"

namespace aoi {

/// Rounds to 12 decimals so grid values equal their decimal spelling
/// (0.001 * 3 becomes the double nearest 0.003).
inline double snap_decimal(double x) { return std::round(x * 1e12) / 1e12; }

struct GridSpec {
    int h_min = 1;
    int h_max = 1;
    double p_step = 0.001;
    double p_min = 0.001;
    double p_max = 1.0;

    /// H in 1..3N, p in {0.001, 0.002, ..., 1}.
    static GridSpec defaults(int num_users) {
        GridSpec g;
        g.h_max = 3 * num_users;
        return g;
    }

    void validate() const {
        if (h_min < 1 || h_max < h_min) throw ParameterError("H range must satisfy 1 <= h_min <= h_max");
        if (!(p_step > 0.0 && p_step < 1.0)) throw ParameterError("p_step must be in (0, 1)");
        if (!(p_min > 0.0 && p_min <= p_max && p_max <= 1.0))
            throw ParameterError("p range must satisfy 0 < p_min <= p_max <= 1");
    }

    std::vector<double> p_values() const {
        std::vector<double> ps;
        const auto count = static_cast<long>(std::floor((p_max - p_min) / p_step + 1e-9));
        for (long i = 0; i <= count; ++i) ps.push_back(snap_decimal(p_min + static_cast<double>(i) * p_step));
        return ps;
    }

    std::size_t size() const {
        return static_cast<std::size_t>(h_max - h_min + 1) * p_values().size();
    }
};

template <class Params>
struct SurfaceRecord {
    Params params;
    double mean_rate = 0.0;
    double temporal_variance = 0.0;
    double aoi_approx = 0.0;
    bool converged = false;
};

template <class Params>
struct SkippedPoint {
    Params params;
    std::string reason;
};

template <class Params>
struct GridSearchResult {
    Params best_params{};
    MeanFieldSolution best_solution;
    std::vector<SurfaceRecord<Params>> surface;  // candidate order
    std::vector<SkippedPoint<Params>> skipped;   // candidate order
};

struct SearchOptions {
    unsigned threads = 1;
    /// Called with (points done, total) roughly every `progress_every` points.
    std::function<void(std::size_t, std::size_t)> progress;
    std::size_t progress_every = 1000;
};

/// Result of evaluating one protocol: a solution (possibly flagged as not
/// converged) or the reason no estimate exists.
struct PointOutcome {
    std::optional<MeanFieldSolution> solution;
    std::string failure;
};

/// Plain iteration first; if it hits the cap, one retry with damping 0.5.
/// A point that still fails to converge keeps its last-iterate numbers with
/// converged = false. Degenerate rates and other errors become failures.
inline PointOutcome evaluate_point(const ProtocolSpec& spec, const AnalysisSettings& settings) {
    PointOutcome out;
    try {
        auto sol = evaluate(spec, settings);
        if (!sol.converged && settings.damping == 0.0) {
            AnalysisSettings damped = settings;
            damped.damping = 0.5;
            auto retry = evaluate(spec, damped);
            if (retry.converged) sol = std::move(retry);
        }
        out.solution = std::move(sol);
    } catch (const Error& e) {
        out.failure = e.describe();
    }
    return out;
}

/// Exhaustive search over `candidates` for the protocol with the smallest
/// second-order AoI estimate. `family` maps a candidate to its ProtocolSpec.
/// Ties go to the earliest candidate. Only converged points compete.
template <class Params, class Family>
GridSearchResult<Params> grid_search(const std::vector<Params>& candidates, Family&& family,
                                     const AnalysisSettings& settings,
                                     const SearchOptions& options = {}) {
    settings.validate();
    struct Slot {
        std::optional<SurfaceRecord<Params>> record;
        std::string failure;
    };
    std::vector<Slot> slots(candidates.size());
    std::atomic<std::size_t> done{0};

    parallel_for(candidates.size(), options.threads, [&](std::size_t i) {
        auto& slot = slots[i];
        try {
            auto outcome = evaluate_point(family(candidates[i]), settings);
            if (outcome.solution) {
                const auto& s = *outcome.solution;
                slot.record = SurfaceRecord<Params>{candidates[i], s.mean_rate,
                                                    s.temporal_variance, s.aoi_approx,
                                                    s.converged};
            } else {
                slot.failure = outcome.failure;
            }
        } catch (const Error& e) {
            slot.failure = e.describe();
        }
        const std::size_t n = done.fetch_add(1) + 1;
        if (options.progress && (n % options.progress_every == 0 || n == candidates.size()))
            options.progress(n, candidates.size());
    });

    GridSearchResult<Params> result;
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].record) {
            const auto& rec = *slots[i].record;
            if (rec.converged &&
                (!best || rec.aoi_approx < result.surface[*best].aoi_approx))
                best = result.surface.size();
            result.surface.push_back(rec);
        } else {
            result.skipped.push_back({candidates[i], slots[i].failure});
        }
    }
    if (!best) throw EmptyResultError("no grid point produced a converged AoI estimate");

    result.best_params = result.surface[*best].params;
    auto outcome = evaluate_point(family(result.best_params), settings);
    result.best_solution = std::move(*outcome.solution);
    return result;
}

/// Grid search over age-threshold ALOHA (H, p) for N users. Candidates are
/// ordered by H then p, so ties resolve to the smallest H, then smallest p.
inline GridSearchResult<AgeThresholdParams> optimize_age_threshold(
    int num_users, const GridSpec& grid, AnalysisSettings settings,
    PauseOn pause_on = PauseOn::success, const SearchOptions& options = {}) {
    if (num_users < 2) throw ParameterError("optimization needs at least 2 users");
    grid.validate();
    settings.num_users = num_users;
    std::vector<AgeThresholdParams> candidates;
    const auto ps = grid.p_values();
    candidates.reserve(static_cast<std::size_t>(grid.h_max - grid.h_min + 1) * ps.size());
    for (int h = grid.h_min; h <= grid.h_max; ++h)
        for (double p : ps) candidates.push_back({h, p});
    return grid_search(
        candidates,
        [pause_on](const AgeThresholdParams& c) { return build_age_threshold_aloha(c, pause_on); },
        settings, options);
}

enum class ReferencePolicy { lbop, spgp };

inline const char* to_string(ReferencePolicy r) { return r == ReferencePolicy::lbop ? "LBOP" : "SPGP"; }

/// Published asymptotic settings of age-threshold ALOHA:
///   LBOP: H = 2.2 N,  p = 4.69 / N
///   SPGP: H = 2.17 N, p = 4.43 / N
/// H is rounded half-up from the exact decimal product.
inline AgeThresholdParams reference_params(ReferencePolicy kind, int num_users) {
    if (num_users < 1) throw ParameterError("reference_params: N must be >= 1");
    const long n = num_users;
    AgeThresholdParams params;
    if (kind == ReferencePolicy::lbop) {
        params.threshold = static_cast<int>((220 * n + 50) / 100);
        params.tx_prob = 4.69 / static_cast<double>(n);
    } else {
        params.threshold = static_cast<int>((217 * n + 50) / 100);
        params.tx_prob = 4.43 / static_cast<double>(n);
    }
    if (params.tx_prob > 1.0) {
        std::ostringstream os;
        os << to_string(kind) << " for N = " << num_users << " gives p = " << params.tx_prob
           << " > 1";
        throw ParameterError(os.str());
    }
    return params;
}

struct EpsilonPoint {
    double epsilon = 0.0;
    double tx_prob = 0.0;
    std::optional<MeanFieldSolution> solution;
    std::string failure;
};

/// AoI estimate along p = epsilon / N at fixed H. Points that fail are kept
/// with their reason; the sweep never stops early.
inline std::vector<EpsilonPoint> sweep_epsilon(int num_users, int threshold, double eps_min,
                                               double eps_max, double eps_step,
                                               AnalysisSettings settings,
                                               PauseOn pause_on = PauseOn::success,
                                               unsigned threads = 1) {
    if (num_users < 1) throw ParameterError("sweep_epsilon: N must be >= 1");
    if (!(eps_step > 0.0) || !(eps_max >= eps_min))
        throw ParameterError("sweep_epsilon: need eps_step > 0 and eps_max >= eps_min");
    settings.num_users = num_users;
    const auto count = static_cast<long>(std::floor((eps_max - eps_min) / eps_step + 1e-9));
    std::vector<EpsilonPoint> points(static_cast<std::size_t>(count + 1));
    parallel_for(points.size(), threads, [&](std::size_t i) {
        auto& pt = points[i];
        pt.epsilon = snap_decimal(eps_min + static_cast<double>(i) * eps_step);
        pt.tx_prob = pt.epsilon / num_users;
        try {
            auto outcome = evaluate_point(
                build_age_threshold_aloha({threshold, pt.tx_prob}, pause_on), settings);
            pt.solution = std::move(outcome.solution);
            pt.failure = std::move(outcome.failure);
        } catch (const Error& e) {
            pt.failure = e.describe();
        }
    });
    return points;
}

}  // namespace aoi
