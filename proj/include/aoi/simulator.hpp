#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "aoi/error.hpp"
#include "aoi/parallel.hpp"
#include "aoi/protocol.hpp"

namespace aoi {

struct SimConfig {
    int num_users = 1;
    long horizon = 100'000;
    int num_runs = 100;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    int batches = 100;               // batch-means estimator
    bool record_deliveries = false;  // keep the per-slot delivery matrix

    void validate() const {
        if (num_users < 1) throw ParameterError("num_users must be >= 1");
        if (horizon < 1) throw ParameterError("horizon must be >= 1");
        if (num_runs < 1) throw ParameterError("num_runs must be >= 1");
        if (batches < 2) throw ParameterError("batches must be >= 2");
    }
};

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed of run r: mix64(base + 0x9E3779B97F4A7C15 * (r + 1)). Each run
/// owns a std::mt19937_64 seeded with this value.
inline std::uint64_t run_seed(std::uint64_t base, std::uint64_t run) {
    return mix64(base + 0x9E3779B97F4A7C15ULL * (run + 1));
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// deliveries[n][t] = 1 iff user n delivered in slot t + 1.
using DeliveryMatrix = std::vector<std::vector<std::uint8_t>>;

struct RunResult {
    int run = 0;
    std::uint64_t seed = 0;
    double mean_aoi = 0.0;
    double empirical_rate = 0.0;
    std::optional<double> empirical_variance;  // absent when horizon < 1000
    std::uint64_t total_successes = 0;
    std::vector<std::uint64_t> successes_per_user;
    DeliveryMatrix deliveries;  // only with record_deliveries
};

struct SimResult {
    SimConfig config;
    std::vector<RunResult> runs;  // by run index
    double mean_aoi = 0.0;
    double aoi_p025 = 0.0;
    double aoi_p975 = 0.0;
    double mean_rate = 0.0;
    std::optional<double> mean_variance;
    double wall_time_seconds = 0.0;
};

inline constexpr std::size_t kMinVarianceSeries = 1000;

/// Batch-means variance rate: batch_len * sample variance of the batch means.
inline double batch_means_variance(std::span<const double> batch_means, long batch_len) {
    const auto b = static_cast<double>(batch_means.size());
    double mean = 0.0;
    for (double x : batch_means) mean += x;
    mean /= b;
    double ss = 0.0;
    for (double x : batch_means) ss += (x - mean) * (x - mean);
    return static_cast<double>(batch_len) * ss / (b - 1.0);
}

/// Temporal-variance estimate of a 0/1 delivery series by non-overlapping
/// batch means: B batches of length L = len / B (the tail that does not
/// fill a batch is dropped).
inline double estimate_temporal_variance(std::span<const std::uint8_t> series, int batches = 100) {
    if (series.size() < kMinVarianceSeries)
        throw ParameterError("temporal variance estimate needs at least 1000 slots (got " +
                             std::to_string(series.size()) + ")");
    if (batches < 2) throw ParameterError("batch-means estimator needs at least 2 batches");
    const long len = static_cast<long>(series.size()) / batches;
    if (len < 1) throw ParameterError("series shorter than the number of batches");
    std::vector<double> means(static_cast<std::size_t>(batches));
    for (int b = 0; b < batches; ++b) {
        long sum = 0;
        for (long t = b * len; t < (b + 1) * len; ++t) sum += series[static_cast<std::size_t>(t)];
        means[static_cast<std::size_t>(b)] = static_cast<double>(sum) / static_cast<double>(len);
    }
    return batch_means_variance(means, len);
}

/// Time- and user-averaged AoI of a delivery matrix, with AoI = 1 before
/// the first slot: AoI_t = 1 on delivery, AoI_{t-1} + 1 otherwise.
inline double empirical_aoi(const DeliveryMatrix& deliveries) {
    if (deliveries.empty() || deliveries.front().empty()) return 0.0;
    std::uint64_t sum = 0;
    for (const auto& user : deliveries) {
        std::uint64_t aoi = 1;
        for (std::uint8_t d : user) {
            aoi = d ? 1 : aoi + 1;
            sum += aoi;
        }
    }
    return static_cast<double>(sum) /
           (static_cast<double>(deliveries.size()) * static_cast<double>(deliveries.front().size()));
}

/// Linear-interpolation percentile (q in [0, 1]) between order statistics.
inline double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ParameterError("percentile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace detail {

// Inverse-CDF tables over the nonzero entries of each row of M0 and M1.
class TransitionSampler {
public:
    explicit TransitionSampler(const ProtocolSpec& spec) {
        for (const Matrix* m : {&spec.m0, &spec.m1}) {
            auto& t = tables_[m == &spec.m0 ? 0 : 1];
            t.offsets.push_back(0);
            for (std::size_t i = 0; i < m->rows(); ++i) {
                double acc = 0.0;
                std::size_t last = t.cols.size();
                for (std::size_t j = 0; j < m->cols(); ++j) {
                    if ((*m)(i, j) <= 0.0) continue;
                    acc += (*m)(i, j);
                    t.cols.push_back(static_cast<std::uint32_t>(j));
                    t.cum.push_back(acc);
                    last = t.cum.size() - 1;
                }
                t.cum[last] = 1.0;
                t.offsets.push_back(static_cast<std::uint32_t>(t.cols.size()));
            }
        }
    }

    std::uint32_t next(int alpha, std::uint32_t state, double u) const {
        const auto& t = tables_[alpha];
        std::uint32_t k = t.offsets[state];
        const std::uint32_t end = t.offsets[state + 1] - 1;
        while (k < end && !(u < t.cum[k])) ++k;
        return t.cols[k];
    }

private:
    struct Table {
        std::vector<std::uint32_t> offsets;
        std::vector<std::uint32_t> cols;
        std::vector<double> cum;
    };
    Table tables_[2];
};

}  // namespace detail

/// One independent run. All users start in the transmission state with
/// AoI 1. Per slot: users in tx_state transmit; a user succeeds iff it is
/// the only transmitter; AoI follows the recursion; each user senses
/// alpha = 1 iff some other user transmitted and draws its next state from
/// row `state` of M_alpha, users in index order, one uniform each.
inline RunResult simulate_run(const ProtocolSpec& spec, const SimConfig& config, int run) {
    const auto users = static_cast<std::size_t>(config.num_users);
    const long horizon = config.horizon;
    const auto tx = static_cast<std::uint32_t>(spec.tx_index());
    const detail::TransitionSampler sampler(spec);

    RunResult out;
    out.run = run;
    out.seed = run_seed(config.seed, static_cast<std::uint64_t>(run));
    std::mt19937_64 rng(out.seed);

    const bool estimate = horizon >= static_cast<long>(kMinVarianceSeries) &&
                          horizon / config.batches >= 1;
    const long batch_len = horizon / config.batches;
    const auto batches = static_cast<std::size_t>(config.batches);
    std::vector<std::uint32_t> batch_counts(estimate ? users * batches : 0, 0);

    std::vector<std::uint32_t> state(users, tx);
    std::vector<std::uint64_t> aoi(users, 1);
    std::vector<std::uint8_t> transmitting(users, 0);
    out.successes_per_user.assign(users, 0);
    if (config.record_deliveries)
        out.deliveries.assign(users, std::vector<std::uint8_t>(static_cast<std::size_t>(horizon), 0));

    std::uint64_t aoi_sum = 0;
    for (long t = 0; t < horizon; ++t) {
        std::uint32_t tx_count = 0;
        for (std::size_t n = 0; n < users; ++n) {
            transmitting[n] = state[n] == tx;
            tx_count += transmitting[n];
        }
        const long batch = estimate ? t / batch_len : 0;
        const bool in_batch = estimate && batch < static_cast<long>(batches);
        for (std::size_t n = 0; n < users; ++n) {
            const bool success = transmitting[n] && tx_count == 1;
            aoi[n] = success ? 1 : aoi[n] + 1;
            aoi_sum += aoi[n];
            if (success) {
                ++out.successes_per_user[n];
                if (in_batch) ++batch_counts[n * batches + static_cast<std::size_t>(batch)];
                if (config.record_deliveries) out.deliveries[n][static_cast<std::size_t>(t)] = 1;
            }
            const int alpha = tx_count - transmitting[n] > 0 ? 1 : 0;
            state[n] = sampler.next(alpha, state[n], unit_uniform(rng));
        }
    }

    const double slots = static_cast<double>(users) * static_cast<double>(horizon);
    for (auto s : out.successes_per_user) out.total_successes += s;
    out.mean_aoi = static_cast<double>(aoi_sum) / slots;
    out.empirical_rate = static_cast<double>(out.total_successes) / slots;
    if (estimate) {
        std::vector<double> means(batches);
        double acc = 0.0;
        for (std::size_t n = 0; n < users; ++n) {
            for (std::size_t b = 0; b < batches; ++b)
                means[b] = static_cast<double>(batch_counts[n * batches + b]) /
                           static_cast<double>(batch_len);
            acc += batch_means_variance(means, batch_len);
        }
        out.empirical_variance = acc / static_cast<double>(users);
    }
    return out;
}

/// Independent runs, optionally in parallel; results are keyed by run
/// index and identical for any thread count.
inline SimResult simulate(const ProtocolSpec& spec, const SimConfig& config) {
    config.validate();
    require_valid(spec);
    const auto start = std::chrono::steady_clock::now();

    SimResult result;
    result.config = config;
    result.runs.resize(static_cast<std::size_t>(config.num_runs));
    parallel_for(result.runs.size(), config.threads, [&](std::size_t r) {
        result.runs[r] = simulate_run(spec, config, static_cast<int>(r));
    });

    std::vector<double> aois;
    double rate = 0.0;
    double var = 0.0;
    bool have_var = true;
    for (const auto& run : result.runs) {
        aois.push_back(run.mean_aoi);
        rate += run.empirical_rate;
        if (run.empirical_variance) var += *run.empirical_variance;
        else have_var = false;
    }
    const auto runs = static_cast<double>(result.runs.size());
    double total = 0.0;
    for (double a : aois) total += a;
    result.mean_aoi = total / runs;
    result.mean_rate = rate / runs;
    if (have_var) result.mean_variance = var / runs;
    result.aoi_p025 = percentile(aois, 0.025);
    result.aoi_p975 = percentile(aois, 0.975);
    result.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

struct PolicyCell {
    std::string label;
    int num_users = 1;
    ProtocolSpec spec;
};

struct ComparisonRow {
    std::string label;
    int num_users = 0;
    std::optional<SimResult> result;
    std::string failure;
};

/// Simulates every cell with the shared run settings of `config` (its
/// num_users is replaced per cell). Failures are recorded per row.
inline std::vector<ComparisonRow> compare_policies(const std::vector<PolicyCell>& cells,
                                                   const SimConfig& config) {
    std::vector<ComparisonRow> rows;
    rows.reserve(cells.size());
    for (const auto& cell : cells) {
        ComparisonRow row{cell.label, cell.num_users, std::nullopt, {}};
        try {
            SimConfig c = config;
            c.num_users = cell.num_users;
            row.result = simulate(cell.spec, c);
        } catch (const Error& e) {
            row.failure = e.describe();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace aoi
