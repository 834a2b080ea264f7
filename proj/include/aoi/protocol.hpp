#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "aoi/error.hpp"
#include "aoi/matrix.hpp"

namespace aoi {

/// One user's sensing-conditioned Markov protocol.
///
/// `m0` is followed when the user senses no other transmission in the
/// slot (idle channel, or its own transmission was acknowledged); `m1` is
/// followed when some other user transmitted. `tx_state` is 1-based, the
/// way states are numbered in every file and printout; use `tx_index()`
/// for array access.
struct ProtocolSpec {
    int num_states = 0;
    int tx_state = 1;
    Matrix m0;
    Matrix m1;

    std::size_t tx_index() const { return static_cast<std::size_t>(tx_state - 1); }

    friend bool operator==(const ProtocolSpec&, const ProtocolSpec&) = default;
};

/// Parameters of the age-threshold ALOHA family.
struct AgeThresholdParams {
    int threshold = 1;      // H, in slots
    double tx_prob = 1.0;   // p

    friend bool operator==(const AgeThresholdParams&, const AgeThresholdParams&) = default;
};

/// Which sensing outcome at the transmission state starts the pause chain.
///
/// `success`: an acknowledged transmission (alpha = 0) enters the pause
/// states and a collision keeps the user in the ALOHA phase. This is the
/// age-threshold policy proper: silent for H slots after each delivery.
///
/// `collision`: the mirrored layout, where the collision row points into
/// the pause chain and a delivery returns to the ALOHA phase.
enum class PauseOn { success, collision };

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const noexcept { return violations.empty(); }
};

inline constexpr double kRowSumTolerance = 1e-12;

inline ValidationReport validate_spec(const ProtocolSpec& spec) {
    ValidationReport report;
    auto fail = [&](const std::string& msg) { report.violations.push_back(msg); };

    if (spec.num_states < 2)
        fail("num_states must be at least 2 (got " + std::to_string(spec.num_states) + ")");
    if (spec.tx_state < 1 || spec.tx_state > spec.num_states)
        fail("tx_state out of range: " + std::to_string(spec.tx_state) + " not in [1, " +
             std::to_string(spec.num_states) + "]");

    const auto expected = static_cast<std::size_t>(std::max(spec.num_states, 0));
    const std::pair<const char*, const Matrix*> mats[] = {{"m0", &spec.m0}, {"m1", &spec.m1}};
    for (const auto& [name, m] : mats) {
        if (m->rows() != expected || m->cols() != expected) {
            fail(std::string(name) + " has dimension " + std::to_string(m->rows()) + "x" +
                 std::to_string(m->cols()) + ", expected " + std::to_string(expected) + "x" +
                 std::to_string(expected));
            continue;
        }
        for (std::size_t i = 0; i < m->rows(); ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < m->cols(); ++j) {
                const double v = (*m)(i, j);
                if (!(v >= 0.0 && v <= 1.0)) {
                    std::ostringstream os;
                    os << name << " entry (" << i + 1 << ", " << j + 1 << ") = " << v
                       << " is not a probability";
                    fail(os.str());
                }
                sum += v;
            }
            if (!(std::abs(sum - 1.0) <= kRowSumTolerance)) {
                std::ostringstream os;
                os.precision(17);
                os << name << " row " << i + 1 << " sums to " << sum << ", not 1";
                fail(os.str());
            }
        }
    }
    return report;
}

inline void require_valid(const ProtocolSpec& spec) {
    auto report = validate_spec(spec);
    if (!report.ok()) throw ValidationError(std::move(report.violations));
}

inline void check_params(const AgeThresholdParams& params) {
    if (params.threshold < 1)
        throw ParameterError("age threshold H must be >= 1 (got " +
                             std::to_string(params.threshold) + ")");
    if (!(params.tx_prob > 0.0 && params.tx_prob <= 1.0)) {
        std::ostringstream os;
        os << "transmission probability p must be in (0, 1] (got " << params.tx_prob << ")";
        throw ParameterError(os.str());
    }
}

/// Age-threshold ALOHA with S = H + 2 states: state 1 transmits, state 2
/// is the ALOHA idle state, states 3..H+2 count down the pause. Rows
/// 2 and H+2 of both matrices, and the pause rows, ignore sensing.
inline ProtocolSpec build_age_threshold_aloha(const AgeThresholdParams& params,
                                              PauseOn pause_on = PauseOn::success) {
    check_params(params);
    const auto h = static_cast<std::size_t>(params.threshold);
    const std::size_t s = h + 2;
    const double p = params.tx_prob;

    Matrix aloha(s, s);
    for (std::size_t r : {std::size_t{0}, std::size_t{1}, s - 1}) {
        aloha(r, 0) = p;
        aloha(r, 1) = 1.0 - p;
    }
    for (std::size_t r = 2; r + 1 < s; ++r) aloha(r, r + 1) = 1.0;

    Matrix paused = aloha;
    auto tx_row = paused.row(0);
    std::fill(tx_row.begin(), tx_row.end(), 0.0);
    paused(0, 2) = 1.0;

    ProtocolSpec spec;
    spec.num_states = static_cast<int>(s);
    spec.tx_state = 1;
    if (pause_on == PauseOn::success) {
        spec.m0 = std::move(paused);
        spec.m1 = std::move(aloha);
    } else {
        spec.m0 = std::move(aloha);
        spec.m1 = std::move(paused);
    }
    return spec;
}

/// Two-state memoryless ALOHA: transmit with probability p every slot.
inline ProtocolSpec build_pure_aloha(double tx_prob) {
    if (!(tx_prob > 0.0 && tx_prob <= 1.0)) {
        std::ostringstream os;
        os << "transmission probability p must be in (0, 1] (got " << tx_prob << ")";
        throw ParameterError(os.str());
    }
    Matrix m{{tx_prob, 1.0 - tx_prob}, {tx_prob, 1.0 - tx_prob}};
    return ProtocolSpec{2, 1, m, m};
}

inline const char* to_string(PauseOn p) {
    return p == PauseOn::success ? "success" : "collision";
}

inline PauseOn parse_pause_on(const std::string& s) {
    if (s == "success") return PauseOn::success;
    if (s == "collision") return PauseOn::collision;
    throw ParameterError("pause trigger must be 'success' or 'collision' (got '" + s + "')");
}

}  // namespace aoi
