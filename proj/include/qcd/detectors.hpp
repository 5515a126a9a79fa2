#pragma once

// Streaming detectors for a bad change (f0 -> fB) that must ignore a
// confusing change (f0 -> fC).
//
//   cusum-w       plain CuSum of W = log(fB/f0), alarm at b0
//   cusum-lambda  plain CuSum of Lambda = log(fB/fC), alarm at bC
//   s-cusum       successive: CuSum_W runs until it reaches b0 and freezes;
//                 CuSum_Lambda starts on the next observation and the alarm
//                 is the first step it reaches bC
//   j-cusum       joint: both statistics run together, each freezing at its
//                 threshold; alarm when both are at or above threshold;
//                 CuSum_Lambda is reset (and unfrozen) whenever CuSum_W hits 0
//
// All crossings are inclusive (stat >= threshold).

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "qcd/distributions.hpp"
#include "qcd/error.hpp"
#include "qcd/statistics.hpp"

namespace qcd {

enum class DetectorKind { BaselineW, BaselineLambda, SCusum, JCusum };

inline constexpr std::array<DetectorKind, 4> kAllDetectors = {
    DetectorKind::BaselineW, DetectorKind::BaselineLambda, DetectorKind::SCusum, DetectorKind::JCusum};

inline constexpr std::string_view to_string(DetectorKind kind) noexcept {
    switch (kind) {
    case DetectorKind::BaselineW: return "cusum-w";
    case DetectorKind::BaselineLambda: return "cusum-lambda";
    case DetectorKind::SCusum: return "s-cusum";
    case DetectorKind::JCusum: return "j-cusum";
    }
    return "unknown";
}

inline DetectorKind parse_detector_kind(std::string_view name) {
    for (auto kind : kAllDetectors) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    throw InvalidArgument("unknown detector '" + std::string(name) +
                          "' (expected cusum-w, cusum-lambda, s-cusum or j-cusum)");
}

struct DetectorConfig {
    DetectorKind kind = DetectorKind::SCusum;
    DensityModel f0;
    DensityModel fc;
    DensityModel fb;
    double b0 = 1.0;
    double bc = 1.0;

    DetectorConfig(DetectorKind kind_, DensityModel f0_, DensityModel fc_, DensityModel fb_, double b0_,
                   double bc_)
        : kind(kind_), f0(std::move(f0_)), fc(std::move(fc_)), fb(std::move(fb_)), b0(b0_), bc(bc_) {
        validate();
    }

    void validate() const {
        if (f0 == fc || f0 == fb || fc == fb) {
            throw InvalidArgument("f0, fC and fB must be pairwise distinct");
        }
        if (!(b0 > 0.0) || !(bc > 0.0) || !std::isfinite(b0) || !std::isfinite(bc)) {
            throw InvalidArgument("thresholds must be positive and finite");
        }
    }
};

struct DetectorState {
    std::uint64_t t = 0;
    double w_stat = 0.0;   // CuSum_W (cusum-lambda keeps its statistic in lam_stat)
    double lam_stat = 0.0; // CuSum_Lambda
    bool w_frozen = false;
    bool lam_frozen = false; // j-cusum only
    StoppingTime alarm_time;

    bool stopped() const noexcept { return alarm_time.has_value(); }

    friend bool operator==(const DetectorState&, const DetectorState&) = default;
};

// Advances one step given the two log-likelihood increments of the current
// observation. Increments a detector does not use are ignored.
inline DetectorState step_increments(DetectorState s, DetectorKind kind, double b0, double bc,
                                     double w_inc, double lam_inc) {
    if (s.stopped()) {
        throw InvalidArgument("step: detector already raised its alarm");
    }
    ++s.t;
    switch (kind) {
    case DetectorKind::BaselineW:
        s.w_stat = cusum_update({s.w_stat}, w_inc).value;
        if (s.w_stat >= b0) {
            s.alarm_time = s.t;
        }
        break;
    case DetectorKind::BaselineLambda:
        s.lam_stat = cusum_update({s.lam_stat}, lam_inc).value;
        if (s.lam_stat >= bc) {
            s.alarm_time = s.t;
        }
        break;
    case DetectorKind::SCusum:
        if (!s.w_frozen) {
            s.w_stat = cusum_update({s.w_stat}, w_inc).value;
            s.w_frozen = s.w_stat >= b0;
        } else {
            s.lam_stat = cusum_update({s.lam_stat}, lam_inc).value;
            if (s.lam_stat >= bc) {
                s.alarm_time = s.t;
            }
        }
        break;
    case DetectorKind::JCusum:
        if (!s.w_frozen) {
            s.w_stat = cusum_update({s.w_stat}, w_inc).value;
            s.w_frozen = s.w_stat >= b0;
        }
        if (!s.lam_frozen) {
            s.lam_stat = cusum_update({s.lam_stat}, lam_inc).value;
            s.lam_frozen = s.lam_stat >= bc;
        }
        if (s.w_stat >= b0 && s.lam_stat >= bc) {
            s.alarm_time = s.t;
        } else if (s.w_stat == 0.0) {
            s.lam_stat = 0.0;
            s.lam_frozen = false;
        }
        break;
    }
    return s;
}

inline DetectorState step(const DetectorState& state, const DetectorConfig& config, double x) {
    const bool needs_w = config.kind == DetectorKind::BaselineW || config.kind == DetectorKind::JCusum ||
                         (config.kind == DetectorKind::SCusum && !state.w_frozen);
    const bool needs_lam = config.kind == DetectorKind::BaselineLambda ||
                           config.kind == DetectorKind::JCusum ||
                           (config.kind == DetectorKind::SCusum && state.w_frozen);
    const double w_inc = needs_w ? log_likelihood_ratio(config.fb, config.f0, x) : 0.0;
    const double lam_inc = needs_lam ? log_likelihood_ratio(config.fb, config.fc, x) : 0.0;
    return step_increments(state, config.kind, config.b0, config.bc, w_inc, lam_inc);
}

struct RunOutcome {
    StoppingTime alarm_time;
    DetectorState state;

    bool censored() const noexcept { return !alarm_time.has_value(); }
};

template <ObservationSource S>
RunOutcome run_to_alarm(const DetectorConfig& config, S& stream, std::uint64_t horizon) {
    if (horizon == 0) {
        throw InvalidArgument("run_to_alarm: horizon must be positive");
    }
    DetectorState state;
    while (state.t < horizon) {
        state = step(state, config, static_cast<double>(stream.next()));
        if (state.stopped()) {
            break;
        }
    }
    return RunOutcome{state.alarm_time, state};
}

// Convenience wrapper for online use: one observation per call.
class Detector {
public:
    explicit Detector(DetectorConfig config) : config_(std::move(config)) {}

    // Returns true once the alarm has been raised. Observations after the
    // alarm are rejected.
    bool observe(double x) {
        state_ = step(state_, config_, x);
        return state_.stopped();
    }

    void reset() noexcept { state_ = {}; }

    const DetectorState& state() const noexcept { return state_; }
    const DetectorConfig& config() const noexcept { return config_; }

private:
    DetectorConfig config_;
    DetectorState state_;
};

} // namespace qcd
