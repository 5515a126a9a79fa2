#pragma once

// Recursive statistic kernels: reflected CuSum, first passage, and the
// Shiryaev-Roberts companion. Double precision throughout; accumulated
// rounding stays far below test tolerances for horizons up to ~1e7 steps.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>

#include "qcd/distributions.hpp"
#include "qcd/error.hpp"

namespace qcd {

// Absent means the run was censored at its horizon.
using StoppingTime = std::optional<std::uint64_t>;

template <typename S>
concept ObservationSource = requires(S& s) {
    { s.next() } -> std::convertible_to<double>;
};

// Replays a fixed sequence; used to feed hand-built paths to detectors.
class SequenceSource {
public:
    explicit SequenceSource(std::span<const double> values) : values_(values) {}

    double next() {
        if (pos_ >= values_.size()) {
            throw InvalidArgument("SequenceSource exhausted");
        }
        return values_[pos_++];
    }

    std::size_t position() const noexcept { return pos_; }

private:
    std::span<const double> values_;
    std::size_t pos_ = 0;
};

struct CusumStat {
    double value = 0.0;
};

inline CusumStat cusum_update(CusumStat stat, double increment) {
    if (!std::isfinite(increment)) {
        throw InvalidArgument("cusum_update: increment must be finite");
    }
    return CusumStat{std::max(0.0, stat.value + increment)};
}

// max over k of sum_{i=k..n} increments[i], by accumulating suffix sums from
// the end. Not floored at zero: an all-negative sequence yields its largest
// element. The recursion equals max(0, cusum_batch).
inline double cusum_batch(std::span<const double> increments) {
    if (increments.empty()) {
        throw InvalidArgument("cusum_batch: empty sequence");
    }
    double best = -std::numeric_limits<double>::infinity();
    double suffix = 0.0;
    for (auto it = increments.rbegin(); it != increments.rend(); ++it) {
        suffix += *it;
        best = std::max(best, suffix);
    }
    return best;
}

// CuSum of log(num/den) fed raw observations.
class ModelCusum {
public:
    ModelCusum(const DensityModel& numerator, const DensityModel& denominator)
        : num_(&numerator), den_(&denominator) {}

    double observe(double x) {
        stat_ = cusum_update(stat_, log_likelihood_ratio(*num_, *den_, x));
        return stat_.value;
    }

    double value() const noexcept { return stat_.value; }
    const DensityModel& numerator() const noexcept { return *num_; }
    const DensityModel& denominator() const noexcept { return *den_; }

private:
    const DensityModel* num_;
    const DensityModel* den_;
    CusumStat stat_;
};

// inf{t >= 1 : CuSum[t] >= threshold} over increments produced by `next`.
template <std::invocable F>
StoppingTime first_passage(double threshold, std::uint64_t horizon, F&& next_increment) {
    if (!(threshold > 0.0)) {
        throw InvalidArgument("first_passage: threshold must be positive");
    }
    if (horizon == 0) {
        throw InvalidArgument("first_passage: horizon must be positive");
    }
    CusumStat stat;
    for (std::uint64_t t = 1; t <= horizon; ++t) {
        stat = cusum_update(stat, static_cast<double>(next_increment()));
        if (stat.value >= threshold) {
            return t;
        }
    }
    return std::nullopt;
}

template <ObservationSource S>
StoppingTime first_passage(const DensityModel& numerator, const DensityModel& denominator,
                           double threshold, S& stream, std::uint64_t horizon) {
    return first_passage(threshold, horizon, [&] {
        return log_likelihood_ratio(numerator, denominator, static_cast<double>(stream.next()));
    });
}

struct SrStat {
    double value = 0.0;
    std::uint64_t t = 0;
};

// R[t+1] = (1 + R[t]) * L[t+1], R[0] = 0.
inline SrStat sr_update(SrStat stat, double likelihood_ratio) {
    if (!(likelihood_ratio >= 0.0) || !std::isfinite(likelihood_ratio)) {
        throw InvalidArgument("sr_update: likelihood ratio must be finite and non-negative");
    }
    return SrStat{(1.0 + stat.value) * likelihood_ratio, stat.t + 1};
}

// E_under[log(num/den)] = -D(under||num) + D(under||den).
inline double drift(const DensityModel& numerator, const DensityModel& denominator,
                    const DensityModel& under, std::optional<std::size_t> samples = std::nullopt) {
    const auto needs_mc = [&](const DensityModel& q) {
        return !(under.is_gaussian() && q.is_gaussian()) && under.as_tabulated() == nullptr;
    };
    const auto kl = [&](const DensityModel& q) {
        return kl_divergence(under, q, needs_mc(q) ? samples : std::nullopt).value;
    };
    return -kl(numerator) + kl(denominator);
}

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

// Sample mean of log(num/den) under draws from `under`.
inline MeanEstimate drift_monte_carlo(const DensityModel& numerator, const DensityModel& denominator,
                                      const DensityModel& under, std::size_t samples,
                                      std::uint64_t seed) {
    if (samples < 2) {
        throw InvalidArgument("drift_monte_carlo: need at least two samples");
    }
    RandomStream rng(SeedKey{seed, 0, 1});
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double v = log_likelihood_ratio(numerator, denominator, under.sample(rng));
        const double delta = v - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (v - mean);
    }
    const double n = static_cast<double>(samples);
    return MeanEstimate{mean, std::sqrt(m2 / (n - 1.0) / n), samples};
}

} // namespace qcd
