#pragma once

// Univariate density models (pre-change, confusing and bad distributions),
// log-likelihood ratios and KL divergences. All logs are natural logs.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "qcd/error.hpp"
#include "qcd/random.hpp"

namespace qcd {

struct Gaussian {
    double mean = 0.0;
    double variance = 1.0;

    friend bool operator==(const Gaussian&, const Gaussian&) = default;
};

// Density given by log-density values on a strictly increasing grid,
// linearly interpolated in log space. Evaluation only; no sampling.
class Tabulated {
public:
    static constexpr double kNormalizationTolerance = 1e-6;

    explicit Tabulated(std::vector<std::pair<double, double>> table) {
        if (table.size() < 2) {
            throw InvalidArgument("tabulated density needs at least two grid points");
        }
        points_.reserve(table.size());
        log_density_.reserve(table.size());
        for (const auto& [x, ld] : table) {
            if (!std::isfinite(x) || !std::isfinite(ld)) {
                throw InvalidArgument("tabulated density entries must be finite");
            }
            if (!points_.empty() && x <= points_.back()) {
                throw InvalidArgument("tabulated grid must be strictly increasing");
            }
            points_.push_back(x);
            log_density_.push_back(ld);
        }
        const double mass = total_mass();
        if (std::abs(mass - 1.0) > kNormalizationTolerance) {
            throw InvalidArgument("tabulated density integrates to " + std::to_string(mass) +
                                  ", expected 1");
        }
    }

    std::span<const double> points() const noexcept { return points_; }
    std::span<const double> log_values() const noexcept { return log_density_; }

    double lower() const noexcept { return points_.front(); }
    double upper() const noexcept { return points_.back(); }

    bool contains(double x) const noexcept { return x >= lower() && x <= upper(); }

    double log_density(double x) const {
        if (!contains(x)) {
            throw OutOfDomain("x = " + std::to_string(x) + " outside tabulated grid [" +
                              std::to_string(lower()) + ", " + std::to_string(upper()) + "]");
        }
        auto it = std::upper_bound(points_.begin(), points_.end(), x);
        if (it == points_.end()) {
            return log_density_.back();
        }
        const auto hi = static_cast<std::size_t>(it - points_.begin());
        const std::size_t lo = hi - 1;
        const double w = (x - points_[lo]) / (points_[hi] - points_[lo]);
        return (1.0 - w) * log_density_[lo] + w * log_density_[hi];
    }

    // Trapezoidal integral of the density over the grid.
    double total_mass() const noexcept {
        double mass = 0.0;
        for (std::size_t i = 1; i < points_.size(); ++i) {
            mass += 0.5 * (points_[i] - points_[i - 1]) *
                    (std::exp(log_density_[i]) + std::exp(log_density_[i - 1]));
        }
        return mass;
    }

    friend bool operator==(const Tabulated&, const Tabulated&) = default;

private:
    std::vector<double> points_;
    std::vector<double> log_density_;
};

// Immutable once built; safe to share across trial workers.
class DensityModel {
public:
    using Kind = std::variant<Gaussian, Tabulated>;

    static DensityModel gaussian(double mean, double variance, std::string label = {}) {
        if (!std::isfinite(mean)) {
            throw InvalidArgument("gaussian mean must be finite");
        }
        if (!(variance > 0.0) || !std::isfinite(variance)) {
            throw InvalidArgument("gaussian variance must be positive and finite");
        }
        return DensityModel(Gaussian{mean, variance}, std::move(label));
    }

    static DensityModel tabulated(std::vector<std::pair<double, double>> table,
                                  std::string label = {}) {
        return DensityModel(Tabulated(std::move(table)), std::move(label));
    }

    // Parses "gaussian:<mean>:<variance>".
    static DensityModel parse(std::string_view spec) {
        constexpr std::string_view prefix = "gaussian:";
        if (!spec.starts_with(prefix)) {
            throw InvalidArgument("unsupported density spec '" + std::string(spec) +
                                  "' (expected gaussian:<mean>:<variance>)");
        }
        const std::string_view rest = spec.substr(prefix.size());
        const auto colon = rest.find(':');
        if (colon == std::string_view::npos) {
            throw InvalidArgument("density spec '" + std::string(spec) + "' is missing the variance");
        }
        const double mean = parse_real(rest.substr(0, colon), spec);
        const double variance = parse_real(rest.substr(colon + 1), spec);
        return gaussian(mean, variance, std::string(spec));
    }

    const Kind& kind() const noexcept { return kind_; }
    const std::string& label() const noexcept { return label_; }

    const Gaussian* as_gaussian() const noexcept { return std::get_if<Gaussian>(&kind_); }
    const Tabulated* as_tabulated() const noexcept { return std::get_if<Tabulated>(&kind_); }
    bool is_gaussian() const noexcept { return as_gaussian() != nullptr; }
    bool can_sample() const noexcept { return is_gaussian(); }

    double log_density(double x) const {
        if (!std::isfinite(x)) {
            throw InvalidArgument("log_density: x must be finite");
        }
        if (const auto* g = as_gaussian()) {
            const double d = x - g->mean;
            return log_norm_ - 0.5 * d * d * inv_variance_;
        }
        return std::get<Tabulated>(kind_).log_density(x);
    }

    double sample(RandomStream& rng) const {
        const auto* g = as_gaussian();
        if (g == nullptr) {
            throw InvalidArgument("sampling is only supported for gaussian models");
        }
        return g->mean + stddev_ * rng.standard_normal();
    }

    std::string spec() const {
        if (const auto* g = as_gaussian()) {
            return "gaussian:" + format_real(g->mean) + ":" + format_real(g->variance);
        }
        return "tabulated:" + std::to_string(std::get<Tabulated>(kind_).points().size());
    }

    // Labels do not participate in equality.
    friend bool operator==(const DensityModel& a, const DensityModel& b) { return a.kind_ == b.kind_; }

private:
    DensityModel(Kind kind, std::string label) : kind_(std::move(kind)), label_(std::move(label)) {
        if (const auto* g = as_gaussian()) {
            log_norm_ = -0.5 * std::log(2.0 * std::numbers::pi * g->variance);
            inv_variance_ = 1.0 / g->variance;
            stddev_ = std::sqrt(g->variance);
        }
        if (label_.empty()) {
            label_ = spec();
        }
    }

    static double parse_real(std::string_view text, std::string_view spec) {
        double value = 0.0;
        const auto* first = text.data();
        const auto* last = text.data() + text.size();
        if (!text.empty() && *first == '+') {
            ++first;
        }
        const auto [ptr, ec] = std::from_chars(first, last, value);
        if (text.empty() || ec != std::errc{} || ptr != last) {
            throw InvalidArgument("malformed number '" + std::string(text) + "' in density spec '" +
                                  std::string(spec) + "'");
        }
        return value;
    }

    static std::string format_real(double v) {
        char buf[32];
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, ptr);
    }

    Kind kind_;
    std::string label_;
    double log_norm_ = 0.0;
    double inv_variance_ = 0.0;
    double stddev_ = 0.0;
};

inline double log_density(const DensityModel& model, double x) { return model.log_density(x); }

// log num(x) - log den(x). The W and Lambda increments of the detectors.
inline double log_likelihood_ratio(const DensityModel& num, const DensityModel& den, double x) {
    return num.log_density(x) - den.log_density(x);
}

inline double sample(const DensityModel& model, RandomStream& rng) { return model.sample(rng); }

enum class KlMethod { ClosedForm, Quadrature, MonteCarlo };

struct KlEstimate {
    double value = 0.0;     // nats
    double std_error = 0.0; // zero unless MonteCarlo
    KlMethod method = KlMethod::ClosedForm;
    std::size_t samples = 0;
};

inline constexpr std::uint64_t kDefaultKlSeed = 0x6b6c2d6d63ULL;

namespace detail {

inline double gaussian_kl(const Gaussian& p, const Gaussian& q) {
    if (p == q) {
        return 0.0;
    }
    const double d = p.mean - q.mean;
    if (p.variance == q.variance) {
        return d * d / (2.0 * q.variance);
    }
    return 0.5 * std::log(q.variance / p.variance) + (p.variance + d * d) / (2.0 * q.variance) - 0.5;
}

// Trapezoid over p's grid; q must be defined on all of it.
inline double quadrature_kl(const Tabulated& p, const DensityModel& q) {
    const auto xs = p.points();
    const auto lps = p.log_values();
    auto integrand = [&](std::size_t i) { return std::exp(lps[i]) * (lps[i] - q.log_density(xs[i])); };
    double sum = 0.0;
    double prev = integrand(0);
    for (std::size_t i = 1; i < xs.size(); ++i) {
        const double cur = integrand(i);
        sum += 0.5 * (xs[i] - xs[i - 1]) * (cur + prev);
        prev = cur;
    }
    return std::max(sum, 0.0);
}

} // namespace detail

// D(p || q). Gaussian pairs are closed form; a tabulated p is integrated on
// its grid. Passing `samples` forces a Monte Carlo estimate drawn from p.
inline KlEstimate kl_divergence(const DensityModel& p, const DensityModel& q,
                                std::optional<std::size_t> samples = std::nullopt,
                                std::uint64_t seed = kDefaultKlSeed) {
    if (samples) {
        if (*samples < 2) {
            throw InvalidArgument("Monte Carlo KL needs at least two samples");
        }
        if (!p.can_sample()) {
            throw InvalidArgument("Monte Carlo KL requires a samplable first argument");
        }
        RandomStream rng(SeedKey{seed, 0, 0});
        double mean = 0.0;
        double m2 = 0.0;
        for (std::size_t i = 0; i < *samples; ++i) {
            const double x = p.sample(rng);
            const double v = p.log_density(x) - q.log_density(x);
            const double delta = v - mean;
            mean += delta / static_cast<double>(i + 1);
            m2 += delta * (v - mean);
        }
        const double n = static_cast<double>(*samples);
        const double se = std::sqrt(m2 / (n - 1.0) / n);
        return KlEstimate{std::max(mean, 0.0), se, KlMethod::MonteCarlo, *samples};
    }
    const auto* gp = p.as_gaussian();
    const auto* gq = q.as_gaussian();
    if (gp && gq) {
        return KlEstimate{detail::gaussian_kl(*gp, *gq), 0.0, KlMethod::ClosedForm, 0};
    }
    if (const auto* tp = p.as_tabulated()) {
        return KlEstimate{detail::quadrature_kl(*tp, q), 0.0, KlMethod::Quadrature, 0};
    }
    throw InvalidArgument("KL between '" + p.label() + "' and '" + q.label() +
                          "' has no closed form; pass a sample count");
}

} // namespace qcd
