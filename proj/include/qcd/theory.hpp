#pragma once

// Scenario classification by CuSum drift signs, threshold calibration and
// the leading-order delay bounds (the o(1) factors are dropped, so every
// bound here is asymptotic).

#include <algorithm>
#include <cmath>
#include <optional>
#include <string_view>
#include <utility>

#include "qcd/distributions.hpp"
#include "qcd/error.hpp"
#include "qcd/statistics.hpp"

namespace qcd {

enum class Scenario { S1 = 1, S2 = 2, S3 = 3 };

inline constexpr int scenario_number(Scenario s) noexcept { return static_cast<int>(s); }

struct ModelTriple {
    DensityModel f0;
    DensityModel fc;
    DensityModel fb;
};

// Gaussian presets used by the replication study, N(mean, 1) throughout.
inline ModelTriple scenario_preset(int scenario) {
    auto g = [](double m) { return DensityModel::gaussian(m, 1.0); };
    switch (scenario) {
    case 1: return {g(0.0), g(-0.5), g(0.5)};
    case 2: return {g(0.0), g(0.7), g(1.2)};
    case 3: return {g(0.0), g(1.0), g(0.5)};
    default: throw InvalidArgument("scenario preset must be 1, 2 or 3");
    }
}

struct ScenarioReport {
    KlEstimate d_f0_fc;
    KlEstimate d_f0_fb;
    KlEstimate d_fc_f0;
    KlEstimate d_fc_fb;
    KlEstimate d_fb_f0;
    KlEstimate d_fb_fc;
    double drift_w_under_fc = 0.0;   // E_fC[log fB/f0]
    double drift_lam_under_f0 = 0.0; // E_f0[log fB/fC]
    Scenario scenario = Scenario::S1;
};

inline void require_distinct(const DensityModel& f0, const DensityModel& fc, const DensityModel& fb) {
    if (f0 == fc || f0 == fb || fc == fb) {
        throw InvalidArgument("f0, fC and fB must be pairwise distinct");
    }
}

// Zero drift falls in the "zero or negative" branch.
inline Scenario scenario_from_drifts(double drift_w_under_fc, double drift_lam_under_f0) noexcept {
    if (drift_w_under_fc <= 0.0) {
        return Scenario::S1;
    }
    return drift_lam_under_f0 <= 0.0 ? Scenario::S2 : Scenario::S3;
}

inline ScenarioReport classify(const DensityModel& f0, const DensityModel& fc, const DensityModel& fb,
                               std::optional<std::size_t> samples = std::nullopt) {
    require_distinct(f0, fc, fb);
    ScenarioReport r;
    r.d_f0_fc = kl_divergence(f0, fc, samples);
    r.d_f0_fb = kl_divergence(f0, fb, samples);
    r.d_fc_f0 = kl_divergence(fc, f0, samples);
    r.d_fc_fb = kl_divergence(fc, fb, samples);
    r.d_fb_f0 = kl_divergence(fb, f0, samples);
    r.d_fb_fc = kl_divergence(fb, fc, samples);
    r.drift_w_under_fc = -r.d_fc_fb.value + r.d_fc_f0.value;
    r.drift_lam_under_f0 = -r.d_f0_fb.value + r.d_f0_fc.value;
    r.scenario = scenario_from_drifts(r.drift_w_under_fc, r.drift_lam_under_f0);
    return r;
}

inline ScenarioReport classify(const ModelTriple& m) { return classify(m.f0, m.fc, m.fb); }

struct Thresholds {
    double b0 = 0.0;
    double bc = 0.0;
};

enum class CalibrationMode {
    LogGamma,        // b0 = bC = log(gamma)
    KlProportional,  // b scaled by D(fB||f*) / min{D(fB||f0), D(fB||fC)}
};

inline Thresholds calibrate_thresholds(double gamma) {
    if (!(gamma > 1.0) || !std::isfinite(gamma)) {
        throw InvalidArgument("gamma must be finite and > 1");
    }
    const double b = std::log(gamma);
    return {b, b};
}

inline Thresholds calibrate_thresholds(double gamma, CalibrationMode mode, const DensityModel& f0,
                                       const DensityModel& fc, const DensityModel& fb) {
    const Thresholds base = calibrate_thresholds(gamma);
    if (mode == CalibrationMode::LogGamma) {
        return base;
    }
    require_distinct(f0, fc, fb);
    const double d0 = kl_divergence(fb, f0).value;
    const double dc = kl_divergence(fb, fc).value;
    const double m = std::min(d0, dc);
    return {base.b0 * d0 / m, base.bc * dc / m};
}

struct BoundSet {
    double gamma = 0.0;
    double universal_lower = 0.0; // log g / min{D(fB||f0), D(fB||fC)}
    double s_upper = 0.0;         // log g / D(fB||f0) + log g / D(fB||fC)
    double j_upper = 0.0;         // same leading term as s_upper
};

inline BoundSet bounds_from_log_gamma(double log_gamma, const DensityModel& f0, const DensityModel& fc,
                                      const DensityModel& fb) {
    if (!(log_gamma > 0.0) || !std::isfinite(log_gamma)) {
        throw InvalidArgument("gamma must be finite and > 1");
    }
    require_distinct(f0, fc, fb);
    const double d0 = kl_divergence(fb, f0).value;
    const double dc = kl_divergence(fb, fc).value;
    BoundSet out;
    out.gamma = std::exp(log_gamma);
    out.universal_lower = log_gamma / std::min(d0, dc);
    out.s_upper = log_gamma / d0 + log_gamma / dc;
    out.j_upper = out.s_upper;
    return out;
}

inline BoundSet bounds(double gamma, const DensityModel& f0, const DensityModel& fc, const DensityModel& fb) {
    if (!(gamma > 1.0) || !std::isfinite(gamma)) {
        throw InvalidArgument("gamma must be finite and > 1");
    }
    BoundSet out = bounds_from_log_gamma(std::log(gamma), f0, fc, fb);
    out.gamma = gamma;
    return out;
}

} // namespace qcd
