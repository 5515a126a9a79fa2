#pragma once

// Monte Carlo engine: regime-conditioned observation streams, single trials,
// whole experiments, and aggregation into delay / run-length estimates.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include "qcd/detectors.hpp"
#include "qcd/distributions.hpp"
#include "qcd/error.hpp"
#include "qcd/random.hpp"
#include "qcd/statistics.hpp"
#include "qcd/theory.hpp"

namespace qcd {

enum class RegimeKind { PreChange, BadChange, ConfusingChange };

struct Regime {
    RegimeKind kind = RegimeKind::PreChange;
    std::uint64_t nu = 0; // change point, >= 1; unused for PreChange

    static Regime pre_change() noexcept { return {RegimeKind::PreChange, 0}; }
    static Regime bad_change(std::uint64_t nu) { return checked(RegimeKind::BadChange, nu); }
    static Regime confusing_change(std::uint64_t nu) { return checked(RegimeKind::ConfusingChange, nu); }

    std::optional<std::uint64_t> change_point() const noexcept {
        return kind == RegimeKind::PreChange ? std::nullopt : std::optional<std::uint64_t>(nu);
    }

    // Substream id; depends on regime only so every detector and threshold
    // sees the same observations for a given trial.
    std::uint64_t stream_id() const noexcept {
        return (static_cast<std::uint64_t>(kind) << 48) | nu;
    }

    friend bool operator==(const Regime&, const Regime&) = default;
    friend auto operator<=>(const Regime&, const Regime&) = default;

private:
    static Regime checked(RegimeKind kind, std::uint64_t nu) {
        if (nu == 0) {
            throw InvalidArgument("change point must be >= 1");
        }
        return {kind, nu};
    }
};

inline constexpr std::string_view to_string(RegimeKind kind) noexcept {
    switch (kind) {
    case RegimeKind::PreChange: return "pre-change";
    case RegimeKind::BadChange: return "bad-change";
    case RegimeKind::ConfusingChange: return "confusing-change";
    }
    return "unknown";
}

// X_t ~ f0 for t < nu and X_t ~ post for t >= nu.
class ChangeStream {
public:
    ChangeStream(const DensityModel& f0, const DensityModel& post, std::optional<std::uint64_t> nu,
                 const SeedKey& key)
        : f0_(&f0), post_(&post), nu_(nu.value_or(0)), rng_(key) {
        if (nu && *nu == 0) {
            throw InvalidArgument("change point must be >= 1");
        }
    }

    double next() {
        ++t_;
        const bool changed = nu_ != 0 && t_ >= nu_;
        return (changed ? post_ : f0_)->sample(rng_);
    }

    std::uint64_t time() const noexcept { return t_; }

private:
    const DensityModel* f0_;
    const DensityModel* post_;
    std::uint64_t nu_;
    std::uint64_t t_ = 0;
    RandomStream rng_;
};

inline ChangeStream make_stream(const DensityModel& f0, const DensityModel& post,
                                std::optional<std::uint64_t> nu, const SeedKey& key) {
    return ChangeStream(f0, post, nu, key);
}

inline ChangeStream make_stream(const DetectorConfig& config, const Regime& regime, const SeedKey& key) {
    switch (regime.kind) {
    case RegimeKind::BadChange: return ChangeStream(config.f0, config.fb, regime.nu, key);
    case RegimeKind::ConfusingChange: return ChangeStream(config.f0, config.fc, regime.nu, key);
    case RegimeKind::PreChange: break;
    }
    return ChangeStream(config.f0, config.f0, std::nullopt, key);
}

struct TrialRecord {
    int scenario = 0;
    DetectorKind detector = DetectorKind::SCusum;
    double b0 = 0.0;
    double bc = 0.0;
    Regime regime;
    std::uint64_t trial = 0;
    StoppingTime stopping_time;
    std::uint64_t horizon = 0;
    std::uint64_t seed = 0;

    bool censored() const noexcept { return !stopping_time.has_value(); }
};

inline TrialRecord run_trial(const DetectorConfig& config, const Regime& regime, std::uint64_t horizon,
                             std::uint64_t seed, std::uint64_t trial, int scenario = 0) {
    auto stream = make_stream(config, regime, SeedKey{seed, trial, regime.stream_id()});
    const RunOutcome outcome = run_to_alarm(config, stream, horizon);
    return TrialRecord{scenario, config.kind, config.b0, config.bc, regime, trial,
                       outcome.alarm_time, horizon, seed};
}

// Default budgets: ceil(50 e^b) steps when estimating run lengths to false
// alarm, ceil(200 b / minKL) when estimating delays, with b = max(b0, bC).
struct HorizonPolicy {
    std::optional<std::uint64_t> run_length_override;
    std::optional<std::uint64_t> delay_override;

    std::uint64_t run_length(double b) const {
        if (run_length_override) {
            return *run_length_override;
        }
        return static_cast<std::uint64_t>(std::ceil(50.0 * std::exp(b)));
    }

    std::uint64_t delay(double b, double min_kl) const {
        if (delay_override) {
            return *delay_override;
        }
        return static_cast<std::uint64_t>(std::ceil(200.0 * b / min_kl));
    }
};

inline constexpr std::array<std::uint64_t, 5> kDefaultNuGrid = {1, 5, 10, 25, 50};

struct ExperimentPlan {
    ExperimentPlan(ModelTriple models_, int scenario_ = 0) : scenario(scenario_), models(std::move(models_)) {}

    int scenario = 0;
    ModelTriple models;
    std::vector<DetectorKind> detectors{kAllDetectors.begin(), kAllDetectors.end()};
    std::vector<double> thresholds; // b0 = bC = b
    std::size_t trials = 60;
    std::uint64_t seed = 1;
    HorizonPolicy horizon;
    bool use_nu_grid = false;
    std::vector<std::uint64_t> nu_grid{kDefaultNuGrid.begin(), kDefaultNuGrid.end()};
    unsigned threads = 0; // 0: hardware concurrency
    bool include_bad = true;
    bool include_pre = true;
    bool include_confusing = true;

    std::vector<Regime> regimes() const {
        std::vector<Regime> out;
        if (include_bad) {
            out.push_back(Regime::bad_change(1));
        }
        if (include_pre) {
            out.push_back(Regime::pre_change());
        }
        if (include_confusing) {
            if (use_nu_grid) {
                for (auto nu : nu_grid) {
                    out.push_back(Regime::confusing_change(nu));
                }
            } else {
                out.push_back(Regime::confusing_change(1));
            }
        }
        return out;
    }
};

// Aggregate of one (detector, threshold, regime family) cell.
struct CellStats {
    double mean = std::nan("");
    double std_error = std::nan("");
    std::size_t used = 0;     // records contributing to the mean
    std::size_t censored = 0; // censored records seen
    std::size_t total = 0;
    bool lower_bound = false; // censoring made the mean a lower-bound estimate

    bool defined() const noexcept { return used > 0; }
    bool all_censored() const noexcept { return total > 0 && censored == total; }
};

struct SummaryRow {
    int scenario = 0;
    DetectorKind detector = DetectorKind::SCusum;
    double b0 = 0.0;
    double bc = 0.0;
    CellStats delay;        // bad change at nu = 1
    CellStats rl_pre;       // no change
    CellStats rl_confusing; // confusing change; min over nu when a grid is used
    std::uint64_t worst_confusing_nu = 1;
    double min_rl = std::nan("");
    std::size_t trials = 0;
};

struct ExperimentSummary {
    std::vector<SummaryRow> rows;

    const SummaryRow* find(DetectorKind d, double b) const {
        for (const auto& r : rows) {
            if (r.detector == d && r.b0 == b) {
                return &r;
            }
        }
        return nullptr;
    }
};

enum class CensorPolicy {
    Exclude,           // drop censored trials from the mean
    SubstituteHorizon, // count censored trials at their horizon (lower bound)
};

// Mean and standard error (sample std / sqrt(n)) of `values`; sorted first
// so the result does not depend on input order.
inline CellStats mean_and_error(std::vector<double> values, std::size_t censored, std::size_t total,
                                bool lower_bound) {
    CellStats s;
    s.censored = censored;
    s.total = total;
    s.used = values.size();
    s.lower_bound = lower_bound && censored > 0;
    if (values.empty()) {
        return s;
    }
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    const double n = static_cast<double>(values.size());
    s.mean = sum / n;
    if (values.size() == 1) {
        s.std_error = 0.0;
        return s;
    }
    double ss = 0.0;
    for (double v : values) {
        ss += (v - s.mean) * (v - s.mean);
    }
    s.std_error = std::sqrt(ss / (n - 1.0) / n);
    return s;
}

// Delay is T - nu + 1 (the alarm sample counts), i.e. T itself at nu = 1.
inline CellStats summarize_delays(const std::vector<const TrialRecord*>& records) {
    std::vector<double> values;
    std::size_t censored = 0;
    for (const auto* r : records) {
        if (r->censored()) {
            ++censored;
            continue;
        }
        const auto t = *r->stopping_time;
        if (t >= r->regime.nu) {
            values.push_back(static_cast<double>(t - r->regime.nu + 1));
        }
    }
    return mean_and_error(std::move(values), censored, records.size(), false);
}

inline CellStats summarize_run_lengths(const std::vector<const TrialRecord*>& records, CensorPolicy policy) {
    std::vector<double> values;
    std::size_t censored = 0;
    for (const auto* r : records) {
        if (r->censored()) {
            ++censored;
            if (policy == CensorPolicy::SubstituteHorizon) {
                values.push_back(static_cast<double>(r->horizon));
            }
            continue;
        }
        values.push_back(static_cast<double>(*r->stopping_time));
    }
    return mean_and_error(std::move(values), censored, records.size(), true);
}

// Groups records by (detector, b0, bC) and aggregates each regime family.
// Rejects record sets that mix scenarios or repeat a (cell, trial) pair.
inline ExperimentSummary summarize(const std::vector<TrialRecord>& records,
                                   CensorPolicy run_length_policy = CensorPolicy::SubstituteHorizon) {
    if (records.empty()) {
        throw InvalidArgument("summarize: no records");
    }
    const int scenario = records.front().scenario;
    using GroupKey = std::tuple<DetectorKind, double, double>;
    using TrialKey = std::tuple<Regime, std::uint64_t>;
    std::map<GroupKey, std::map<TrialKey, const TrialRecord*>> groups;
    for (const auto& r : records) {
        if (r.scenario != scenario) {
            throw InvalidArgument("summarize: records mix scenarios " + std::to_string(scenario) + " and " +
                                  std::to_string(r.scenario));
        }
        auto& cell = groups[GroupKey{r.detector, r.b0, r.bc}];
        if (!cell.emplace(TrialKey{r.regime, r.trial}, &r).second) {
            throw InvalidArgument("summarize: duplicate trial " + std::to_string(r.trial) + " for detector " +
                                  std::string(to_string(r.detector)));
        }
    }

    ExperimentSummary summary;
    for (const auto& [key, cell] : groups) {
        SummaryRow row;
        row.scenario = scenario;
        std::tie(row.detector, row.b0, row.bc) = key;
        std::vector<const TrialRecord*> bad;
        std::vector<const TrialRecord*> pre;
        std::map<std::uint64_t, std::vector<const TrialRecord*>> confusing;
        for (const auto& [tk, rec] : cell) {
            switch (rec->regime.kind) {
            case RegimeKind::BadChange: bad.push_back(rec); break;
            case RegimeKind::PreChange: pre.push_back(rec); break;
            case RegimeKind::ConfusingChange: confusing[rec->regime.nu].push_back(rec); break;
            }
        }
        row.delay = summarize_delays(bad);
        row.rl_pre = summarize_run_lengths(pre, run_length_policy);
        for (const auto& [nu, recs] : confusing) {
            CellStats s = summarize_run_lengths(recs, run_length_policy);
            if (!row.rl_confusing.defined() || (s.defined() && s.mean < row.rl_confusing.mean)) {
                row.rl_confusing = s;
                row.worst_confusing_nu = nu;
            }
        }
        if (row.rl_pre.defined() && row.rl_confusing.defined()) {
            row.min_rl = std::min(row.rl_pre.mean, row.rl_confusing.mean);
        } else if (row.rl_pre.defined()) {
            row.min_rl = row.rl_pre.mean;
        } else if (row.rl_confusing.defined()) {
            row.min_rl = row.rl_confusing.mean;
        }
        row.trials = std::max({bad.size(), pre.size(), confusing.empty() ? 0 : confusing.begin()->second.size()});
        summary.rows.push_back(row);
    }
    return summary;
}

struct ExperimentResult {
    std::vector<TrialRecord> records;
    ExperimentSummary summary;
};

// Runs every (detector, b, regime, trial) cell. Trials are independent and
// may run on several threads; results are stored by index, so the output is
// identical for any thread count.
inline ExperimentResult run_experiment(const ExperimentPlan& plan) {
    if (plan.detectors.empty() || plan.thresholds.empty()) {
        throw InvalidArgument("run_experiment: detector and threshold lists must be nonempty");
    }
    if (plan.trials == 0) {
        throw InvalidArgument("run_experiment: trials must be positive");
    }
    const auto& m = plan.models;
    const double min_kl = std::min(kl_divergence(m.fb, m.f0).value, kl_divergence(m.fb, m.fc).value);

    struct Cell {
        DetectorConfig config;
        Regime regime;
        std::uint64_t horizon;
    };
    std::vector<Cell> cells;
    for (auto kind : plan.detectors) {
        for (double b : plan.thresholds) {
            DetectorConfig config(kind, m.f0, m.fc, m.fb, b, b);
            for (const auto& regime : plan.regimes()) {
                const std::uint64_t horizon = regime.kind == RegimeKind::BadChange
                                                  ? plan.horizon.delay(b, min_kl) + regime.nu - 1
                                                  : plan.horizon.run_length(b);
                cells.push_back(Cell{config, regime, horizon});
            }
        }
    }

    const std::size_t total = cells.size() * plan.trials;
    std::vector<TrialRecord> records(total);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) {
            const Cell& cell = cells[i / plan.trials];
            const std::uint64_t trial = i % plan.trials;
            try {
                records[i] = run_trial(cell.config, cell.regime, cell.horizon, plan.seed, trial, plan.scenario);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(total);
            }
        }
    };

    unsigned n_threads = plan.threads != 0 ? plan.threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, total));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_threads);
        for (unsigned i = 0; i < n_threads; ++i) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    ExperimentResult result;
    result.summary = summarize(records);
    result.records = std::move(records);
    return result;
}

} // namespace qcd
