// qcd: command-line front end for the change-detection library.
//
//   qcd classify F0 FC FB
//   qcd bounds F0 FC FB --log-gamma 4 [--gamma 100 ...]
//   qcd replicate <1|2|3|all> [--trials 60] [--seed 1] ...
//   qcd simulate --f0 SPEC --fc SPEC --fb SPEC [...]
//
// Exit codes: 0 success, 2 usage or validation error, 3 I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qcd/qcd.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

using nlohmann::json;
namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunOptions {
    std::size_t trials = 60;
    std::optional<std::uint64_t> seed;
    std::vector<double> b_grid{1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
    std::vector<std::string> detectors{"cusum-w", "cusum-lambda", "s-cusum", "j-cusum"};
    std::string records;
    std::string summary;
    std::string out_dir = ".";
    bool nu_grid = false;
    unsigned threads = 0;
    std::uint64_t horizon_rl = 0;
    std::uint64_t horizon_delay = 0;
    std::string config;
};

void add_run_options(CLI::App* sub, RunOptions& o) {
    sub->add_option("--trials", o.trials, "Trials per (detector, b, regime) cell")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "Experiment seed (default: $QCD_SEED, else 1)");
    sub->add_option("--b", o.b_grid, "Threshold grid; b0 = bC = b")->check(CLI::PositiveNumber);
    sub->add_option("--detectors", o.detectors, "Detectors: cusum-w cusum-lambda s-cusum j-cusum");
    sub->add_option("--records", o.records, "Record CSV path (default: <out-dir>/scenario<k>_records.csv)");
    sub->add_option("--summary", o.summary, "Summary CSV path (default: <out-dir>/scenario<k>_summary.csv)");
    sub->add_option("--out-dir", o.out_dir, "Directory for default output paths");
    sub->add_flag("--nu-grid", o.nu_grid, "Also probe confusing change points 1,5,10,25,50 and keep the minimum");
    sub->add_option("--threads", o.threads, "Worker threads (0: hardware concurrency)");
    sub->add_option("--horizon-rl", o.horizon_rl, "Run-length horizon override (0: ceil(50 e^b))");
    sub->add_option("--horizon-delay", o.horizon_delay, "Delay horizon override (0: ceil(200 b / minKL))");
    sub->add_option("--config", o.config, "JSON file of option values; command-line flags win");
}

std::vector<std::string> json_to_inputs(const json& v) {
    std::vector<std::string> out;
    auto scalar = [](const json& s) -> std::string {
        if (s.is_string()) {
            return s.get<std::string>();
        }
        if (s.is_boolean()) {
            return s.get<bool>() ? "true" : "false";
        }
        if (s.is_number() || s.is_null()) {
            return s.dump();
        }
        throw UsageError("config values must be scalars or arrays of scalars");
    };
    if (v.is_array()) {
        for (const auto& e : v) {
            out.push_back(scalar(e));
        }
    } else {
        out.push_back(scalar(v));
    }
    return out;
}

// Fills options not given on the command line from a JSON object whose keys
// are long option names without dashes.
void apply_config(CLI::App* sub, const std::string& path) {
    if (path.empty()) {
        return;
    }
    std::ifstream in(path);
    if (!in) {
        throw qcd::IoError("cannot read config file '" + path + "'");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) {
        throw UsageError("config file must hold a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        if (key == "config") {
            throw UsageError("config files cannot include other config files");
        }
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr) {
            throw UsageError("unknown config key '" + key + "'");
        }
        if (opt->count() > 0) {
            continue;
        }
        opt->add_result(json_to_inputs(value));
        opt->run_callback();
    }
}

std::uint64_t resolve_seed(const RunOptions& o) {
    if (o.seed) {
        return *o.seed;
    }
    if (const char* env = std::getenv("QCD_SEED"); env != nullptr && *env != '\0') {
        try {
            std::size_t pos = 0;
            const auto v = std::stoull(env, &pos);
            if (pos == std::string(env).size()) {
                return v;
            }
        } catch (const std::exception&) {
        }
        throw UsageError(std::string("QCD_SEED is not an unsigned integer: '") + env + "'");
    }
    return 1;
}

qcd::ExperimentPlan make_plan(const RunOptions& o, int scenario, qcd::ModelTriple models) {
    qcd::ExperimentPlan plan(std::move(models), scenario);
    plan.detectors.clear();
    for (const auto& d : o.detectors) {
        plan.detectors.push_back(qcd::parse_detector_kind(d));
    }
    plan.thresholds = o.b_grid;
    plan.trials = o.trials;
    plan.seed = resolve_seed(o);
    plan.use_nu_grid = o.nu_grid;
    plan.threads = o.threads;
    if (o.horizon_rl > 0) {
        plan.horizon.run_length_override = o.horizon_rl;
    }
    if (o.horizon_delay > 0) {
        plan.horizon.delay_override = o.horizon_delay;
    }
    return plan;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
    fs::path p(path);
    fs::path out = p.parent_path() / (p.stem().string() + suffix + p.extension().string());
    return out.string();
}

template <typename Writer>
void write_file(const std::string& path, Writer&& write) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw qcd::IoError("cannot open '" + path + "' for writing");
    }
    write(out);
    out.flush();
    if (!out) {
        throw qcd::IoError("failed writing '" + path + "'");
    }
}

void run_and_write(const RunOptions& o, int scenario, qcd::ModelTriple models, bool multi) {
    const auto plan = make_plan(o, scenario, std::move(models));
    const std::string tag = "scenario" + std::to_string(scenario);
    auto resolve = [&](const std::string& given, const std::string& kind) {
        if (given.empty()) {
            std::error_code ec;
            fs::create_directories(o.out_dir, ec);
            if (ec) {
                throw qcd::IoError("cannot create output directory '" + o.out_dir + "': " + ec.message());
            }
            return (fs::path(o.out_dir) / (tag + "_" + kind + ".csv")).string();
        }
        return multi ? with_suffix(given, "_s" + std::to_string(scenario)) : given;
    };
    const std::string records_path = resolve(o.records, "records");
    const std::string summary_path = resolve(o.summary, "summary");

    // Fail on unwritable paths before spending time on the simulation.
    write_file(records_path, [](std::ostream&) {});
    write_file(summary_path, [](std::ostream&) {});

    const auto result = qcd::run_experiment(plan);
    write_file(records_path, [&](std::ostream& out) { qcd::csv::write_records(out, result.records); });
    write_file(summary_path, [&](std::ostream& out) { qcd::csv::write_summary(out, result.summary); });
    std::cerr << tag << ": " << result.records.size() << " records -> " << records_path << ", summary -> "
              << summary_path << '\n';
}

json kl_json(const qcd::KlEstimate& k) {
    json j = {{"value", k.value}, {"std_error", k.std_error}};
    switch (k.method) {
    case qcd::KlMethod::ClosedForm: j["method"] = "closed-form"; break;
    case qcd::KlMethod::Quadrature: j["method"] = "quadrature"; break;
    case qcd::KlMethod::MonteCarlo:
        j["method"] = "monte-carlo";
        j["samples"] = k.samples;
        break;
    }
    return j;
}

qcd::ModelTriple parse_triple(const std::vector<std::string>& specs) {
    if (specs.size() != 3) {
        throw UsageError("expected exactly three density specs: F0 FC FB");
    }
    qcd::ModelTriple m{qcd::DensityModel::parse(specs[0]), qcd::DensityModel::parse(specs[1]),
                       qcd::DensityModel::parse(specs[2])};
    qcd::require_distinct(m.f0, m.fc, m.fb);
    return m;
}

int classify_cmd(const std::vector<std::string>& specs) {
    const auto m = parse_triple(specs);
    const auto r = qcd::classify(m);
    json out = {
        {"f0", m.f0.spec()},
        {"fC", m.fc.spec()},
        {"fB", m.fb.spec()},
        {"kl",
         {{"f0||fC", kl_json(r.d_f0_fc)},
          {"f0||fB", kl_json(r.d_f0_fb)},
          {"fC||f0", kl_json(r.d_fc_f0)},
          {"fC||fB", kl_json(r.d_fc_fb)},
          {"fB||f0", kl_json(r.d_fb_f0)},
          {"fB||fC", kl_json(r.d_fb_fc)}}},
        {"drift_w_under_fC", r.drift_w_under_fc},
        {"drift_lambda_under_f0", r.drift_lam_under_f0},
        {"scenario", qcd::scenario_number(r.scenario)},
    };
    std::cout << out.dump(2) << '\n';
    return kExitOk;
}

int bounds_cmd(const std::vector<std::string>& specs, const std::vector<double>& gammas,
               const std::vector<double>& log_gammas, const std::string& out_path) {
    const auto m = parse_triple(specs);
    if (gammas.empty() && log_gammas.empty()) {
        throw UsageError("bounds needs at least one --gamma or --log-gamma value");
    }
    std::vector<qcd::BoundSet> rows;
    std::vector<double> logs;
    for (double g : gammas) {
        rows.push_back(qcd::bounds(g, m.f0, m.fc, m.fb));
        logs.push_back(std::log(g));
    }
    for (double lg : log_gammas) {
        rows.push_back(qcd::bounds_from_log_gamma(lg, m.f0, m.fc, m.fb));
        logs.push_back(lg);
    }
    auto emit = [&](std::ostream& out) {
        using qcd::csv::format_real;
        out << "gamma,log_gamma,universal_lower,s_upper,j_upper\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out << format_real(rows[i].gamma) << ',' << format_real(logs[i]) << ','
                << format_real(rows[i].universal_lower) << ',' << format_real(rows[i].s_upper) << ','
                << format_real(rows[i].j_upper) << '\n';
        }
    };
    if (out_path.empty()) {
        emit(std::cout);
    } else {
        write_file(out_path, emit);
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quickest change detection with a confusing change: detectors, bounds and simulations"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    std::vector<std::string> classify_specs;
    auto* classify = app.add_subcommand("classify", "Report KL divergences, drifts and scenario (JSON)");
    classify->add_option("specs", classify_specs, "F0 FC FB as gaussian:<mean>:<variance>")
        ->required()
        ->expected(3);

    std::vector<std::string> bounds_specs;
    std::vector<double> gammas;
    std::vector<double> log_gammas;
    std::string bounds_out;
    auto* bounds = app.add_subcommand("bounds", "Leading-order delay bounds per gamma (CSV)");
    bounds->add_option("specs", bounds_specs, "F0 FC FB as gaussian:<mean>:<variance>")->required()->expected(3);
    bounds->add_option("--gamma", gammas, "Run-length targets (> 1)");
    bounds->add_option("--log-gamma", log_gammas, "Run-length targets given as log(gamma) (> 0)");
    bounds->add_option("--out", bounds_out, "Write CSV here instead of stdout");

    RunOptions replicate_opts;
    std::string scenario_arg;
    auto* replicate = app.add_subcommand("replicate", "Run the preset scenario study and write CSVs");
    replicate->add_option("scenario", scenario_arg, "1, 2, 3 or all")->required();
    add_run_options(replicate, replicate_opts);

    RunOptions simulate_opts;
    std::string f0_spec;
    std::string fc_spec;
    std::string fb_spec;
    auto* simulate = app.add_subcommand("simulate", "Run a study on custom models and write CSVs");
    simulate->add_option("--f0", f0_spec, "Pre-change density spec");
    simulate->add_option("--fc", fc_spec, "Confusing-change density spec");
    simulate->add_option("--fb", fb_spec, "Bad-change density spec");
    add_run_options(simulate, simulate_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (classify->parsed()) {
            return classify_cmd(classify_specs);
        }
        if (bounds->parsed()) {
            return bounds_cmd(bounds_specs, gammas, log_gammas, bounds_out);
        }
        if (replicate->parsed()) {
            apply_config(replicate, replicate_opts.config);
            if (scenario_arg == "all") {
                for (int s = 1; s <= 3; ++s) {
                    run_and_write(replicate_opts, s, qcd::scenario_preset(s), true);
                }
            } else if (scenario_arg == "1" || scenario_arg == "2" || scenario_arg == "3") {
                const int s = std::stoi(scenario_arg);
                run_and_write(replicate_opts, s, qcd::scenario_preset(s), false);
            } else {
                throw UsageError("scenario must be 1, 2, 3 or all, got '" + scenario_arg + "'");
            }
            return kExitOk;
        }
        if (simulate->parsed()) {
            apply_config(simulate, simulate_opts.config);
            if (f0_spec.empty() || fc_spec.empty() || fb_spec.empty()) {
                throw UsageError("simulate needs --f0, --fc and --fb");
            }
            auto models = parse_triple({f0_spec, fc_spec, fb_spec});
            const int s = qcd::scenario_number(qcd::classify(models).scenario);
            run_and_write(simulate_opts, s, std::move(models), false);
            return kExitOk;
        }
    } catch (const qcd::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const qcd::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
