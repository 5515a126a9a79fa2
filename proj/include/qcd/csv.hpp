#pragma once

// Record and summary CSV persistence. Column order is fixed; floats use six
// significant digits; undefined values (censored stopping times, means of
// fully censored cells) are written as empty fields.

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qcd/harness.hpp"

namespace qcd::csv {

inline constexpr std::string_view kRecordHeader =
    "scenario,detector,b0,bC,regime,nu,trial,stopping_time,censored,horizon,seed";

inline constexpr std::string_view kSummaryHeader =
    "scenario,detector,b,mean_delay,se_delay,mean_rl_pre,se_rl_pre,mean_rl_confusing,se_rl_confusing,"
    "min_rl,censored_pre,censored_confusing,trials";

inline std::string format_real(double v) {
    if (std::isnan(v)) {
        return {};
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline void write_records(std::ostream& out, const std::vector<TrialRecord>& records) {
    out << kRecordHeader << '\n';
    for (const auto& r : records) {
        out << r.scenario << ',' << to_string(r.detector) << ',' << format_real(r.b0) << ','
            << format_real(r.bc) << ',' << to_string(r.regime.kind) << ',';
        if (auto nu = r.regime.change_point()) {
            out << *nu;
        }
        out << ',' << r.trial << ',';
        if (r.stopping_time) {
            out << *r.stopping_time;
        }
        out << ',' << (r.censored() ? 1 : 0) << ',' << r.horizon << ',' << r.seed << '\n';
    }
}

inline void write_summary(std::ostream& out, const ExperimentSummary& summary) {
    out << kSummaryHeader << '\n';
    for (const auto& row : summary.rows) {
        out << row.scenario << ',' << to_string(row.detector) << ',' << format_real(row.b0) << ','
            << format_real(row.delay.mean) << ',' << format_real(row.delay.std_error) << ','
            << format_real(row.rl_pre.mean) << ',' << format_real(row.rl_pre.std_error) << ','
            << format_real(row.rl_confusing.mean) << ',' << format_real(row.rl_confusing.std_error) << ','
            << format_real(row.min_rl) << ',' << row.rl_pre.censored << ',' << row.rl_confusing.censored << ','
            << row.trials << '\n';
    }
}

// Minimal reader for the files above: no quoting, comma separated.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        throw InvalidArgument("missing column '" + std::string(name) + "'");
    }
};

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

inline Table read_table(std::istream& in) {
    Table t;
    std::string line;
    if (!std::getline(in, line)) {
        throw InvalidArgument("empty CSV");
    }
    t.header = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        auto fields = split_line(line);
        if (fields.size() != t.header.size()) {
            throw InvalidArgument("CSV row has " + std::to_string(fields.size()) + " fields, header has " +
                                  std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    return t;
}

} // namespace qcd::csv
