#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cte/montecarlo.hpp"

namespace cte {

/// Shortest of %g-style output with 10 significant digits, always '.' as the
/// decimal separator regardless of the global locale.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 10);
    return std::string(buf, res.ptr);
}

inline const char* const kExperimentCsvHeader =
    "model,alpha,n,t,k,true_cte,mean,bias,rmse,failures,estimator";
inline const char* const kSweepCsvHeader = "k,mean_old,mean_new,true_cte";

/// One row per report cell, in report order, without a header line.
inline void write_experiment_rows(std::ostream& os, const ExperimentReport& r) {
    const std::string model = to_string(r.model.family());
    const std::string alpha = format_number(r.model.tail_index());
    for (const ReportCell& c : r.cells) {
        os << model << ',' << alpha << ',' << r.n << ',' << format_number(c.t) << ',' << c.k
           << ',' << format_number(c.true_cte) << ',' << format_number(c.mc_mean) << ','
           << format_number(c.bias) << ',' << format_number(c.rmse) << ',' << c.failure_count
           << ',' << to_string(c.method) << '\n';
    }
}

inline void write_experiment_csv(std::ostream& os, const std::vector<ExperimentReport>& reports) {
    os << kExperimentCsvHeader << '\n';
    for (const auto& r : reports) write_experiment_rows(os, r);
}

/// Mirrors the CSV columns, plus the fallback count.
inline nlohmann::json experiment_json(const std::vector<ExperimentReport>& reports) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : reports) {
        for (const ReportCell& c : r.cells) {
            rows.push_back({{"model", to_string(r.model.family())},
                            {"alpha", r.model.tail_index()},
                            {"n", r.n},
                            {"t", c.t},
                            {"k", c.k},
                            {"estimator", to_string(c.method)},
                            {"true_cte", c.true_cte},
                            {"mean", c.mc_mean},
                            {"bias", c.bias},
                            {"rmse", c.rmse},
                            {"failures", c.failure_count},
                            {"fallbacks", c.fallback_count}});
        }
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& os, const KSweepCurve& curve) {
    os << kSweepCsvHeader << '\n';
    for (const KSweepRow& row : curve.rows) {
        os << row.k << ',' << format_number(row.mean_old) << ',' << format_number(row.mean_new)
           << ',' << format_number(row.true_cte) << '\n';
    }
}

inline nlohmann::json sweep_json(const KSweepCurve& curve) {
    nlohmann::json rows = nlohmann::json::array();
    for (const KSweepRow& row : curve.rows) {
        rows.push_back({{"k", row.k},
                        {"mean_old", row.mean_old},
                        {"mean_new", row.mean_new},
                        {"true_cte", row.true_cte},
                        {"failures_old", row.failures_old},
                        {"failures_new", row.failures_new}});
    }
    return rows;
}

} // namespace cte
