#pragma once

#include <string>
#include <vector>

#include "cmtssl/difficulty.hpp"
#include "cmtssl/evaluation.hpp"

namespace cmtssl {

// JSON text emitters/parsers for the report artifacts. Doubles are emitted
// with shortest round-trip representation, so re-parsing a report reproduces
// the in-memory values exactly.

std::string correlation_report_to_json_text(const CorrelationReport& report);

std::string metric_report_to_json_text(const MetricReport& report, bool per_class = false);
MetricReport metric_report_from_json_text(const std::string& text);

struct StrategyRow {
  std::string strategy;
  MetricReport aggregated;
  std::vector<std::size_t> pretrain_steps;  // per seed; empty for scratch
};

std::string compare_report_to_json_text(const std::vector<StrategyRow>& rows);
std::vector<StrategyRow> compare_report_from_json_text(const std::string& text);

// Plain-text table (metrics x100, mean +/- std) for terminal output.
std::string render_compare_table(const std::vector<StrategyRow>& rows);

struct SweepRow {
  double value = 0.0;
  MetricReport aggregated;
};

std::string sweep_report_to_json_text(const std::string& param,
                                      const std::vector<SweepRow>& rows);

// CSV: value, oa, oa_std, aa, aa_std, kappa, kappa_std.
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

// Minimal static line chart (one series per metric) for the sweep output.
void write_sweep_svg(const std::string& path, const std::string& param,
                     const std::vector<SweepRow>& rows);

// scores.csv / losses.csv helpers: `cube_id,<value_name>` rows.
void write_id_value_csv(const std::string& path, const std::string& value_name,
                        const std::vector<std::pair<std::string, double>>& rows);
std::vector<std::pair<std::string, double>> read_id_value_csv(const std::string& path);

}  // namespace cmtssl
