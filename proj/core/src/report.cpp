#include "cmtssl/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "cmtssl/errors.hpp"

using nlohmann::json;

namespace cmtssl {

namespace {

json metric_report_to_json(const MetricReport& r, bool per_class) {
  json j;
  j["oa"] = {{"mean", r.oa}, {"std", r.oa_std}};
  j["aa"] = {{"mean", r.aa}, {"std", r.aa_std}};
  j["kappa"] = {{"mean", r.kappa}, {"std", r.kappa_std}};
  j["seeds"] = r.seeds;
  if (per_class) {
    json pc = json::array();
    for (double v : r.per_class) {
      if (std::isnan(v))
        pc.push_back(nullptr);
      else
        pc.push_back(v);
    }
    j["per_class"] = pc;
  }
  return j;
}

MetricReport metric_report_from_json(const json& j) {
  MetricReport r;
  r.oa = j.at("oa").at("mean").get<double>();
  r.oa_std = j.at("oa").at("std").get<double>();
  r.aa = j.at("aa").at("mean").get<double>();
  r.aa_std = j.at("aa").at("std").get<double>();
  r.kappa = j.at("kappa").at("mean").get<double>();
  r.kappa_std = j.at("kappa").at("std").get<double>();
  r.seeds = j.value("seeds", 1);
  if (j.contains("per_class")) {
    for (const auto& v : j["per_class"]) {
      r.per_class.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                        : v.get<double>());
    }
  }
  return r;
}

}  // namespace

std::string correlation_report_to_json_text(const CorrelationReport& report) {
  json j = {{"aggregation", aggregation_name(report.aggregation)},
            {"task", report.task},
            {"pearson_r", report.pearson_r},
            {"sample_count", report.sample_count}};
  return j.dump(2);
}

std::string metric_report_to_json_text(const MetricReport& report, bool per_class) {
  return metric_report_to_json(report, per_class).dump(2);
}

MetricReport metric_report_from_json_text(const std::string& text) {
  return metric_report_from_json(json::parse(text));
}

std::string compare_report_to_json_text(const std::vector<StrategyRow>& rows) {
  json j;
  j["strategies"] = json::array();
  for (const StrategyRow& row : rows) {
    json r = metric_report_to_json(row.aggregated, false);
    r["strategy"] = row.strategy;
    r["pretrain_steps"] = row.pretrain_steps;
    j["strategies"].push_back(r);
  }
  return j.dump(2);
}

std::vector<StrategyRow> compare_report_from_json_text(const std::string& text) {
  const json j = json::parse(text);
  std::vector<StrategyRow> rows;
  for (const auto& r : j.at("strategies")) {
    StrategyRow row;
    row.strategy = r.at("strategy").get<std::string>();
    row.aggregated = metric_report_from_json(r);
    if (r.contains("pretrain_steps"))
      row.pretrain_steps = r["pretrain_steps"].get<std::vector<std::size_t>>();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string render_compare_table(const std::vector<StrategyRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "strategy" << std::right << std::setw(16) << "AA"
     << std::setw(16) << "OA" << std::setw(16) << "Kappa" << std::setw(8) << "seeds"
     << "\n";
  os << std::string(66, '-') << "\n";
  auto cell = [](double mean, double std_dev) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(1) << mean * 100.0 << "+/-" << std_dev * 100.0;
    return c.str();
  };
  for (const StrategyRow& row : rows) {
    os << std::left << std::setw(10) << row.strategy << std::right << std::setw(16)
       << cell(row.aggregated.aa, row.aggregated.aa_std) << std::setw(16)
       << cell(row.aggregated.oa, row.aggregated.oa_std) << std::setw(16)
       << cell(row.aggregated.kappa, row.aggregated.kappa_std) << std::setw(8)
       << row.aggregated.seeds << "\n";
  }
  return os.str();
}

std::string sweep_report_to_json_text(const std::string& param,
                                      const std::vector<SweepRow>& rows) {
  json j;
  j["param"] = param;
  j["rows"] = json::array();
  for (const SweepRow& row : rows) {
    json r = metric_report_to_json(row.aggregated, false);
    r["value"] = row.value;
    j["rows"].push_back(r);
  }
  return j.dump(2);
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "value,oa,oa_std,aa,aa_std,kappa,kappa_std\n";
  out << std::setprecision(17);
  for (const SweepRow& r : rows)
    out << r.value << "," << r.aggregated.oa << "," << r.aggregated.oa_std << ","
        << r.aggregated.aa << "," << r.aggregated.aa_std << "," << r.aggregated.kappa
        << "," << r.aggregated.kappa_std << "\n";
}

void write_sweep_svg(const std::string& path, const std::string& param,
                     const std::vector<SweepRow>& rows) {
  if (rows.empty()) throw DegenerateInputError("write_sweep_svg: no rows");
  const int width = 640, height = 420, margin = 60;
  double xmin = rows.front().value, xmax = rows.front().value;
  for (const SweepRow& r : rows) {
    xmin = std::min(xmin, r.value);
    xmax = std::max(xmax, r.value);
  }
  if (xmax == xmin) xmax = xmin + 1.0;

  auto sx = [&](double v) {
    return margin + (v - xmin) / (xmax - xmin) * (width - 2 * margin);
  };
  auto sy = [&](double v) {
    return height - margin - v * (height - 2 * margin);  // metrics live in [0,1]
  };

  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
      << height << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
      << "' y2='" << height - margin << "' stroke='black'/>\n";
  out << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
      << height - margin << "' stroke='black'/>\n";
  out << "<text x='" << width / 2 << "' y='" << height - 15
      << "' text-anchor='middle' font-size='14'>" << param << "</text>\n";
  out << "<text x='15' y='" << height / 2 << "' text-anchor='middle' font-size='14' "
      << "transform='rotate(-90 15 " << height / 2 << ")'>metric</text>\n";

  const struct {
    const char* name;
    const char* color;
    double MetricReport::*field;
  } series[] = {{"OA", "#1f77b4", &MetricReport::oa},
                {"AA", "#2ca02c", &MetricReport::aa},
                {"Kappa", "#d62728", &MetricReport::kappa}};
  int label_y = margin;
  for (const auto& s : series) {
    out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='2' points='";
    for (const SweepRow& r : rows) out << sx(r.value) << "," << sy(r.aggregated.*s.field) << " ";
    out << "'/>\n";
    for (const SweepRow& r : rows)
      out << "<circle cx='" << sx(r.value) << "' cy='" << sy(r.aggregated.*s.field)
          << "' r='3' fill='" << s.color << "'/>\n";
    out << "<text x='" << width - margin + 5 << "' y='" << label_y << "' font-size='12' fill='"
        << s.color << "'>" << s.name << "</text>\n";
    label_y += 16;
  }
  out << "</svg>\n";
}

void write_id_value_csv(const std::string& path, const std::string& value_name,
                        const std::vector<std::pair<std::string, double>>& rows) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "cube_id," << value_name << "\n";
  out << std::setprecision(17);
  for (const auto& [id, value] : rows) out << id << "," << value << "\n";
}

std::vector<std::pair<std::string, double>> read_id_value_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<std::pair<std::string, double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("cube_id,", 0) == 0) continue;  // header
    }
    const std::size_t comma = line.find_last_of(',');
    if (comma == std::string::npos) throw FormatError("malformed CSV row in " + path);
    try {
      rows.emplace_back(line.substr(0, comma), std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw FormatError("unparseable value in " + path);
    }
  }
  return rows;
}

}  // namespace cmtssl
