#include "cmtssl/evaluation.hpp"

#include <cmath>
#include <limits>

#include "cmtssl/errors.hpp"
#include "cmtssl/threading.hpp"

namespace cmtssl {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (std::int64_t c : counts) t += c;
  return t;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes != num_classes) throw ShapeError("confusion matrix class mismatch");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  all_ignored = all_ignored && other.all_ignored;
}

ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                          int num_classes, int ignore_id) {
  if (pred.size() != truth.size()) throw ShapeError("confusion: shape mismatch");
  if (num_classes < 1) throw ConfigError("confusion: num_classes must be >= 1");
  ConfusionMatrix cm;
  cm.num_classes = num_classes;
  cm.counts.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
  std::int64_t counted = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int t = truth[i];
    if (t == ignore_id) continue;
    const int p = pred[i];
    if (t < 0 || t >= num_classes)
      throw DataError("confusion: truth id " + std::to_string(t) + " out of range");
    if (p < 0 || p >= num_classes)
      throw DataError("confusion: prediction id " + std::to_string(p) + " out of range");
    ++cm.at(t, p);
    ++counted;
  }
  cm.all_ignored = counted == 0;
  return cm;
}

MetricReport metrics(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw DegenerateInputError("metrics: empty confusion matrix");
  const int nc = cm.num_classes;

  std::int64_t trace = 0;
  std::vector<std::int64_t> row(static_cast<std::size_t>(nc), 0);
  std::vector<std::int64_t> col(static_cast<std::size_t>(nc), 0);
  for (int t = 0; t < nc; ++t)
    for (int p = 0; p < nc; ++p) {
      const std::int64_t c = cm.at(t, p);
      row[static_cast<std::size_t>(t)] += c;
      col[static_cast<std::size_t>(p)] += c;
      if (t == p) trace += c;
    }

  MetricReport report;
  report.oa = static_cast<double>(trace) / static_cast<double>(total);

  report.per_class.assign(static_cast<std::size_t>(nc),
                          std::numeric_limits<double>::quiet_NaN());
  double aa_sum = 0.0;
  int aa_count = 0;
  for (int t = 0; t < nc; ++t) {
    if (row[static_cast<std::size_t>(t)] == 0) continue;  // zero support: excluded from AA
    const double acc = static_cast<double>(cm.at(t, t)) /
                       static_cast<double>(row[static_cast<std::size_t>(t)]);
    report.per_class[static_cast<std::size_t>(t)] = acc;
    aa_sum += acc;
    ++aa_count;
  }
  report.aa = aa_count > 0 ? aa_sum / static_cast<double>(aa_count) : 0.0;

  // Exact integer forms keep the hand-checkable cases exact in floating point:
  // kappa = (trace*total - sum_i row_i*col_i) / (total^2 - sum_i row_i*col_i).
  long double chance = 0.0L;
  for (int i = 0; i < nc; ++i)
    chance += static_cast<long double>(row[static_cast<std::size_t>(i)]) *
              static_cast<long double>(col[static_cast<std::size_t>(i)]);
  const long double total_sq = static_cast<long double>(total) * total;
  if (chance == total_sq) {
    report.kappa = trace == total ? 1.0 : 0.0;
  } else {
    report.kappa = static_cast<double>(
        (static_cast<long double>(trace) * total - chance) / (total_sq - chance));
  }
  return report;
}

MetricReport aggregate_runs(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw DegenerateInputError("aggregate_runs: no reports");
  const std::size_t n = reports.size();
  MetricReport out;
  out.seeds = static_cast<int>(n);

  auto mean_std = [n](auto get) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += get(i);
    mean /= static_cast<double>(n);
    double std_dev = 0.0;
    if (n > 1) {
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = get(i) - mean;
        sq += d * d;
      }
      std_dev = std::sqrt(sq / static_cast<double>(n - 1));
    }
    return std::pair<double, double>(mean, std_dev);
  };

  std::tie(out.oa, out.oa_std) = mean_std([&](std::size_t i) { return reports[i].oa; });
  std::tie(out.aa, out.aa_std) = mean_std([&](std::size_t i) { return reports[i].aa; });
  std::tie(out.kappa, out.kappa_std) =
      mean_std([&](std::size_t i) { return reports[i].kappa; });

  // Per-class means over runs where the class had support.
  const std::size_t nc = reports.front().per_class.size();
  out.per_class.assign(nc, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < nc; ++c) {
    double sum = 0.0;
    int count = 0;
    for (const MetricReport& r : reports) {
      if (c < r.per_class.size() && !std::isnan(r.per_class[c])) {
        sum += r.per_class[c];
        ++count;
      }
    }
    if (count > 0) out.per_class[c] = sum / static_cast<double>(count);
  }
  return out;
}

ConfusionMatrix evaluate_model(const MultiTaskModel& model,
                               const std::vector<DataCube>& cubes, int ignore_id) {
  const int nc = model.heads_spec().seg_classes;
  if (nc < 2) throw ConfigError("evaluate_model requires a segmentation head");
  std::vector<ConfusionMatrix> partial(cubes.size());
  parallel_for(cubes.size(), [&](std::size_t i) {
    if (!cubes[i].has_labels()) {
      partial[i].num_classes = nc;
      partial[i].counts.assign(static_cast<std::size_t>(nc) * nc, 0);
      partial[i].all_ignored = true;
      return;
    }
    const std::vector<int> pred = model.predict_labels(cubes[i].values);
    partial[i] = confusion(pred, cubes[i].labels, nc, ignore_id);
  });
  ConfusionMatrix cm;
  cm.num_classes = nc;
  cm.counts.assign(static_cast<std::size_t>(nc) * nc, 0);
  cm.all_ignored = true;
  for (const ConfusionMatrix& p : partial) cm.merge(p);
  return cm;
}

}  // namespace cmtssl
