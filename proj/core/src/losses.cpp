#include "cmtssl/losses.hpp"

#include <cmath>

#include "cmtssl/errors.hpp"

namespace cmtssl {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bce_term(double logit, double target) {
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::fabs(logit)));
}

double bce_with_logits(const std::vector<double>& logits,
                       const std::vector<double>& targets) {
  if (logits.size() != targets.size())
    throw ShapeError("bce_with_logits: length mismatch");
  if (logits.empty()) throw DegenerateInputError("bce_with_logits: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double y = targets[i];
    if (y != 0.0 && y != 1.0)
      throw DataError("bce_with_logits: target entries must be 0 or 1");
    sum += bce_term(logits[i], y);
  }
  return sum / static_cast<double>(logits.size());
}

double masked_mae(const Tensor& prediction, const Tensor& original, const Tensor& mask) {
  if (!prediction.same_shape(original) || !prediction.same_shape(mask))
    throw ShapeError("masked_mae: shape mismatch");
  const double* p = prediction.data();
  const double* o = original.data();
  const double* m = mask.data();
  double sum = 0.0, count = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    if (m[i] != 0.0) {
      sum += std::fabs(p[i] - o[i]);
      count += 1.0;
    }
  }
  if (count == 0.0) throw DegenerateInputError("masked_mae: empty mask");
  return sum / count;
}

}  // namespace cmtssl
