#pragma once

#include <vector>

#include "cmtssl/tensor.hpp"

namespace cmtssl {

// Mean binary cross-entropy over logits, computed in the numerically stable
// form max(x,0) - x*y + log1p(exp(-|x|)). Targets must be exactly 0 or 1.
double bce_with_logits(const std::vector<double>& logits,
                       const std::vector<double>& targets);

// Per-entry stable BCE term; shared with the autograd op so both paths agree.
double bce_term(double logit, double target);

// Sigmoid, stable for large |x|.
double sigmoid(double x);

// Mean absolute error over masked voxels only. `mask` is 1 inside masked
// regions; throws DegenerateInputError when the mask is empty.
double masked_mae(const Tensor& prediction, const Tensor& original, const Tensor& mask);

}  // namespace cmtssl
