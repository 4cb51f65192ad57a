#pragma once

#include <vector>

#include "medusa/tensor.hpp"

namespace medusa {

// Mean absolute error over all elements.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

// Softmax cross-entropy over the channel axis of N x K x H x W logits.
// labels holds N*H*W class ids; pixels equal to ignore_index contribute
// nothing (including to the mean's denominator).
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels, int ignore_index = -1);

// Binary cross-entropy from logits with the positive-class term weighted by
// pos_weight and the negative term by 1 - pos_weight; mean over elements.
Tensor weighted_bce(const Tensor& logits, const Tensor& target, double pos_weight);

}  // namespace medusa
