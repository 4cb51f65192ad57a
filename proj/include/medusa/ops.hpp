#pragma once

#include <vector>

#include "medusa/tensor.hpp"

// Differentiable tensor operations. Feature maps are laid out N x C x H x W.

namespace medusa {

// weight is C_out x C_in x k x k with odd k; bias is [C_out].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding);

// Training mode normalizes with batch statistics over N*H*W per channel and
// updates the running stats in place (momentum 0.1 convention); eval mode
// normalizes with the running stats.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean, std::vector<double>& running_var,
                  bool training, double momentum = 0.1, double eps = 1e-5);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor sum(const Tensor& x);  // scalar

// All inputs must share N, H, W; channels concatenate in argument order.
Tensor concat_channels(const std::vector<Tensor>& xs);

// Integer-factor bilinear upsampling with half-pixel sample centers.
Tensor upsample_bilinear(const Tensor& x, int factor);

}  // namespace medusa
