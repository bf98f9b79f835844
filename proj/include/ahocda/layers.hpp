#pragma once

#include <cstdint>

#include "ahocda/rng.hpp"
#include "ahocda/tensor.hpp"

namespace ahocda::layers {

/// 3x3 convolution, stride 1, zero padding 1. Weight rows are indexed by
/// (ky * 3 + kx) * in_channels + ci, columns by output channel.
struct Conv3x3 {
    int in_channels = 0;
    int out_channels = 0;
    Matrix weight;  // 9*in x out
    Matrix bias;    // 1 x out

    static Conv3x3 create(int in_channels, int out_channels, Rng& rng);
    friend bool operator==(const Conv3x3&, const Conv3x3&) = default;
};

struct ConvCache {
    Matrix columns;  // (H*W) x 9*in
    int h = 0;
    int w = 0;
};

Tensor forward(const Conv3x3& conv, const Tensor& x, ConvCache* cache);

/// Accumulates into d_weight / d_bias and returns d_x when want_input_grad.
Tensor backward(const Conv3x3& conv, const ConvCache& cache, const Tensor& d_out, Matrix& d_weight, Matrix& d_bias,
                bool want_input_grad);

/// Per-location linear map with bias: out = x W + b.
struct Linear {
    Matrix weight;  // in x out
    Matrix bias;    // 1 x out
    friend bool operator==(const Linear&, const Linear&) = default;
};

Tensor forward(const Linear& lin, const Tensor& x);
Tensor backward(const Linear& lin, const Tensor& x, const Tensor& d_out, Matrix& d_weight, Matrix& d_bias);

void leaky_relu_inplace(Tensor& x, double slope);
/// d_out is scaled where the pre-activation was negative.
void leaky_relu_backward_inplace(const Tensor& pre, Tensor& d_out, double slope);

/// Softmax over the channel axis at every location, max-subtracted.
Tensor softmax_channels(const Tensor& logits);
/// Vector-Jacobian product of softmax_channels given its output.
Tensor softmax_channels_backward(const Tensor& probs, const Tensor& d_probs);

}  // namespace ahocda::layers
