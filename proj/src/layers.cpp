#include "ahocda/layers.hpp"

#include <algorithm>
#include <cmath>

#include "ahocda/error.hpp"
#include "ahocda/linalg.hpp"

namespace ahocda::layers {

using linalg::rows_view;
using linalg::view;

Conv3x3 Conv3x3::create(int in_channels, int out_channels, Rng& rng) {
    Conv3x3 c{in_channels, out_channels, Matrix(9 * in_channels, out_channels), Matrix(1, out_channels)};
    const double bound = 1.0 / std::sqrt(9.0 * in_channels);
    for (double& v : c.weight.data) v = rng.uniform(-bound, bound);
    for (double& v : c.bias.data) v = rng.uniform(-bound, bound);
    return c;
}

Tensor forward(const Conv3x3& conv, const Tensor& x, ConvCache* cache) {
    if (x.c != conv.in_channels) throw InvalidInput("conv input has the wrong channel count");
    const int h = x.h, w = x.w, cin = x.c;
    Matrix cols(h * w, 9 * cin);
    for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
            double* dst = &cols(y * w + xx, 0);
            for (int ky = 0; ky < 3; ++ky) {
                const int sy = y + ky - 1;
                for (int kx = 0; kx < 3; ++kx) {
                    const int sx = xx + kx - 1;
                    double* slot = dst + (ky * 3 + kx) * cin;
                    if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
                        std::fill_n(slot, cin, 0.0);
                    } else {
                        const double* src = &x.data[x.index(sy, sx, 0)];
                        std::copy_n(src, cin, slot);
                    }
                }
            }
        }
    }
    Tensor out(h, w, conv.out_channels);
    auto o = rows_view(out);
    o.noalias() = view(cols) * view(conv.weight);
    o.rowwise() += view(conv.bias).row(0);
    if (cache) {
        cache->columns = std::move(cols);
        cache->h = h;
        cache->w = w;
    }
    return out;
}

Tensor backward(const Conv3x3& conv, const ConvCache& cache, const Tensor& d_out, Matrix& d_weight, Matrix& d_bias,
                bool want_input_grad) {
    const auto dy = rows_view(d_out);
    view(d_weight).noalias() += view(cache.columns).transpose() * dy;
    view(d_bias).row(0) += dy.colwise().sum();
    if (!want_input_grad) return {};

    const int h = cache.h, w = cache.w, cin = conv.in_channels;
    linalg::RowMat d_cols = dy * view(conv.weight).transpose();
    Tensor dx(h, w, cin);
    for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
            const double* src = d_cols.data() + static_cast<std::size_t>(y * w + xx) * 9 * cin;
            for (int ky = 0; ky < 3; ++ky) {
                const int sy = y + ky - 1;
                if (sy < 0 || sy >= h) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const int sx = xx + kx - 1;
                    if (sx < 0 || sx >= w) continue;
                    double* dst = &dx.data[dx.index(sy, sx, 0)];
                    const double* slot = src + (ky * 3 + kx) * cin;
                    for (int ci = 0; ci < cin; ++ci) dst[ci] += slot[ci];
                }
            }
        }
    }
    return dx;
}

Tensor forward(const Linear& lin, const Tensor& x) {
    if (x.c != lin.weight.rows) throw InvalidInput("linear input has the wrong channel count");
    Tensor out(x.h, x.w, lin.weight.cols);
    auto o = rows_view(out);
    o.noalias() = rows_view(x) * view(lin.weight);
    o.rowwise() += view(lin.bias).row(0);
    return out;
}

Tensor backward(const Linear& lin, const Tensor& x, const Tensor& d_out, Matrix& d_weight, Matrix& d_bias) {
    const auto dy = rows_view(d_out);
    view(d_weight).noalias() += rows_view(x).transpose() * dy;
    view(d_bias).row(0) += dy.colwise().sum();
    Tensor dx(x.h, x.w, x.c);
    rows_view(dx).noalias() = dy * view(lin.weight).transpose();
    return dx;
}

void leaky_relu_inplace(Tensor& x, double slope) {
    for (double& v : x.data) {
        if (v < 0.0) v *= slope;
    }
}

void leaky_relu_backward_inplace(const Tensor& pre, Tensor& d_out, double slope) {
    for (std::size_t i = 0; i < pre.data.size(); ++i) {
        if (pre.data[i] < 0.0) d_out.data[i] *= slope;
    }
}

Tensor softmax_channels(const Tensor& logits) {
    Tensor p = logits;
    for (std::size_t base = 0; base < p.data.size(); base += p.c) {
        double* v = p.data.data() + base;
        const double mx = *std::max_element(v, v + p.c);
        double sum = 0.0;
        for (int k = 0; k < p.c; ++k) {
            v[k] = linalg::softmax_exp(v[k] - mx);
            sum += v[k];
        }
        for (int k = 0; k < p.c; ++k) v[k] /= sum;
    }
    return p;
}

Tensor softmax_channels_backward(const Tensor& probs, const Tensor& d_probs) {
    Tensor d(probs.h, probs.w, probs.c);
    for (std::size_t base = 0; base < probs.data.size(); base += probs.c) {
        double inner = 0.0;
        for (int k = 0; k < probs.c; ++k) inner += probs.data[base + k] * d_probs.data[base + k];
        for (int k = 0; k < probs.c; ++k) d.data[base + k] = probs.data[base + k] * (d_probs.data[base + k] - inner);
    }
    return d;
}

}  // namespace ahocda::layers
