#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ahocda {

/// Dense row-major H x W x C tensor of doubles (channel-last).
struct Tensor {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int height, int width, int channels, double fill = 0.0)
        : h(height), w(width), c(channels),
          data(static_cast<std::size_t>(height) * width * channels, fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t index(int y, int x, int ch) const {
        return (static_cast<std::size_t>(y) * w + x) * c + ch;
    }
    double& at(int y, int x, int ch) { return data[index(y, x, ch)]; }
    double at(int y, int x, int ch) const { return data[index(y, x, ch)]; }

    /// The C-vector stored at one spatial location.
    std::span<double> pixel(int y, int x) {
        return {data.data() + index(y, x, 0), static_cast<std::size_t>(c)};
    }
    std::span<const double> pixel(int y, int x) const {
        return {data.data() + index(y, x, 0), static_cast<std::size_t>(c)};
    }

    bool same_shape(const Tensor& o) const { return h == o.h && w == o.w && c == o.c; }
    friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Per-pixel integer class ids, row-major H x W.
struct LabelMap {
    int h = 0;
    int w = 0;
    std::vector<int> data;

    LabelMap() = default;
    LabelMap(int height, int width, int fill = 0)
        : h(height), w(width), data(static_cast<std::size_t>(height) * width, fill) {}

    int& at(int y, int x) { return data[static_cast<std::size_t>(y) * w + x]; }
    int at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
    friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// Row-major dense matrix used for parameters.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::span<double> row(int r) { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
    std::span<const double> row(int r) const {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }
    friend bool operator==(const Matrix&, const Matrix&) = default;

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

}  // namespace ahocda
