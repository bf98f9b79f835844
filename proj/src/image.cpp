#include "ahocda/image.hpp"

#include <algorithm>
#include <cmath>

#include "ahocda/error.hpp"

namespace ahocda {

void validate(const Image& image, int num_classes) {
    const Tensor& p = image.pixels;
    if (p.h < 2 || p.w < 2 || p.c < 1) {
        throw InvalidInput("image must be at least 2x2 with one channel, got " + std::to_string(p.h) + "x" +
                           std::to_string(p.w) + "x" + std::to_string(p.c));
    }
    if (p.data.size() != static_cast<std::size_t>(p.h) * p.w * p.c) {
        throw InvalidInput("image buffer size does not match its shape");
    }
    for (double v : p.data) {
        if (!std::isfinite(v)) throw InvalidInput("image contains a non-finite pixel value");
    }
    if (image.labels) {
        const LabelMap& l = *image.labels;
        if (l.h != p.h || l.w != p.w) throw InvalidInput("label map size does not match image size");
        for (int id : l.data) {
            if (id < 0 || (num_classes >= 0 && id >= num_classes)) {
                throw InvalidInput("label id " + std::to_string(id) + " out of range");
            }
        }
    }
}

Tensor resize_bilinear(const Tensor& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ParameterError("resize target must be positive");
    if (out_h == src.h && out_w == src.w) return src;
    Tensor dst(out_h, out_w, src.c);
    const double sy = static_cast<double>(src.h) / out_h;
    const double sx = static_cast<double>(src.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.h - 1));
        int y0 = static_cast<int>(fy);
        int y1 = std::min(y0 + 1, src.h - 1);
        double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.w - 1));
            int x0 = static_cast<int>(fx);
            int x1 = std::min(x0 + 1, src.w - 1);
            double wx = fx - x0;
            for (int ch = 0; ch < src.c; ++ch) {
                double top = src.at(y0, x0, ch) * (1 - wx) + src.at(y0, x1, ch) * wx;
                double bot = src.at(y1, x0, ch) * (1 - wx) + src.at(y1, x1, ch) * wx;
                dst.at(y, x, ch) = top * (1 - wy) + bot * wy;
            }
        }
    }
    return dst;
}

LabelMap resize_nearest(const LabelMap& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ParameterError("resize target must be positive");
    if (out_h == src.h && out_w == src.w) return src;
    LabelMap dst(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        int sy = std::min(static_cast<int>((y + 0.5) * src.h / out_h), src.h - 1);
        for (int x = 0; x < out_w; ++x) {
            int sx = std::min(static_cast<int>((x + 0.5) * src.w / out_w), src.w - 1);
            dst.at(y, x) = src.at(sy, sx);
        }
    }
    return dst;
}

Image resize(const Image& image, int out_h, int out_w) {
    Image out;
    out.pixels = resize_bilinear(image.pixels, out_h, out_w);
    if (image.labels) out.labels = resize_nearest(*image.labels, out_h, out_w);
    out.domain_tag = image.domain_tag;
    return out;
}

}  // namespace ahocda
