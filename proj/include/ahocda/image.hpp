#pragma once

#include <optional>
#include <string>

#include "ahocda/tensor.hpp"

namespace ahocda {

/// An H x W x C raster in [0, 1] with optional per-pixel class ids.
struct Image {
    Tensor pixels;
    std::optional<LabelMap> labels;
    /// Free-form tag for diagnostics. Algorithms never read it.
    std::string domain_tag;

    int height() const { return pixels.h; }
    int width() const { return pixels.w; }
    int channels() const { return pixels.c; }
};

/// Throws InvalidInput unless H, W >= 2, every pixel is finite and labels (when
/// present) match the raster size and lie in [0, num_classes). A negative
/// num_classes skips the label range check.
void validate(const Image& image, int num_classes = -1);

/// Bilinear resampling with half-pixel centers.
Tensor resize_bilinear(const Tensor& src, int out_h, int out_w);

/// Nearest-neighbour resampling for label maps.
LabelMap resize_nearest(const LabelMap& src, int out_h, int out_w);

/// Resizes pixels (bilinear) and labels (nearest) together.
Image resize(const Image& image, int out_h, int out_w);

}  // namespace ahocda
