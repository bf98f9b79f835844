#pragma once

#include <filesystem>

#include "ahocda/tensor.hpp"

namespace ahocda::io {

/// Reads an 8-bit PNG (gray, RGB or RGBA) or binary PPM/PGM and returns RGB
/// values scaled to [0, 1]. Gray inputs are replicated to three channels.
Tensor read_image(const std::filesystem::path& path);

/// Writes a 1- or 3-channel tensor as an 8-bit PNG, rounding clip(v)*255.
void write_png(const std::filesystem::path& path, const Tensor& pixels);

/// Writes a binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const Tensor& pixels);

/// Single-channel PNG whose gray value is the class id.
void write_label_png(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_label_png(const std::filesystem::path& path);

}  // namespace ahocda::io
