#pragma once

#include <complex>
#include <span>
#include <vector>

#include "ahocda/image.hpp"
#include "ahocda/tensor.hpp"

namespace ahocda::spectrum {

using cplx = std::complex<double>;

/// Per-channel 2-D DFT, center-shifted: bin (H/2, W/2) (floored) holds the
/// zero frequency. Layout matches Tensor (row-major, channel-last).
struct Spectrum {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<cplx> data;

    cplx at(int y, int x, int ch) const { return data[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
};

/// Centered low-frequency window of |F(x)|.
struct AmplitudeCrop {
    Tensor values;
    double beta = 1.0;
};

/// Elementwise mean of the source crops.
struct SourceAmplitudeProfile {
    Tensor mean_crop;
    int n_source = 0;
    double beta = 1.0;
    /// Spatial size of the images the profile was built from.
    int image_h = 0;
    int image_w = 0;
};

/// In-place 1-D DFT of any length. Powers of two use iterative radix-2;
/// other lengths go through Bluestein's chirp-z with a radix-2 convolution.
/// The inverse is unnormalized.
void fft1d(std::span<cplx> x, bool inverse = false);

/// Forward transform with center shift. Throws InvalidInput on non-finite
/// pixels or images smaller than 2x2.
Spectrum fft2(const Image& image);
Spectrum fft2(const Tensor& pixels);

/// Undoes the shift and applies the normalized inverse DFT; returns the real part.
Tensor inverse_fft2(const Spectrum& spectrum);

/// Full elementwise magnitude.
Tensor amplitude(const Spectrum& spectrum);

/// Crop extent for one axis: max(1, floor(beta * n)).
int crop_extent(int n, double beta);

/// First index of the crop window along an axis of length n.
int crop_start(int n, int extent);

/// Throws ParameterError unless 0 < beta <= 1.
AmplitudeCrop amplitude_crop(const Spectrum& spectrum, double beta);

/// Throws ParameterError on an empty list, InvalidInput on mixed shapes.
SourceAmplitudeProfile source_profile(std::span<const Image> images, double beta);

/// Mean over crop elements of (M_s - F_beta)^2.
double domain_distance(const Image& image, const SourceAmplitudeProfile& profile);
double domain_distance(const AmplitudeCrop& crop, const SourceAmplitudeProfile& profile);

}  // namespace ahocda::spectrum
