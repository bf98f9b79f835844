#include "ahocda/spectrum.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "ahocda/error.hpp"

namespace ahocda::spectrum {
namespace {

void fft_pow2(std::span<cplx> a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        for (std::size_t k = 0; k < half; ++k) {
            // Twiddles are evaluated directly rather than by recurrence to keep
            // rounding error at O(eps log n).
            const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
            const cplx wk(std::cos(ang), std::sin(ang));
            for (std::size_t i = k; i < n; i += len) {
                const cplx u = a[i];
                const cplx v = a[i + half] * wk;
                a[i] = u + v;
                a[i + half] = u - v;
            }
        }
    }
}

void fft_bluestein(std::span<cplx> x, bool inverse) {
    const std::size_t n = x.size();
    const std::size_t m = std::bit_ceil(2 * n - 1);
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<cplx> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the angle argument small for accuracy.
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang = sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> a(m), b(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
    b[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);
    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
    fft_pow2(a, true);
    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * scale * chirp[k];
}

void check_finite(const Tensor& pixels) {
    if (pixels.h < 2 || pixels.w < 2) throw InvalidInput("fft2 needs an image of at least 2x2");
    for (double v : pixels.data) {
        if (!std::isfinite(v)) throw InvalidInput("fft2: non-finite pixel value");
    }
}

// Applies fft1d along both axes of every channel of a row-major H x W x C buffer.
void transform2d(std::vector<cplx>& buf, int h, int w, int c, bool inverse) {
    std::vector<cplx> line(static_cast<std::size_t>(std::max(h, w)));
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            std::span<cplx> row(line.data(), static_cast<std::size_t>(w));
            for (int x = 0; x < w; ++x) row[x] = buf[(static_cast<std::size_t>(y) * w + x) * c + ch];
            fft1d(row, inverse);
            for (int x = 0; x < w; ++x) buf[(static_cast<std::size_t>(y) * w + x) * c + ch] = row[x];
        }
        for (int x = 0; x < w; ++x) {
            std::span<cplx> col(line.data(), static_cast<std::size_t>(h));
            for (int y = 0; y < h; ++y) col[y] = buf[(static_cast<std::size_t>(y) * w + x) * c + ch];
            fft1d(col, inverse);
            for (int y = 0; y < h; ++y) buf[(static_cast<std::size_t>(y) * w + x) * c + ch] = col[y];
        }
    }
}

}  // namespace

void fft1d(std::span<cplx> x, bool inverse) {
    const std::size_t n = x.size();
    if (n <= 1) return;
    if (std::has_single_bit(n)) {
        fft_pow2(x, inverse);
    } else {
        fft_bluestein(x, inverse);
    }
}

Spectrum fft2(const Image& image) { return fft2(image.pixels); }

Spectrum fft2(const Tensor& pixels) {
    check_finite(pixels);
    const int h = pixels.h, w = pixels.w, c = pixels.c;
    std::vector<cplx> buf(pixels.data.begin(), pixels.data.end());
    transform2d(buf, h, w, c, false);

    Spectrum s{h, w, c, std::vector<cplx>(buf.size())};
    const int oy = h / 2, ox = w / 2;
    for (int y = 0; y < h; ++y) {
        const int sy = (y + oy) % h;
        for (int x = 0; x < w; ++x) {
            const int sx = (x + ox) % w;
            for (int ch = 0; ch < c; ++ch) {
                s.data[(static_cast<std::size_t>(sy) * w + sx) * c + ch] = buf[(static_cast<std::size_t>(y) * w + x) * c + ch];
            }
        }
    }
    return s;
}

Tensor inverse_fft2(const Spectrum& s) {
    const int h = s.h, w = s.w, c = s.c;
    std::vector<cplx> buf(s.data.size());
    const int oy = h / 2, ox = w / 2;
    for (int y = 0; y < h; ++y) {
        const int sy = (y + oy) % h;
        for (int x = 0; x < w; ++x) {
            const int sx = (x + ox) % w;
            for (int ch = 0; ch < c; ++ch) {
                buf[(static_cast<std::size_t>(y) * w + x) * c + ch] = s.data[(static_cast<std::size_t>(sy) * w + sx) * c + ch];
            }
        }
    }
    transform2d(buf, h, w, c, true);
    Tensor out(h, w, c);
    const double scale = 1.0 / (static_cast<double>(h) * w);
    for (std::size_t i = 0; i < buf.size(); ++i) out.data[i] = buf[i].real() * scale;
    return out;
}

Tensor amplitude(const Spectrum& s) {
    Tensor out(s.h, s.w, s.c);
    for (std::size_t i = 0; i < s.data.size(); ++i) out.data[i] = std::abs(s.data[i]);
    return out;
}

int crop_extent(int n, double beta) {
    // The epsilon absorbs products such as 0.09 * 100 landing just below an integer.
    const int e = static_cast<int>(std::floor(beta * n + 1e-9));
    return std::clamp(e, 1, n);
}

int crop_start(int n, int extent) { return n / 2 - extent / 2; }

AmplitudeCrop amplitude_crop(const Spectrum& s, double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("beta must lie in (0, 1], got " + std::to_string(beta));
    const int hc = crop_extent(s.h, beta);
    const int wc = crop_extent(s.w, beta);
    const int y0 = crop_start(s.h, hc);
    const int x0 = crop_start(s.w, wc);
    AmplitudeCrop crop{Tensor(hc, wc, s.c), beta};
    for (int y = 0; y < hc; ++y) {
        for (int x = 0; x < wc; ++x) {
            for (int ch = 0; ch < s.c; ++ch) crop.values.at(y, x, ch) = std::abs(s.at(y0 + y, x0 + x, ch));
        }
    }
    return crop;
}

SourceAmplitudeProfile source_profile(std::span<const Image> images, double beta) {
    if (images.empty()) throw ParameterError("source_profile needs at least one image");
    if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("beta must lie in (0, 1], got " + std::to_string(beta));
    const Tensor& first = images.front().pixels;
    SourceAmplitudeProfile profile;
    profile.beta = beta;
    profile.image_h = first.h;
    profile.image_w = first.w;
    profile.n_source = static_cast<int>(images.size());
    for (const Image& img : images) {
        if (!img.pixels.same_shape(first)) throw InvalidInput("source_profile: images have mismatched shapes");
        AmplitudeCrop crop = amplitude_crop(fft2(img), beta);
        if (profile.mean_crop.size() == 0) {
            profile.mean_crop = std::move(crop.values);
        } else {
            for (std::size_t i = 0; i < crop.values.size(); ++i) profile.mean_crop.data[i] += crop.values.data[i];
        }
    }
    if (images.size() > 1) {
        const double inv = 1.0 / static_cast<double>(images.size());
        for (double& v : profile.mean_crop.data) v *= inv;
    }
    return profile;
}

double domain_distance(const AmplitudeCrop& crop, const SourceAmplitudeProfile& profile) {
    if (!crop.values.same_shape(profile.mean_crop)) throw InvalidInput("domain_distance: crop shape does not match profile");
    double acc = 0.0;
    for (std::size_t i = 0; i < crop.values.size(); ++i) {
        const double d = profile.mean_crop.data[i] - crop.values.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(crop.values.size());
}

double domain_distance(const Image& image, const SourceAmplitudeProfile& profile) {
    if (image.height() != profile.image_h || image.width() != profile.image_w ||
        image.channels() != profile.mean_crop.c) {
        throw InvalidInput("domain_distance: image shape is incompatible with the source profile");
    }
    return domain_distance(amplitude_crop(fft2(image), profile.beta), profile);
}

}  // namespace ahocda::spectrum
