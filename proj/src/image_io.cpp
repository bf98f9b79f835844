#include "ahocda/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ahocda/error.hpp"

namespace ahocda::io {
namespace {

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Reads the next whitespace-delimited token of a PNM header, skipping comments.
std::string pnm_token(std::istream& in) {
    std::string tok;
    char ch;
    while (in.get(ch)) {
        if (ch == '#') {
            std::string skip;
            std::getline(in, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(ch);
    }
    return tok;
}

Tensor read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::string magic = pnm_token(in);
    if (magic != "P6" && magic != "P5") throw IoError("unsupported PNM variant in " + path.string());
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(pnm_token(in));
        h = std::stoi(pnm_token(in));
        maxval = std::stoi(pnm_token(in));
    } catch (const std::exception&) {
        throw IoError("malformed PNM header in " + path.string());
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
        throw IoError("only 8-bit PNM files are supported: " + path.string());
    }
    const int src_c = magic == "P6" ? 3 : 1;
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * src_c);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw IoError("truncated PNM data in " + path.string());
    Tensor t(h, w, 3);
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            t.data[i * 3 + ch] = buf[i * src_c + (src_c == 3 ? ch : 0)] / static_cast<double>(maxval);
        }
    }
    return t;
}

std::vector<std::uint8_t> read_png_raw(const std::filesystem::path& path, png_uint_32 format, int& h, int& w) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw IoError("cannot read PNG " + path.string() + ": " + img.message);
    }
    img.format = format;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&img);
        throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
    }
    h = static_cast<int>(img.height);
    w = static_cast<int>(img.width);
    return buf;
}

void write_png_raw(const std::filesystem::path& path, const std::vector<std::uint8_t>& buf, int h, int w,
                   png_uint_32 format) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = format;
    if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
        throw IoError("cannot write PNG " + path.string() + ": " + img.message);
    }
}

}  // namespace

Tensor read_image(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return read_pnm(path);
    int h = 0, w = 0;
    auto buf = read_png_raw(path, PNG_FORMAT_RGB, h, w);
    Tensor t(h, w, 3);
    std::transform(buf.begin(), buf.end(), t.data.begin(), [](std::uint8_t b) { return b / 255.0; });
    return t;
}

void write_png(const std::filesystem::path& path, const Tensor& pixels) {
    if (pixels.c != 1 && pixels.c != 3) throw InvalidInput("PNG output needs 1 or 3 channels");
    std::vector<std::uint8_t> buf(pixels.size());
    std::transform(pixels.data.begin(), pixels.data.end(), buf.begin(), to_byte);
    write_png_raw(path, buf, pixels.h, pixels.w, pixels.c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY);
}

void write_ppm(const std::filesystem::path& path, const Tensor& pixels) {
    if (pixels.c != 3) throw InvalidInput("PPM output needs 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P6\n" << pixels.w << ' ' << pixels.h << "\n255\n";
    for (double v : pixels.data) out.put(static_cast<char>(to_byte(v)));
    if (!out) throw IoError("write failed for " + path.string());
}

void write_label_png(const std::filesystem::path& path, const LabelMap& labels) {
    std::vector<std::uint8_t> buf(labels.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i) {
        if (labels.data[i] < 0 || labels.data[i] > 255) throw InvalidInput("label id does not fit in 8 bits");
        buf[i] = static_cast<std::uint8_t>(labels.data[i]);
    }
    write_png_raw(path, buf, labels.h, labels.w, PNG_FORMAT_GRAY);
}

LabelMap read_label_png(const std::filesystem::path& path) {
    int h = 0, w = 0;
    auto buf = read_png_raw(path, PNG_FORMAT_GRAY, h, w);
    LabelMap l(h, w);
    std::copy(buf.begin(), buf.end(), l.data.begin());
    return l;
}

}  // namespace ahocda::io
