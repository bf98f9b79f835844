#include "ahocda/blob.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>

#include "ahocda/error.hpp"

namespace ahocda::blob {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

std::filesystem::path temp_path(const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp";
    return tmp;
}

void commit(const std::filesystem::path& tmp, const std::filesystem::path& path) {
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move " + tmp.string() + " to " + path.string());
    }
}

}  // namespace

void write(const std::filesystem::path& path, const nlohmann::json& header,
           std::span<const std::span<const double>> arrays) {
    const auto tmp = temp_path(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << header.dump() << '\n';
        for (auto a : arrays) {
            out.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size_bytes()));
        }
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    commit(tmp, path);
}

Blob read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty checkpoint " + path.string());
    Blob b;
    try {
        b.header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad checkpoint header in " + path.string() + ": " + e.what());
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % sizeof(double) != 0) throw IoError("checkpoint payload is truncated: " + path.string());
    b.payload.resize(bytes.size() / sizeof(double));
    std::copy(bytes.begin(), bytes.end(), reinterpret_cast<char*>(b.payload.data()));
    return b;
}

void PayloadReader::take(std::span<double> out) {
    if (data_.size() - pos_ < out.size()) throw IoError("checkpoint payload is shorter than its header declares");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(pos_), out.size(), out.begin());
    pos_ += out.size();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = temp_path(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << text;
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    commit(tmp, path);
}

}  // namespace ahocda::blob
