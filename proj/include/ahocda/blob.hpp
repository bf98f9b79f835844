#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace ahocda::blob {

/// Binary checkpoint container: a single line of compact JSON terminated by
/// '\n', followed by raw little-endian f64 payload.
struct Blob {
    nlohmann::json header;
    std::vector<double> payload;
};

/// Writes atomically (temporary file + rename).
void write(const std::filesystem::path& path, const nlohmann::json& header,
           std::span<const std::span<const double>> arrays);

Blob read(const std::filesystem::path& path);

/// Sequential reader over Blob::payload.
class PayloadReader {
public:
    explicit PayloadReader(std::span<const double> payload) : data_(payload) {}
    /// Copies the next n values into out; throws IoError on underflow.
    void take(std::span<double> out);
    bool exhausted() const { return pos_ == data_.size(); }

private:
    std::span<const double> data_;
    std::size_t pos_ = 0;
};

/// Writes text atomically.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ahocda::blob
