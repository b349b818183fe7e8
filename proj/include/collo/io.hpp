#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace collo {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);

/// Shortest text that parses back to the same double.
std::string format_double(double value);

/// Little-endian binary encoder.
class ByteWriter {
public:
    void magic(std::string_view tag);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);
    void bytes(std::span<const std::uint8_t> data);
    void string(std::string_view text);  // u32 length prefix

    const std::vector<std::uint8_t>& data() const { return buf_; }
    void save(const std::filesystem::path& path) const { write_file_bytes(path, buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

/// Little-endian binary decoder; every read past the end throws the error
/// code given at construction.
class ByteReader {
public:
    ByteReader(std::vector<std::uint8_t> data, std::string source);

    bool magic(std::string_view tag);
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    std::string string();

    std::size_t remaining() const { return data_.size() - pos_; }

private:
    const std::uint8_t* take(std::size_t count);

    std::vector<std::uint8_t> data_;
    std::size_t pos_ = 0;
    std::string source_;
};

}  // namespace collo
