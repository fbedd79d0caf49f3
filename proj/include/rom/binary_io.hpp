#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rom::io {

/// Little-endian serializer used by every binary container (ROMF, ROMS, ROMB, ROMW).
class ByteWriter {
public:
    void magic(std::string_view four_cc);
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void f64s(std::span<const double> v);
    void bytes(std::string_view s);

    const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader. Running past the end raises CorruptError("truncated ...").
class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> data, std::string context);

    void expect_magic(std::string_view four_cc);
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::vector<double> f64s(std::size_t count);
    std::string bytes(std::size_t count);

    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    const std::string& context() const noexcept { return context_; }

private:
    void need(std::size_t n) const;

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
    std::string context_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Lowercase hex SHA-256 of a byte range / file.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Multiplies sizes, failing with CorruptError on u64 overflow.
std::uint64_t checked_product(std::span<const std::uint64_t> factors, const std::string& context);

}  // namespace rom::io
