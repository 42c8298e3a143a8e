#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "churn/error.hpp"

namespace churn {

/// Little-endian binary encoder. Doubles are written as their IEEE-754 bit
/// pattern so a round trip is bit-identical.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void f64s(std::span<const double> values) {
    u64(values.size());
    for (double v : values) f64(v);
  }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  template <typename T>
  void put(T v) {
    for (std::size_t k = 0; k < sizeof(T); ++k) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() {
    const std::uint64_t bits = get<std::uint64_t>();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<double> f64s() {
    const std::uint64_t n = u64();
    need(n * 8);
    std::vector<double> out(n);
    for (auto& v : out) v = f64();
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CorruptModel("model payload ends unexpectedly");
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(bytes_[pos_ + k]) << (8 * k);
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

/// Payload kinds carried by the shared model-file envelope.
enum class ModelKind : std::uint8_t { forest = 1, partial = 2, cox = 3, km = 4 };

inline constexpr std::uint32_t kFormatVersion = 1;

/// Envelope layout: magic "CHSV", u32 version, u8 kind, u64 payload length,
/// payload bytes, u32 CRC-32 of everything preceding it.
std::vector<std::uint8_t> wrap_envelope(ModelKind kind, std::span<const std::uint8_t> payload);

struct Envelope {
  ModelKind kind;
  std::vector<std::uint8_t> payload;
};

/// Throws CorruptModel on bad magic, length or checksum; version mismatch
/// is reported separately.
Envelope unwrap_envelope(std::span<const std::uint8_t> file);

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace churn
