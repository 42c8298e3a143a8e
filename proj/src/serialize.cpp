#include "churn/serialize.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>

namespace churn {

namespace {

constexpr char kMagic[4] = {'C', 'H', 'S', 'V'};

std::uint32_t crc(std::span<const std::uint8_t> bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large models.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    c = crc32(c, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(c);
}

}  // namespace

std::vector<std::uint8_t> wrap_envelope(ModelKind kind, std::span<const std::uint8_t> payload) {
  ByteWriter w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(kind));
  w.u64(payload.size());
  auto bytes = w.take();
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  const std::uint32_t sum = crc(bytes);
  for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<std::uint8_t>(sum >> (8 * k)));
  return bytes;
}

Envelope unwrap_envelope(std::span<const std::uint8_t> file) {
  constexpr std::size_t header = 4 + 4 + 1 + 8;
  if (file.size() < header + 4) throw CorruptModel("model file is truncated");
  for (int k = 0; k < 4; ++k)
    if (file[k] != static_cast<std::uint8_t>(kMagic[k])) throw CorruptModel("not a churn model file");
  ByteReader r(file.subspan(4, header - 4));
  const std::uint32_t version = r.u32();
  const auto kind = static_cast<ModelKind>(r.u8());
  const std::uint64_t length = r.u64();
  if (file.size() - header - 4 != length)
    throw CorruptModel("model file length does not match its header (truncated or padded)");
  const std::size_t body = header + length;
  std::uint32_t stored = 0;
  for (int k = 0; k < 4; ++k) stored |= static_cast<std::uint32_t>(file[body + k]) << (8 * k);
  if (crc(file.first(body)) != stored) throw CorruptModel("model file checksum mismatch");
  if (version != kFormatVersion)
    throw CorruptModel("unsupported model format version " + std::to_string(version) +
                       " (expected " + std::to_string(kFormatVersion) + ")");
  const auto k = static_cast<std::uint8_t>(kind);
  if (k < 1 || k > 4) throw CorruptModel("unknown model kind " + std::to_string(k));
  Envelope env{kind, std::vector<std::uint8_t>(file.begin() + header, file.begin() + body)};
  return env;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace churn
