#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fpe/error.hpp"
#include "fpe/pipeline.hpp"

namespace fpe::pipeline {

namespace {

constexpr char kMagic[4] = {'F', 'P', 'T', '1'};
constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const TensorRecord& t) {
  require(t.values.size() == t.channels * t.height * t.width, "tensor values do not match its shape");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * t.values.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(t.channels));
  put_u32(out, static_cast<std::uint32_t>(t.height));
  put_u32(out, static_cast<std::uint32_t>(t.width));
  if constexpr (std::endian::native == std::endian::little) {
    out.resize(kHeaderBytes + 4 * t.values.size());
    std::memcpy(out.data() + kHeaderBytes, t.values.data(), 4 * t.values.size());
  } else {
    for (const float f : t.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

TensorRecord decode_tensor(std::span<const std::uint8_t> bytes, std::string image_id) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::Format, "not a .t32 tensor");
  }
  TensorRecord t;
  t.image_id = std::move(image_id);
  t.channels = get_u32(bytes, 4);
  t.height = get_u32(bytes, 8);
  t.width = get_u32(bytes, 12);
  const std::size_t count = t.channels * t.height * t.width;
  if (bytes.size() != kHeaderBytes + 4 * count) fail(ErrorKind::Format, ".t32 payload length does not match header");
  t.values.resize(count);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(t.values.data(), bytes.data() + kHeaderBytes, 4 * count);
  } else {
    for (std::size_t i = 0; i < count; ++i) t.values[i] = std::bit_cast<float>(get_u32(bytes, kHeaderBytes + 4 * i));
  }
  return t;
}

void write_tensor(const TensorRecord& tensor, const std::filesystem::path& path) {
  imaging::write_file_atomic(path, encode_tensor(tensor));
}

TensorRecord read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes, path.stem().string());
}

}  // namespace fpe::pipeline
