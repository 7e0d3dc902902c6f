#ifndef MVSEARCH_DESCRIPTOR_IO_HPP
#define MVSEARCH_DESCRIPTOR_IO_HPP

#include <filesystem>
#include <span>
#include <string>

#include "mvsearch/binary_io.hpp"
#include "mvsearch/features.hpp"

namespace mvs {

// "MVDS" file layout, little-endian:
//   magic[4] version:u16=1 channels:u16=2
//   per channel: tag:u8 (0 corner, 1 blob) count:u32 dim:u16=128 count*128 f32
// Trailing bytes are rejected.
inline constexpr std::string_view kDescriptorMagic = "MVDS";
inline constexpr std::uint16_t kDescriptorVersion = 1;

inline Bytes encode_descriptors(const DescriptorSet& ds) {
  ByteWriter w;
  w.raw(kDescriptorMagic);
  w.u16(kDescriptorVersion);
  w.u16(2);
  for (Channel ch : {Channel::Corner, Channel::Blob}) {
    const auto& list = ch == Channel::Corner ? ds.corner_descriptors : ds.blob_descriptors;
    w.u8(static_cast<std::uint8_t>(ch));
    w.u32(static_cast<std::uint32_t>(list.size()));
    w.u16(static_cast<std::uint16_t>(kDescriptorDim));
    for (const auto& d : list)
      for (float v : d.values) w.f32(v);
  }
  return std::move(w).bytes();
}

inline bool is_descriptor_payload(std::span<const std::uint8_t> data) noexcept {
  return has_magic(data, kDescriptorMagic);
}

inline DescriptorSet decode_descriptors(std::span<const std::uint8_t> data, std::string image_id = {}) {
  if (!is_descriptor_payload(data)) throw Error(ErrorCode::BadMagic, "descriptor payload does not start with MVDS");
  ByteReader r(data.subspan(kDescriptorMagic.size()), ErrorCode::TruncatedPayload);
  const auto version = r.u16();
  if (version != kDescriptorVersion)
    throw Error(ErrorCode::BadVersion, "descriptor format version " + std::to_string(version));
  const auto channels = r.u16();
  if (channels != 2) throw Error(ErrorCode::CorruptPayload, "expected 2 channels, got " + std::to_string(channels));

  DescriptorSet ds;
  ds.image_id = std::move(image_id);
  bool seen[2] = {false, false};
  for (int c = 0; c < 2; ++c) {
    const auto tag = r.u8();
    if (tag > 1 || seen[tag]) throw Error(ErrorCode::CorruptPayload, "bad channel tag " + std::to_string(tag));
    seen[tag] = true;
    const auto count = r.u32();
    const auto dim = r.u16();
    if (dim != kDescriptorDim) throw Error(ErrorCode::CorruptPayload, "descriptor dimension " + std::to_string(dim));
    if (r.remaining() / (kDescriptorDim * 4) < count)
      throw Error(ErrorCode::TruncatedPayload, "channel declares " + std::to_string(count) + " descriptors");
    auto& list = tag == 0 ? ds.corner_descriptors : ds.blob_descriptors;
    list.resize(count);
    for (auto& d : list) {
      d.channel = static_cast<Channel>(tag);
      for (float& v : d.values) v = r.f32();
    }
  }
  if (r.remaining() != 0)
    throw Error(ErrorCode::CorruptPayload, std::to_string(r.remaining()) + " trailing bytes after payload");
  return ds;
}

inline void save_descriptors(const DescriptorSet& ds, const std::string& path) {
  write_file(path, encode_descriptors(ds));
}

/// The image id of the loaded set is the file stem.
inline DescriptorSet load_descriptors(const std::string& path) {
  const Bytes data = read_file(path);
  return decode_descriptors(data, std::filesystem::path(path).stem().string());
}

/// Image bytes are decoded and run through `extract`; MVDS bytes are decoded
/// as-is. Anything else is a malformed payload.
inline DescriptorSet descriptors_from_payload(std::span<const std::uint8_t> data, const DetectorConfig& cfg = {},
                                              std::string image_id = {}) {
  if (is_descriptor_payload(data)) {
    try {
      return decode_descriptors(data, std::move(image_id));
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedPayload, e.what());
    }
  }
  if (looks_like_image(data)) {
    GrayImage img;
    try {
      img = decode_image(data);
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedPayload, e.what());
    }
    return extract(img, cfg, std::move(image_id));
  }
  throw Error(ErrorCode::MalformedPayload, "payload is neither an image nor an MVDS descriptor file");
}

inline DescriptorSet descriptors_from_file(const std::string& path, const DetectorConfig& cfg = {}) {
  const Bytes data = read_file(path);
  return descriptors_from_payload(data, cfg, std::filesystem::path(path).stem().string());
}

}  // namespace mvs

#endif  // MVSEARCH_DESCRIPTOR_IO_HPP
