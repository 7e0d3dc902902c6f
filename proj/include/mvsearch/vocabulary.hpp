#ifndef MVSEARCH_VOCABULARY_HPP
#define MVSEARCH_VOCABULARY_HPP

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mvsearch/binary_io.hpp"
#include "mvsearch/features.hpp"
#include "mvsearch/kmeans.hpp"

namespace mvs {

/// Per-channel visual vocabulary: k centroids in descriptor space.
struct Vocabulary {
  Channel channel = Channel::Corner;
  std::uint32_t k = 0;
  std::vector<float> centroids;  // k x 128
  std::uint64_t seed = 0;
  std::uint32_t iterations = 0;
  double distortion = 0.0;

  std::span<const float> centroid(std::size_t i) const {
    return std::span<const float>(centroids).subspan(i * kDescriptorDim, kDescriptorDim);
  }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

/// Raw visual-word counts: corner bins first, then blob bins.
struct BowHistogram {
  std::vector<std::uint32_t> bins;

  std::size_t size() const noexcept { return bins.size(); }
  std::uint64_t total() const noexcept {
    std::uint64_t t = 0;
    for (auto b : bins) t += b;
    return t;
  }

  friend bool operator==(const BowHistogram&, const BowHistogram&) = default;
};

inline Vocabulary train(std::span<const Descriptor> descriptors, std::size_t k, const KMeansConfig& cfg = {}) {
  if (descriptors.size() < k || descriptors.empty())
    throw Error(ErrorCode::TooFewDescriptors,
                std::to_string(descriptors.size()) + " descriptors for a vocabulary of " + std::to_string(k));
  const Channel channel = descriptors.front().channel;
  std::vector<float> data;
  data.reserve(descriptors.size() * kDescriptorDim);
  for (const auto& d : descriptors) {
    if (d.channel != channel) throw Error(ErrorCode::MixedChannels, "training descriptors mix corner and blob");
    data.insert(data.end(), d.values.begin(), d.values.end());
  }
  auto res = kmeans(data, kDescriptorDim, k, cfg);
  Vocabulary v;
  v.channel = channel;
  v.k = static_cast<std::uint32_t>(k);
  v.centroids = std::move(res.centroids);
  v.seed = cfg.seed;
  v.iterations = res.iterations;
  v.distortion = res.distortion;
  return v;
}

/// Uniform random subsample without replacement, keeping the original order.
inline std::vector<Descriptor> sample_for_training(std::span<const Descriptor> pool, std::size_t cap,
                                                   std::uint64_t seed) {
  if (pool.size() <= cap) return {pool.begin(), pool.end()};
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates with an explicit bounded draw so the result does not
  // depend on the standard library's distribution implementation.
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t span = idx.size() - i;
    const std::size_t j = i + static_cast<std::size_t>(detail::unit_uniform(rng) * static_cast<double>(span));
    std::swap(idx[i], idx[std::min(j, idx.size() - 1)]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<Descriptor> out;
  out.reserve(cap);
  for (auto i : idx) out.push_back(pool[i]);
  return out;
}

inline std::size_t quantize(const Descriptor& d, const Vocabulary& v) {
  if (d.channel != v.channel)
    throw Error(ErrorCode::ChannelMismatch, std::string(channel_name(d.channel)) + " descriptor against " +
                                                std::string(channel_name(v.channel)) + " vocabulary");
  return nearest_centroid(d.values, v.centroids, kDescriptorDim).index;
}

inline BowHistogram build_bow(const DescriptorSet& ds, const Vocabulary& corner_vocab, const Vocabulary& blob_vocab) {
  if (corner_vocab.channel != Channel::Corner || blob_vocab.channel != Channel::Blob)
    throw Error(ErrorCode::ChannelMismatch, "vocabulary pair must be (corner, blob)");
  BowHistogram h;
  h.bins.assign(static_cast<std::size_t>(corner_vocab.k) + blob_vocab.k, 0);
  for (const auto& d : ds.corner_descriptors) ++h.bins[quantize(d, corner_vocab)];
  for (const auto& d : ds.blob_descriptors) ++h.bins[corner_vocab.k + quantize(d, blob_vocab)];
  return h;
}

// "MVVC": magic[4] version:u16=1 channel:u8 k:u32 dim:u16=128 k*128 f32
//         seed:u64 iterations:u32 distortion:f64
inline constexpr std::string_view kVocabularyMagic = "MVVC";
inline constexpr std::uint16_t kVocabularyVersion = 1;

inline void write_vocabulary(ByteWriter& w, const Vocabulary& v) {
  w.raw(kVocabularyMagic);
  w.u16(kVocabularyVersion);
  w.u8(static_cast<std::uint8_t>(v.channel));
  w.u32(v.k);
  w.u16(static_cast<std::uint16_t>(kDescriptorDim));
  for (float c : v.centroids) w.f32(c);
  w.u64(v.seed);
  w.u32(v.iterations);
  w.f64(v.distortion);
}

inline Vocabulary read_vocabulary(ByteReader& r) {
  auto magic = r.take(kVocabularyMagic.size());
  if (!has_magic(magic, kVocabularyMagic)) throw Error(ErrorCode::BadMagic, "vocabulary block does not start with MVVC");
  const auto version = r.u16();
  if (version != kVocabularyVersion)
    throw Error(ErrorCode::BadVersion, "vocabulary format version " + std::to_string(version));
  Vocabulary v;
  const auto ch = r.u8();
  if (ch > 1) throw Error(ErrorCode::CorruptPayload, "bad vocabulary channel " + std::to_string(ch));
  v.channel = static_cast<Channel>(ch);
  v.k = r.u32();
  const auto dim = r.u16();
  if (dim != kDescriptorDim) throw Error(ErrorCode::CorruptPayload, "vocabulary dimension " + std::to_string(dim));
  if (v.k == 0 || r.remaining() / (kDescriptorDim * 4) < v.k)
    throw Error(ErrorCode::TruncatedPayload, "vocabulary declares " + std::to_string(v.k) + " centroids");
  v.centroids.resize(static_cast<std::size_t>(v.k) * kDescriptorDim);
  for (float& c : v.centroids) c = r.f32();
  v.seed = r.u64();
  v.iterations = r.u32();
  v.distortion = r.f64();
  return v;
}

inline Bytes encode_vocabulary(const Vocabulary& v) {
  ByteWriter w;
  write_vocabulary(w, v);
  return std::move(w).bytes();
}

inline Vocabulary decode_vocabulary(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  auto v = read_vocabulary(r);
  if (r.remaining() != 0) throw Error(ErrorCode::CorruptPayload, "trailing bytes after vocabulary");
  return v;
}

inline void save_vocabulary(const Vocabulary& v, const std::string& path) { write_file(path, encode_vocabulary(v)); }

inline Vocabulary load_vocabulary(const std::string& path) { return decode_vocabulary(read_file(path)); }

}  // namespace mvs

#endif  // MVSEARCH_VOCABULARY_HPP
