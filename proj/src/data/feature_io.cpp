// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "data/feature_io.hpp"

#include <limits>

#include "data/binary_io.hpp"

namespace sipm::data {

template <typename S>
std::vector<char> encode_features(const Tensor<S>& feats) {
  if (feats.rank() != 3) {
    throw ShapeError("feature tensor must be L x T x D, got " + shape_str(feats.shape()));
  }
  for (std::size_t axis = 0; axis < 3; ++axis) {
    if (feats.dim(axis) == 0 || feats.dim(axis) > std::numeric_limits<std::uint32_t>::max()) {
      throw ShapeError("feature dims must be in [1, 2^32): " + shape_str(feats.shape()));
    }
  }
  if (!feats.all_finite()) throw DataError("refusing to write non-finite features");
  ByteWriter w;
  w.put_bytes(kFeatureMagic, 4);
  w.put<std::uint32_t>(kFeatureVersion);
  for (std::size_t axis = 0; axis < 3; ++axis) w.put<std::uint32_t>(feats.dim(axis));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sizeof(S) == 8 ? Precision::kF64 : Precision::kF32));
  w.put_bytes(feats.ptr(), feats.size() * sizeof(S));
  return w.bytes();
}

template <typename S>
void write_features(const std::filesystem::path& path, const Tensor<S>& feats) {
  write_file(path, encode_features(feats));
}

namespace {

FeatureHeader read_header(ByteReader& r) {
  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kFeatureMagic, 4) != 0) r.fail("bad magic (expected SIPF)");
  FeatureHeader h;
  h.version = r.get<std::uint32_t>("version");
  if (h.version != kFeatureVersion) {
    r.fail("unsupported feature format version " + std::to_string(h.version));
  }
  h.layers = r.get<std::uint32_t>("layer count");
  h.frames = r.get<std::uint32_t>("frame count");
  h.dim = r.get<std::uint32_t>("feature dim");
  const auto code = r.get<std::uint32_t>("precision code");
  if (code != 1 && code != 2) r.fail("unknown precision code " + std::to_string(code));
  h.precision = static_cast<Precision>(code);
  if (h.layers == 0 || h.frames == 0 || h.dim == 0) r.fail("zero dimension in header");
  return h;
}

}  // namespace

FeatureHeader decode_feature_header(const std::vector<char>& bytes, const std::string& source) {
  ByteReader r(bytes, source);
  return read_header(r);
}

template <typename S>
Tensor<S> decode_features(const std::vector<char>& bytes, const std::string& source) {
  ByteReader r(bytes, source);
  const FeatureHeader h = read_header(r);
  const std::size_t expected = h.payload_bytes();
  if (r.remaining() != expected) {
    r.fail("payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
           std::to_string(expected));
  }
  Tensor<S> out(Shape{h.layers, h.frames, h.dim});
  if (h.precision == Precision::kF32) {
    std::vector<float> tmp(out.size());
    r.get_bytes(tmp.data(), expected, "payload");
    for (std::size_t i = 0; i < tmp.size(); ++i) out[i] = static_cast<S>(tmp[i]);
  } else {
    std::vector<double> tmp(out.size());
    r.get_bytes(tmp.data(), expected, "payload");
    for (std::size_t i = 0; i < tmp.size(); ++i) out[i] = static_cast<S>(tmp[i]);
  }
  if (!out.all_finite()) throw DataError(source + ": non-finite feature values");
  return out;
}

template <typename S>
Tensor<S> read_features(const std::filesystem::path& path) {
  return decode_features<S>(read_file(path), path.string());
}

template std::vector<char> encode_features(const Tensor<float>&);
template std::vector<char> encode_features(const Tensor<double>&);
template void write_features(const std::filesystem::path&, const Tensor<float>&);
template void write_features(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> decode_features(const std::vector<char>&, const std::string&);
template Tensor<double> decode_features(const std::vector<char>&, const std::string&);
template Tensor<float> read_features(const std::filesystem::path&);
template Tensor<double> read_features(const std::filesystem::path&);

}  // namespace sipm::data
