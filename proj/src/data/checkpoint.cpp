// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "data/checkpoint.hpp"

#include "data/binary_io.hpp"

namespace sipm::data {

using nlohmann::json;

namespace {

void put_values(ByteWriter& w, const Tensor<float>& t) { w.put_bytes(t.ptr(), t.size() * 4); }

Tensor<float> get_values(ByteReader& r, const Shape& shape, const char* what) {
  Tensor<float> t(shape);
  r.get_bytes(t.ptr(), t.size() * 4, what);
  if (!t.all_finite()) r.fail(std::string("non-finite values in ") + what);
  return t;
}

json parse_json(ByteReader& r, const char* what) {
  const std::string text = r.get_string(what);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    r.fail(std::string("malformed ") + what + " (" + e.what() + ")");
  }
}

}  // namespace

std::vector<char> encode_checkpoint(const Checkpoint& c) {
  ByteWriter w;
  w.put_bytes(kCheckpointMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put_string(model::config_to_json(c.config).dump());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.params.size()));
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    const Tensor<float>& t = c.params.at(i);
    w.put_string(c.params.names()[i]);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    put_values(w, t);
  }
  w.put<std::uint8_t>(c.norm ? 1 : 0);
  if (c.norm) w.put_string(stats_to_json(*c.norm).dump());
  w.put<std::uint8_t>(c.optimizer ? 1 : 0);
  if (c.optimizer) {
    if (c.optimizer->m.size() != c.params.size() || c.optimizer->v.size() != c.params.size()) {
      throw ShapeError("checkpoint: optimizer state does not match the parameter list");
    }
    w.put<std::uint64_t>(c.optimizer->step);
    for (const auto& m : c.optimizer->m) put_values(w, m);
    for (const auto& v : c.optimizer->v) put_values(w, v);
  }
  w.put_string(c.meta.dump());
  return w.bytes();
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& source) {
  ByteReader r(bytes, source);
  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) r.fail("bad magic (expected SIPC)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  try {
    c.config = model::config_from_json(parse_json(r, "config"));
  } catch (const UsageError& e) {
    r.fail(std::string("invalid config: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string("tensor name");
    const auto ndim = r.get<std::uint32_t>("tensor rank");
    if (ndim == 0 || ndim > 4) r.fail("tensor '" + name + "' has rank " + std::to_string(ndim));
    Shape shape;
    for (std::uint32_t k = 0; k < ndim; ++k) shape.push_back(r.get<std::uint32_t>("tensor dim"));
    r.need(shape_size(shape) * 4, "tensor values");
    c.params.add(name, get_values(r, shape, "tensor values"));
  }
  if (r.get<std::uint8_t>("norm flag")) {
    try {
      c.norm = stats_from_json(parse_json(r, "norm stats"));
    } catch (const DataError& e) {
      r.fail(e.what());
    }
  }
  if (r.get<std::uint8_t>("optimizer flag")) {
    training::AdamState st;
    st.step = r.get<std::uint64_t>("optimizer step");
    for (std::size_t i = 0; i < c.params.size(); ++i) {
      st.m.push_back(get_values(r, c.params.at(i).shape(), "first moments"));
    }
    for (std::size_t i = 0; i < c.params.size(); ++i) {
      st.v.push_back(get_values(r, c.params.at(i).shape(), "second moments"));
    }
    c.optimizer = std::move(st);
  }
  c.meta = parse_json(r, "metadata");
  if (r.remaining() != 0) r.fail(std::to_string(r.remaining()) + " trailing bytes");
  // Shape check against the config.
  model::SipModel<float> check(c.config, c.params);
  c.params = std::move(check.params());
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

}  // namespace sipm::data
