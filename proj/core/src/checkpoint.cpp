// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "segravir/error.hpp"

namespace segravir {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'G', 'R', 'A', 'V', 'I', 'R'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { little_endian(v, 4); }
  void u64(std::uint64_t v) { little_endian(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + size);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void little_endian(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_.push_back((v >> (8 * i)) & 0xff);
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end,
         const std::string& origin)
      : bytes_(bytes), end_(end), origin_(origin) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() { return static_cast<std::uint32_t>(little_endian(4)); }
  std::uint64_t u64() { return little_endian(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    const std::uint8_t* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  std::size_t remaining() const { return end_ - pos_; }
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("checkpoint " + origin_ + ": " + what);
  }

 private:
  const std::uint8_t* take(std::size_t n) {
    if (n > remaining()) fail("truncated at byte " + std::to_string(pos_));
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint64_t little_endian(int width) {
    const std::uint8_t* p = take(width);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
  std::string origin_;
};

struct Record {
  Shape shape;
  const std::vector<double>* values;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& model) {
  std::map<std::string, Record> records;
  for (const auto& [name, t] : model.parameters()) {
    records[name] = Record{t.shape(), &t.node()->data};
  }
  for (const auto& [name, stats] : model.bn_stats()) {
    records[name + ".running_mean"] =
        Record{{stats.running_mean.size()}, &stats.running_mean};
    records[name + ".running_var"] =
        Record{{stats.running_var.size()}, &stats.running_var};
  }

  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  const ModelConfig& c = model.config();
  w.u32(static_cast<std::uint32_t>(c.input_channels));
  w.u32(static_cast<std::uint32_t>(c.base_channels));
  w.u32(static_cast<std::uint32_t>(c.num_resolutions));
  w.u32(static_cast<std::uint32_t>(c.num_classes));
  w.f64(c.dropout_rate);
  w.u8(c.aux_enabled ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& [name, rec] : records) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(rec.shape.size()));
    for (std::size_t d : rec.shape) w.u64(d);
    for (double v : *rec.values) w.f64(v);
  }
  w.u64(fnv1a(w.bytes().data(), w.bytes().size()));
  return std::move(w.bytes());
}

Model deserialize_model(const std::vector<std::uint8_t>& bytes,
                        const std::string& origin) {
  if (bytes.size() < sizeof(kMagic) + 8) {
    throw DataError("checkpoint " + origin + ": truncated (" +
                    std::to_string(bytes.size()) + " bytes)");
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("checkpoint " + origin + ": bad magic");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored_hash = 0;
  for (int i = 0; i < 8; ++i) {
    stored_hash |= static_cast<std::uint64_t>(bytes[body + i]) << (8 * i);
  }

  Reader r(bytes, body, origin);
  r.str(sizeof(kMagic));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(version));
  }
  ModelConfig config;
  config.input_channels = static_cast<int>(r.u32());
  config.base_channels = static_cast<int>(r.u32());
  config.num_resolutions = static_cast<int>(r.u32());
  config.num_classes = static_cast<int>(r.u32());
  config.dropout_rate = r.f64();
  config.aux_enabled = r.u8() != 0;

  Model model;
  try {
    model = make_model_skeleton(config);
  } catch (const InvalidArgument& e) {
    r.fail(std::string("invalid config block: ") + e.what());
  }

  std::map<std::string, std::vector<double>*> slots;
  for (auto& [name, t] : model.parameters()) slots[name] = &t.node()->data;
  for (auto& [name, stats] : model.bn_stats()) {
    slots[name + ".running_mean"] = &stats.running_mean;
    slots[name + ".running_var"] = &stats.running_var;
  }

  const std::uint32_t count = r.u32();
  if (count != slots.size()) {
    r.fail("expected " + std::to_string(slots.size()) + " records, found " +
           std::to_string(count));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_length = r.u32();
    if (name_length > r.remaining()) r.fail("truncated record name");
    const std::string name = r.str(name_length);
    auto it = slots.find(name);
    if (it == slots.end()) r.fail("unexpected record '" + name + "'");
    const std::uint32_t rank = r.u32();
    if (rank > 8) r.fail("record '" + name + "' has implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    std::vector<double>& slot = *it->second;
    if (numel(shape) != slot.size()) {
      r.fail("record '" + name + "' has shape " + to_string(shape) +
             ", config expects " + std::to_string(slot.size()) + " values");
    }
    for (double& v : slot) v = r.f64();
  }
  if (r.remaining() != 0) r.fail("trailing bytes before checksum");
  if (fnv1a(bytes.data(), body) != stored_hash) r.fail("checksum mismatch");
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_model(bytes, path.string());
}

std::uint64_t model_fingerprint(const Model& model) {
  const std::vector<std::uint8_t> bytes = serialize_model(model);
  return fnv1a(bytes.data(), bytes.size());
}

}  // namespace segravir
