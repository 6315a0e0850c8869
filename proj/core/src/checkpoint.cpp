#include "mmft/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mmft/errors.hpp"

namespace mmft {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

const CheckpointRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const CheckpointRecord& Checkpoint::require(const std::string& name) const {
  const auto* r = find(name);
  if (!r) throw ValidationError("checkpoint: missing record '" + name + "'");
  return *r;
}

void Checkpoint::add(std::string name, Shape shape, std::vector<float> values) {
  if (find(name)) throw ValidationError("checkpoint: duplicate record '" + name + "'");
  if (static_cast<std::int64_t>(values.size()) != shape_numel(shape)) {
    throw ValidationError("checkpoint: record '" + name + "' has the wrong value count");
  }
  records.push_back({std::move(name), std::move(shape), std::move(values)});
}

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("checkpoint truncated: " + path.string());
  return v;
}

std::vector<float> to_float(std::span<const Real> values) { return {values.begin(), values.end()}; }

void add_int(Checkpoint& c, const std::string& key, std::int64_t v) {
  c.add("config/" + key, {}, {static_cast<float>(v)});
}

template <std::size_t N>
void add_ints(Checkpoint& c, const std::string& key, const std::array<std::int64_t, N>& v) {
  std::vector<float> out(v.begin(), v.end());
  c.add("config/" + key, {static_cast<std::int64_t>(N)}, std::move(out));
}

std::int64_t read_int(const Checkpoint& c, const std::string& key) {
  const auto& r = c.require("config/" + key);
  if (r.values.size() != 1) throw ValidationError("checkpoint: config/" + key + " is not a scalar");
  return static_cast<std::int64_t>(r.values[0]);
}

template <std::size_t N>
std::array<std::int64_t, N> read_ints(const Checkpoint& c, const std::string& key) {
  const auto& r = c.require("config/" + key);
  if (r.values.size() != N) throw ValidationError("checkpoint: config/" + key + " has the wrong length");
  std::array<std::int64_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = static_cast<std::int64_t>(r.values[i]);
  return out;
}

}  // namespace

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out.write("MMFT", 4);
    put<std::uint32_t>(out, checkpoint.version);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.records.size()));
    for (const auto& r : checkpoint.records) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
      out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
      put<std::uint8_t>(out, static_cast<std::uint8_t>(r.shape.size()));
      for (auto d : r.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
      out.write(reinterpret_cast<const char*>(r.values.data()),
                static_cast<std::streamsize>(r.values.size() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing checkpoint: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MMFT", 4) != 0) throw IoError("not a checkpoint: " + path.string());
  Checkpoint c;
  c.version = get<std::uint32_t>(in, path);
  if (c.version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(c.version) + ": " + path.string());
  }
  const auto count = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointRecord r;
    const auto len = get<std::uint32_t>(in, path);
    if (len > 4096) throw IoError("checkpoint record name too long: " + path.string());
    r.name.resize(len);
    if (!in.read(r.name.data(), len)) throw IoError("checkpoint truncated: " + path.string());
    const auto rank = get<std::uint8_t>(in, path);
    for (int d = 0; d < rank; ++d) r.shape.push_back(get<std::uint32_t>(in, path));
    r.values.resize(static_cast<std::size_t>(shape_numel(r.shape)));
    if (!in.read(reinterpret_cast<char*>(r.values.data()),
                 static_cast<std::streamsize>(r.values.size() * sizeof(float)))) {
      throw IoError("checkpoint truncated: " + path.string());
    }
    c.records.push_back(std::move(r));
  }
  return c;
}

Checkpoint make_checkpoint(const Model& model, const Adam* optimizer) {
  Checkpoint c;
  const auto& entries = model.parameters().entries();
  for (const auto& [name, t] : entries) c.add(name, t.shape(), to_float(t.values()));
  if (optimizer) {
    const auto& moments = optimizer->moments();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& [name, t] = entries[i];
      c.add("adam.m/" + name, t.shape(), {moments[i].m.begin(), moments[i].m.end()});
      c.add("adam.v/" + name, t.shape(), {moments[i].v.begin(), moments[i].v.end()});
    }
    c.add("meta/step", {}, {static_cast<float>(optimizer->steps())});
  }
  const ModelConfig& mc = model.config();
  add_int(c, "input_size", mc.input_size);
  add_int(c, "fusion", static_cast<std::int64_t>(mc.fusion));
  add_ints(c, "encoder_channels", mc.encoder.channels);
  add_ints(c, "decoder_channels", mc.decoder.channels);
  add_int(c, "heads", mc.mft.heads);
  add_int(c, "model_dim", mc.mft.model_dim);
  add_int(c, "head_dim", mc.mft.head_dim);
  add_int(c, "layers", mc.mft.layers);
  add_int(c, "ffn_dim", mc.mft.ffn_dim);
  add_int(c, "modality_channels", mc.mft.modality_channels);
  add_int(c, "filter_hidden", mc.mft.filter_hidden);
  add_int(c, "groups", mc.mft.groups);
  add_int(c, "kernel", mc.mft.kernel);
  add_int(c, "positional_encoding", mc.mft.use_positional_encoding ? 1 : 0);
  return c;
}

ModelConfig model_config_from(const Checkpoint& c) {
  ModelConfig mc;
  mc.input_size = read_int(c, "input_size");
  const auto fusion = read_int(c, "fusion");
  if (fusion < 0 || fusion > static_cast<std::int64_t>(FusionKind::NonLocal)) {
    throw ValidationError("checkpoint: unknown fusion variant");
  }
  mc.fusion = static_cast<FusionKind>(fusion);
  mc.encoder.channels = read_ints<kNumLevels>(c, "encoder_channels");
  mc.decoder.channels = read_ints<kNumLevels>(c, "decoder_channels");
  mc.mft.heads = static_cast<int>(read_int(c, "heads"));
  mc.mft.model_dim = read_int(c, "model_dim");
  mc.mft.head_dim = read_int(c, "head_dim");
  mc.mft.layers = static_cast<int>(read_int(c, "layers"));
  mc.mft.ffn_dim = read_int(c, "ffn_dim");
  mc.mft.modality_channels = read_int(c, "modality_channels");
  mc.mft.filter_hidden = read_int(c, "filter_hidden");
  mc.mft.groups = read_int(c, "groups");
  mc.mft.kernel = static_cast<int>(read_int(c, "kernel"));
  mc.mft.use_positional_encoding = read_int(c, "positional_encoding") != 0;
  mc.finalize();
  mc.validate();
  return mc;
}

void load_parameters(Model& model, const Checkpoint& c) {
  for (auto& [name, t] : model.parameters().entries()) {
    const auto& r = c.require(name);
    if (r.shape != t.shape()) {
      throw ValidationError("checkpoint: '" + name + "' has shape " + shape_str(r.shape) + ", model expects " +
                            shape_str(t.shape()));
    }
    Tensor handle = t;
    auto dst = handle.mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = r.values[i];
  }
}

bool load_optimizer(Adam& optimizer, const Model& model, const Checkpoint& c) {
  const auto* step = c.find("meta/step");
  if (!step) return false;
  const auto& entries = model.parameters().entries();
  auto& moments = optimizer.moments();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& m = c.require("adam.m/" + entries[i].first);
    const auto& v = c.require("adam.v/" + entries[i].first);
    if (m.shape != entries[i].second.shape() || v.shape != entries[i].second.shape()) {
      throw ValidationError("checkpoint: optimizer moments of '" + entries[i].first + "' are misshaped");
    }
    moments[i].m.assign(m.values.begin(), m.values.end());
    moments[i].v.assign(v.values.begin(), v.values.end());
  }
  optimizer.set_steps(static_cast<std::int64_t>(step->values.at(0)));
  return true;
}

}  // namespace mmft
