#pragma once

// RAMPCK01 checkpoints: magic, u32 version, u32 section count, then sections
// of (u16 id, u64 byte length, payload). Encoding is canonical, so
// save(load(bytes)) == bytes.

#include "ramp/baseline.hpp"
#include "ramp/core.hpp"
#include "ramp/features.hpp"
#include "ramp/io.hpp"
#include "ramp/planner.hpp"
#include "ramp/qbasis.hpp"
#include "ramp/rewardfit.hpp"
#include "ramp/tinynet.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ramp::checkpoint {

inline constexpr char kMagic[8] = {'R', 'A', 'M', 'P', 'C', 'K', '0', '1'};
inline constexpr std::uint32_t kVersion = 1;

enum class SectionId : std::uint16_t {
  config = 1,
  feature_map = 2,
  qbasis = 3,
  weights = 4,
  tail = 5,
  dynamics = 6,
};

struct Checkpoint {
  std::string config_json;
  std::uint64_t seed = 0;
  features::FeatureMap feature_map;
  qbasis::QBasisEnsemble ensemble;
  std::optional<rewardfit::RewardWeights> weights;
  std::optional<planner::ValueTail> tail;
  std::optional<baseline::DynamicsModel> dynamics;
};

namespace detail {

inline void put_mlp(io::ByteWriter& w, const tinynet::MlpParams& p) {
  w.u32(static_cast<std::uint32_t>(p.layer_sizes.size()));
  for (int s : p.layer_sizes) w.i32(s);
  w.u8(p.activation == tinynet::Activation::relu ? 0 : 1);
  const auto flat = tinynet::flatten(p);
  w.u64(flat.size());
  w.f64s(flat);
}

inline tinynet::MlpParams get_mlp(io::ByteReader& r) {
  const std::uint32_t n = r.u32();
  if (n < 2 || n > 64) throw IoError("checkpoint: bad layer count");
  std::vector<int> sizes(n);
  for (auto& s : sizes) s = r.i32();
  const std::uint8_t act = r.u8();
  if (act > 1) throw IoError("checkpoint: bad activation tag");
  const std::uint64_t count = r.u64();
  if (count > r.remaining() / 8) throw IoError("checkpoint: truncated network");
  std::vector<double> flat(static_cast<std::size_t>(count));
  for (auto& v : flat) v = r.f64();
  try {
    return tinynet::unflatten(sizes, act == 0 ? tinynet::Activation::relu : tinynet::Activation::tanh, flat);
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

inline void put_norm(io::ByteWriter& w, const qbasis::Standardizer& s) {
  w.vector(s.mean);
  w.vector(s.stddev);
}

inline qbasis::Standardizer get_norm(io::ByteReader& r) {
  qbasis::Standardizer s;
  s.mean = r.vector();
  s.stddev = r.vector();
  return s;
}

inline void put_doubles(io::ByteWriter& w, const std::vector<double>& v) {
  w.u64(v.size());
  w.f64s(v);
}

inline std::vector<double> get_doubles(io::ByteReader& r) {
  const Vector v = r.vector();
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace detail

// Random feature networks are regenerated from (kind, K, dims, seed, input scale):
// storing the generator is exact and avoids K small networks' worth of bytes.
inline std::string encode_feature_map(const features::FeatureMap& f) {
  io::ByteWriter w;
  w.u8(static_cast<std::uint8_t>(f.kind));
  w.u32(static_cast<std::uint32_t>(f.num_features));
  w.u32(static_cast<std::uint32_t>(f.state_dim));
  w.u32(static_cast<std::uint32_t>(f.action_dim));
  w.u64(f.seed);
  w.vector(f.input_scale);
  return w.take();
}

inline features::FeatureMap decode_feature_map(std::string_view bytes) {
  io::ByteReader r(bytes);
  const std::uint8_t kind = r.u8();
  if (kind > 2) throw IoError("checkpoint: bad feature kind");
  const auto k = static_cast<int>(r.u32());
  const auto ds = static_cast<int>(r.u32());
  const auto da = static_cast<int>(r.u32());
  const std::uint64_t seed = r.u64();
  const Vector scale = r.vector();
  if (!r.done()) throw IoError("checkpoint: trailing bytes in feature map section");
  return features::make_feature_map(static_cast<features::FeatureKind>(kind), k, ds, da, seed, scale);
}

inline std::string encode_ensemble(const qbasis::QBasisEnsemble& e) {
  io::ByteWriter w;
  w.i32(e.horizon);
  w.i32(e.num_features);
  w.i32(e.state_dim);
  w.i32(e.action_dim);
  w.f64(e.gamma);
  w.i32(e.epochs_trained);
  detail::put_norm(w, e.input_norm);
  detail::put_norm(w, e.output_norm);
  detail::put_doubles(w, e.initial_loss);
  detail::put_doubles(w, e.final_loss);
  w.u32(static_cast<std::uint32_t>(e.members.size()));
  for (const auto& m : e.members) detail::put_mlp(w, m);
  return w.take();
}

inline qbasis::QBasisEnsemble decode_ensemble(std::string_view bytes) {
  io::ByteReader r(bytes);
  qbasis::QBasisEnsemble e;
  e.horizon = r.i32();
  e.num_features = r.i32();
  e.state_dim = r.i32();
  e.action_dim = r.i32();
  e.gamma = r.f64();
  e.epochs_trained = r.i32();
  e.input_norm = detail::get_norm(r);
  e.output_norm = detail::get_norm(r);
  e.initial_loss = detail::get_doubles(r);
  e.final_loss = detail::get_doubles(r);
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) e.members.push_back(detail::get_mlp(r));
  if (!r.done()) throw IoError("checkpoint: trailing bytes in qbasis section");
  return e;
}

inline std::string encode_weights(const rewardfit::RewardWeights& rw) {
  io::ByteWriter w;
  w.vector(rw.w);
  w.f64(rw.lambda);
  w.u64(static_cast<std::uint64_t>(rw.n_samples_seen));
  return w.take();
}

inline rewardfit::RewardWeights decode_weights(std::string_view bytes) {
  io::ByteReader r(bytes);
  rewardfit::RewardWeights rw;
  rw.w = r.vector();
  rw.lambda = r.f64();
  rw.n_samples_seen = static_cast<std::int64_t>(r.u64());
  if (!r.done()) throw IoError("checkpoint: trailing bytes in weights section");
  return rw;
}

// The optimizer state is not persisted; a loaded tail resumes with fresh Adam moments.
inline std::string encode_tail(const planner::ValueTail& t) {
  io::ByteWriter w;
  w.f64(t.momentum);
  w.f64(t.gamma);
  w.i32(t.horizon);
  w.i32(t.state_dim);
  w.i32(t.action_dim);
  w.f64(t.adam.learning_rate);
  w.u64(static_cast<std::uint64_t>(t.adam.step_count));
  detail::put_norm(w, t.input_norm);
  detail::put_mlp(w, t.online);
  detail::put_mlp(w, t.target);
  return w.take();
}

inline planner::ValueTail decode_tail(std::string_view bytes) {
  io::ByteReader r(bytes);
  planner::ValueTail t;
  t.momentum = r.f64();
  t.gamma = r.f64();
  t.horizon = r.i32();
  t.state_dim = r.i32();
  t.action_dim = r.i32();
  const double lr = r.f64();
  const std::uint64_t steps = r.u64();
  t.input_norm = detail::get_norm(r);
  t.online = detail::get_mlp(r);
  t.target = detail::get_mlp(r);
  t.adam = tinynet::AdamState::for_params(t.online, lr);
  t.adam.step_count = static_cast<std::int64_t>(steps);
  if (!r.done()) throw IoError("checkpoint: trailing bytes in tail section");
  return t;
}

inline std::string encode_dynamics(const baseline::DynamicsModel& m) {
  io::ByteWriter w;
  w.i32(m.state_dim);
  w.i32(m.action_dim);
  detail::put_norm(w, m.input_norm);
  detail::put_norm(w, m.output_norm);
  detail::put_mlp(w, m.network);
  w.u32(static_cast<std::uint32_t>(m.angular_dims.size()));
  for (int d : m.angular_dims) w.i32(d);
  return w.take();
}

inline baseline::DynamicsModel decode_dynamics(std::string_view bytes) {
  io::ByteReader r(bytes);
  baseline::DynamicsModel m;
  m.state_dim = r.i32();
  m.action_dim = r.i32();
  m.input_norm = detail::get_norm(r);
  m.output_norm = detail::get_norm(r);
  m.network = detail::get_mlp(r);
  const std::uint32_t n_angular = r.u32();
  if (n_angular > static_cast<std::uint32_t>(m.state_dim)) throw IoError("checkpoint: bad angular dimension count");
  for (std::uint32_t i = 0; i < n_angular; ++i) m.angular_dims.push_back(r.i32());
  if (!r.done()) throw IoError("checkpoint: trailing bytes in dynamics section");
  return m;
}

inline std::string encode(const Checkpoint& ck) {
  std::vector<std::pair<SectionId, std::string>> sections;
  {
    io::ByteWriter w;
    w.u64(ck.seed);
    w.string(ck.config_json);
    sections.emplace_back(SectionId::config, w.take());
  }
  sections.emplace_back(SectionId::feature_map, encode_feature_map(ck.feature_map));
  sections.emplace_back(SectionId::qbasis, encode_ensemble(ck.ensemble));
  if (ck.weights) sections.emplace_back(SectionId::weights, encode_weights(*ck.weights));
  if (ck.tail) sections.emplace_back(SectionId::tail, encode_tail(*ck.tail));
  if (ck.dynamics) sections.emplace_back(SectionId::dynamics, encode_dynamics(*ck.dynamics));

  io::ByteWriter w;
  w.bytes(std::string_view(kMagic, 8));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [id, payload] : sections) {
    w.u16(static_cast<std::uint16_t>(id));
    w.u64(payload.size());
    w.bytes(payload);
  }
  return w.take();
}

inline Checkpoint decode(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (r.remaining() < 8 || r.bytes(8) != std::string_view(kMagic, 8)) throw IoError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  Checkpoint ck;
  bool have_fmap = false, have_ens = false, have_cfg = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t id = r.u16();
    const std::uint64_t len = r.u64();
    if (len > r.remaining()) throw IoError("checkpoint: truncated section " + std::to_string(id));
    const std::string_view payload = r.bytes(static_cast<std::size_t>(len));
    switch (static_cast<SectionId>(id)) {
      case SectionId::config: {
        io::ByteReader s(payload);
        ck.seed = s.u64();
        ck.config_json = s.string();
        have_cfg = true;
        break;
      }
      case SectionId::feature_map:
        ck.feature_map = decode_feature_map(payload);
        have_fmap = true;
        break;
      case SectionId::qbasis:
        ck.ensemble = decode_ensemble(payload);
        have_ens = true;
        break;
      case SectionId::weights: ck.weights = decode_weights(payload); break;
      case SectionId::tail: ck.tail = decode_tail(payload); break;
      case SectionId::dynamics: ck.dynamics = decode_dynamics(payload); break;
      default: throw IoError("checkpoint: unknown section id " + std::to_string(id));
    }
  }
  if (!r.done()) throw IoError("checkpoint: trailing bytes after the section table");
  if (!have_cfg || !have_fmap || !have_ens) throw IoError("checkpoint: missing a required section");
  return ck;
}

inline void save(const std::string& path, const Checkpoint& ck) { io::write_file(path, encode(ck)); }

inline Checkpoint load(const std::string& path) { return decode(io::read_file(path)); }

}  // namespace ramp::checkpoint
