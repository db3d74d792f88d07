#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "acmdp/core/types.hpp"

namespace acmdp::harness {

inline constexpr char kCheckpointMagic[8] = {'A', 'C', 'M', 'D', 'P', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Frozen learner state: least-squares losses, confidence-set membership, chosen model, and its plan table.
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::string policy;
  std::uint64_t seed = 0;
  std::uint32_t episodes = 0;
  std::vector<double> losses;
  std::vector<bool> membership;
  std::uint32_t selected = 0;
  double multiplier = 0.0;
  std::vector<double> table;

  bool operator==(const Checkpoint&) const = default;
};

namespace detail {

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Cursor {
 public:
  explicit Cursor(const std::string& bytes) : b_(bytes) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw ValidationError("checkpoint is truncated");
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Little-endian layout: magic, version, hash, policy, seed, episodes, losses, membership bitmap, selected,
/// multiplier, table.
inline std::string encode_checkpoint(const Checkpoint& c) {
  if (c.membership.size() != c.losses.size()) throw ValidationError("membership and losses differ in length");
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put(out, kCheckpointVersion);
  detail::put(out, c.config_hash);
  detail::put(out, static_cast<std::uint32_t>(c.policy.size()));
  out += c.policy;
  detail::put(out, c.seed);
  detail::put(out, c.episodes);
  detail::put(out, static_cast<std::uint32_t>(c.losses.size()));
  for (double l : c.losses) detail::put(out, l);
  std::string bitmap((c.membership.size() + 7) / 8, '\0');
  for (std::size_t i = 0; i < c.membership.size(); ++i)
    if (c.membership[i]) bitmap[i / 8] = static_cast<char>(bitmap[i / 8] | (1 << (i % 8)));
  out += bitmap;
  detail::put(out, c.selected);
  detail::put(out, c.multiplier);
  detail::put(out, static_cast<std::uint64_t>(c.table.size()));
  for (double v : c.table) detail::put(out, v);
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  detail::Cursor in(bytes);
  if (in.bytes(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic))
    throw ValidationError("not a checkpoint file");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.config_hash = in.get<std::uint64_t>();
  c.policy = in.bytes(in.get<std::uint32_t>());
  c.seed = in.get<std::uint64_t>();
  c.episodes = in.get<std::uint32_t>();
  const auto m = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < m; ++i) c.losses.push_back(in.get<double>());
  const std::string bitmap = in.bytes((m + 7) / 8);
  for (std::uint32_t i = 0; i < m; ++i) c.membership.push_back((bitmap[i / 8] >> (i % 8)) & 1);
  c.selected = in.get<std::uint32_t>();
  c.multiplier = in.get<double>();
  const auto n = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) c.table.push_back(in.get<double>());
  if (!in.done()) throw ValidationError("checkpoint has trailing bytes");
  return c;
}

}  // namespace acmdp::harness
