#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qkdnet/ids.hpp"
#include "qkdnet/net_model.hpp"

namespace qkdnet {

// Zero-loss rate that puts a 45 km, 0.2 dB/km fiber link (9 dB) at 81.7 kbps.
double default_r0_bps();

struct RateModel {
  double r0_bps = default_r0_bps();
  double max_loss_db = 30.0;
};

// r0 * 10^(-loss/10) up to the cutoff, 0 beyond it.
double secret_key_rate(const RateModel& model, double loss_db);

// Rate of one key link: explicit override, else the loss law, divided among
// channels time-sharing a passive switch.
double link_key_rate(const RateModel& model, const Link& link);

struct KeyBuffer {
  LinkId link;
  std::uint64_t bits_available = 0;
  std::uint64_t stream_cursor = 0;
  bool operator==(const KeyBuffer&) const = default;
};

struct KeyBlock {
  std::string key_id;
  std::uint32_t bits = 0;
  std::vector<std::uint8_t> payload;  // ceil(bits/8) bytes, unused tail bits zero
  SimTime epoch = 0;
  bool operator==(const KeyBlock&) const = default;
};

struct KmsInstance {
  NodeId node;
  std::map<LinkId, KeyBuffer> buffers;
  std::map<std::pair<std::string, AppId>, KeyBlock> delivered;
};

// Named substream seed: splitmix-style mixing of (root, name, index).
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

// Counter-based pseudorandom bit stream. Any party holding the seed and a
// cursor derives the same bits, which stands in for the QKD-distilled key.
class Keystream {
 public:
  explicit Keystream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t word(std::uint64_t index) const;
  bool bit(std::uint64_t position) const;
  std::vector<std::uint8_t> extract(std::uint64_t cursor, std::uint32_t bits) const;

 private:
  std::uint64_t seed_;
};

std::vector<std::uint8_t> xor_bytes(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
std::string hex_digest(std::span<const std::uint8_t> bytes, std::size_t max_bytes = 8);

struct LinkAccount {
  std::uint64_t initial = 0;
  std::uint64_t generated = 0;
  std::uint64_t consumed = 0;
  SimTime last_touch = 0;
  SimTime uptime = 0;  // in-window, not-faulted time integrated so far
  bool up = true;
  double rate_bps = 0.0;
  std::uint64_t keystream_seed = 0;
};

struct RelayHop {
  LinkId link;
  NodeId from;
  NodeId to;
  std::vector<std::uint8_t> ciphertext;
  std::vector<std::uint8_t> recovered;
};

struct RelayRecord {
  std::vector<RelayHop> hops;
  std::vector<std::uint8_t> delivered_payload;
};

// Ground-truth key material for every key-capable link, with one KMS per
// KMS-hosting node. Accrual is lazy: each access integrates the rate exactly
// over the in-window, non-faulted time since the previous access.
class KeyStore {
 public:
  KeyStore(const Topology& topology, RateModel model, std::uint64_t seed, std::uint64_t initial_bits = 0);

  std::uint64_t advance(LinkId link, SimTime now);
  void advance_all(SimTime now);
  // Advances the link by dt past its last touch; returns bits added at each end.
  std::uint64_t accrue(LinkId link, SimTime dt);

  void set_link_up(LinkId link, bool up, SimTime now);
  bool link_up(LinkId link) const { return account(link).up; }
  // Up, inside an availability window and able to hold key.
  bool usable(LinkId link, SimTime now) const;

  std::uint64_t bits_available(LinkId link) const;
  std::uint64_t node_bits(NodeId node) const;
  double rate_bps(LinkId link) const { return account(link).rate_bps; }
  const LinkAccount& account(LinkId link) const;
  const std::map<LinkId, LinkAccount>& accounts() const { return accounts_; }

  bool has_kms(NodeId node) const { return kms_.contains(node); }
  const KmsInstance& kms(NodeId node) const;

  // Smallest-id usable link between two nodes holding at least `min_bits`.
  std::optional<LinkId> link_between(NodeId a, NodeId b, SimTime now, std::uint64_t min_bits) const;

  struct Draw {
    KeyBlock at_a;
    KeyBlock at_b;
  };
  // Consumes `bits` from both ends of the link; throws KeyDepletedError.
  Draw reserve_and_draw(LinkId link, std::uint32_t bits, const std::string& key_id, SimTime now);

  // Fresh end-to-end key generated at the source KMS.
  KeyBlock make_block(const std::string& key_id, std::uint32_t bits, SimTime epoch) const;

  // Hop-by-hop one-time-pad forwarding of `block` along `path`. All hops are
  // checked before anything is consumed; throws RelayFailedError.
  RelayRecord relay_key(std::span<const NodeId> path, const KeyBlock& block, SimTime now);

  void deliver(NodeId node, AppId app, const KeyBlock& block);

  bool symmetric() const;
  bool conserved() const;

 private:
  struct LinkInfo {
    NodeId a;
    NodeId b;
    std::vector<Window> availability;
  };

  LinkAccount& account_mut(LinkId link);
  void sync_buffers(LinkId link);

  std::uint64_t seed_;
  std::map<LinkId, LinkInfo> info_;
  std::map<LinkId, LinkAccount> accounts_;
  std::map<NodeId, KmsInstance> kms_;
};

}  // namespace qkdnet
