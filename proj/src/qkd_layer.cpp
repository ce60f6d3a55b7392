#include "qkdnet/qkd_layer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "qkdnet/error.hpp"

namespace qkdnet {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t generated_bits(double rate_bps, SimTime uptime) {
  const long double bits = static_cast<long double>(rate_bps) * static_cast<long double>(uptime) / 1e6L;
  return static_cast<std::uint64_t>(std::floor(bits));
}

}  // namespace

double default_r0_bps() { return 81700.0 * std::pow(10.0, 9.0 / 10.0); }

double secret_key_rate(const RateModel& model, double loss_db) {
  if (loss_db > model.max_loss_db) return 0.0;
  // Division keeps whole-decade losses exact: R(10 dB) == r0 / 10.
  return model.r0_bps / std::pow(10.0, loss_db / 10.0);
}

double link_key_rate(const RateModel& model, const Link& link) {
  const double base = link.key_rate_bps ? *link.key_rate_bps : secret_key_rate(model, link.loss_db);
  return base / static_cast<double>(std::max<std::uint32_t>(link.rate_share, 1));
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index) {
  return splitmix64(splitmix64(root ^ fnv1a(stream)) + index);
}

std::uint64_t Keystream::word(std::uint64_t index) const { return splitmix64(seed_ ^ splitmix64(index)); }

bool Keystream::bit(std::uint64_t position) const { return (word(position / 64) >> (position % 64)) & 1U; }

std::vector<std::uint8_t> Keystream::extract(std::uint64_t cursor, std::uint32_t bits) const {
  std::vector<std::uint8_t> out((bits + 7) / 8, 0);
  for (std::uint32_t i = 0; i < bits; ++i) {
    if (bit(cursor + i)) out[i / 8] |= static_cast<std::uint8_t>(1U << (i % 8));
  }
  return out;
}

std::vector<std::uint8_t> xor_bytes(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  std::vector<std::uint8_t> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ (i < b.size() ? b[i] : 0);
  return out;
}

std::string hex_digest(std::span<const std::uint8_t> bytes, std::size_t max_bytes) {
  std::string out;
  char buf[3];
  for (std::size_t i = 0; i < bytes.size() && i < max_bytes; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", bytes[i]);
    out += buf;
  }
  return out;
}

KeyStore::KeyStore(const Topology& topology, RateModel model, std::uint64_t seed, std::uint64_t initial_bits)
    : seed_(seed) {
  for (const auto& [id, node] : topology.nodes) {
    if (node.has_kms) kms_.emplace(id, KmsInstance{id, {}, {}});
  }
  for (const auto& [id, link] : topology.links) {
    if (!topology.key_capable(link)) continue;
    info_.emplace(id, LinkInfo{link.a, link.b, link.availability});
    LinkAccount acc;
    acc.initial = initial_bits;
    acc.rate_bps = link_key_rate(model, link);
    acc.keystream_seed = derive_seed(seed, "keystream", id.value);
    accounts_.emplace(id, acc);
    kms_.at(link.a).buffers.emplace(id, KeyBuffer{id, initial_bits, 0});
    kms_.at(link.b).buffers.emplace(id, KeyBuffer{id, initial_bits, 0});
  }
}

const LinkAccount& KeyStore::account(LinkId link) const {
  auto it = accounts_.find(link);
  if (it == accounts_.end()) throw Error(Errc::UnknownEntity, "no key buffer on " + to_string(link));
  return it->second;
}

LinkAccount& KeyStore::account_mut(LinkId link) {
  auto it = accounts_.find(link);
  if (it == accounts_.end()) throw Error(Errc::UnknownEntity, "no key buffer on " + to_string(link));
  return it->second;
}

const KmsInstance& KeyStore::kms(NodeId node) const {
  auto it = kms_.find(node);
  if (it == kms_.end()) throw Error(Errc::UnknownNode, to_string(node) + " hosts no KMS");
  return it->second;
}

void KeyStore::sync_buffers(LinkId link) {
  const auto& acc = accounts_.at(link);
  const auto& info = info_.at(link);
  const std::uint64_t available = acc.initial + acc.generated - acc.consumed;
  kms_.at(info.a).buffers.at(link).bits_available = available;
  kms_.at(info.b).buffers.at(link).bits_available = available;
}

std::uint64_t KeyStore::advance(LinkId link, SimTime now) {
  auto& acc = account_mut(link);
  if (now <= acc.last_touch) return 0;
  if (acc.up) acc.uptime += window_overlap(info_.at(link).availability, acc.last_touch, now);
  acc.last_touch = now;
  const std::uint64_t total = generated_bits(acc.rate_bps, acc.uptime);
  const std::uint64_t added = total - acc.generated;
  acc.generated = total;
  if (added > 0) sync_buffers(link);
  return added;
}

void KeyStore::advance_all(SimTime now) {
  for (auto& [id, acc] : accounts_) advance(id, now);
}

std::uint64_t KeyStore::accrue(LinkId link, SimTime dt) {
  if (dt < 0) throw Error(Errc::InvalidRequest, "negative accrual interval");
  return advance(link, account(link).last_touch + dt);
}

void KeyStore::set_link_up(LinkId link, bool up, SimTime now) {
  if (!accounts_.contains(link)) return;
  advance(link, now);
  account_mut(link).up = up;
}

bool KeyStore::usable(LinkId link, SimTime now) const {
  auto it = accounts_.find(link);
  return it != accounts_.end() && it->second.up && in_window(info_.at(link).availability, now);
}

std::uint64_t KeyStore::bits_available(LinkId link) const {
  const auto& acc = account(link);
  return acc.initial + acc.generated - acc.consumed;
}

std::uint64_t KeyStore::node_bits(NodeId node) const {
  std::uint64_t total = 0;
  for (const auto& [id, buffer] : kms(node).buffers) total += buffer.bits_available;
  return total;
}

std::optional<LinkId> KeyStore::link_between(NodeId a, NodeId b, SimTime now, std::uint64_t min_bits) const {
  for (const auto& [id, info] : info_) {
    const bool joins = (info.a == a && info.b == b) || (info.a == b && info.b == a);
    if (joins && usable(id, now) && bits_available(id) >= min_bits) return id;
  }
  return std::nullopt;
}

KeyStore::Draw KeyStore::reserve_and_draw(LinkId link, std::uint32_t bits, const std::string& key_id, SimTime now) {
  advance(link, now);
  const std::uint64_t available = bits_available(link);
  if (available < bits) throw KeyDepletedError(link, bits - available);

  auto& acc = account_mut(link);
  const auto& info = info_.at(link);
  const Keystream stream(acc.keystream_seed);
  auto draw_at = [&](NodeId end) {
    auto& buffer = kms_.at(end).buffers.at(link);
    KeyBlock block{key_id, bits, stream.extract(buffer.stream_cursor, bits), now};
    buffer.stream_cursor += bits;
    return block;
  };
  Draw d{draw_at(info.a), draw_at(info.b)};
  acc.consumed += bits;
  sync_buffers(link);
  return d;
}

KeyBlock KeyStore::make_block(const std::string& key_id, std::uint32_t bits, SimTime epoch) const {
  const Keystream source(derive_seed(seed_, "block", derive_seed(0, key_id)));
  return KeyBlock{key_id, bits, source.extract(0, bits), epoch};
}

RelayRecord KeyStore::relay_key(std::span<const NodeId> path, const KeyBlock& block, SimTime now) {
  if (path.size() < 2) throw Error(Errc::InvalidRequest, "relay path needs at least two nodes");

  // Reservation pass: resolve every hop and check aggregate demand per link.
  std::vector<LinkId> hops;
  std::map<LinkId, std::uint64_t> demand;
  advance_all(now);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const NodeId from = path[i];
    const NodeId to = path[i + 1];
    if (!has_kms(from) || !has_kms(to)) throw RelayFailedError(i, from, to, block.bits);
    auto link = link_between(from, to, now, block.bits);
    if (!link) {
      std::uint64_t best = 0;
      for (const auto& [id, info] : info_) {
        const bool joins = (info.a == from && info.b == to) || (info.a == to && info.b == from);
        if (joins && usable(id, now)) best = std::max(best, bits_available(id));
      }
      throw RelayFailedError(i, from, to, block.bits - std::min<std::uint64_t>(best, block.bits));
    }
    hops.push_back(*link);
    demand[*link] += block.bits;
  }
  for (std::size_t i = 0; i < hops.size(); ++i) {
    const auto available = bits_available(hops[i]);
    if (available < demand[hops[i]]) throw RelayFailedError(i, path[i], path[i + 1], demand[hops[i]] - available);
  }

  RelayRecord record;
  std::vector<std::uint8_t> plaintext = block.payload;
  for (std::size_t i = 0; i < hops.size(); ++i) {
    const auto pads = reserve_and_draw(hops[i], block.bits, block.key_id, now);
    const auto& info = info_.at(hops[i]);
    const auto& sender_pad = path[i] == info.a ? pads.at_a.payload : pads.at_b.payload;
    const auto& receiver_pad = path[i] == info.a ? pads.at_b.payload : pads.at_a.payload;
    RelayHop hop{hops[i], path[i], path[i + 1], xor_bytes(plaintext, sender_pad), {}};
    hop.recovered = xor_bytes(hop.ciphertext, receiver_pad);
    plaintext = hop.recovered;
    record.hops.push_back(std::move(hop));
  }
  record.delivered_payload = std::move(plaintext);
  return record;
}

void KeyStore::deliver(NodeId node, AppId app, const KeyBlock& block) {
  auto it = kms_.find(node);
  if (it == kms_.end()) throw Error(Errc::UnknownNode, to_string(node) + " hosts no KMS");
  std::size_t holders = 0;
  for (const auto& [n, kms] : kms_) {
    for (const auto& [key, stored] : kms.delivered) holders += key.first == block.key_id ? 1 : 0;
  }
  if (holders >= 2) throw Error(Errc::InvalidState, "key " + block.key_id + " already delivered to two apps");
  if (!it->second.delivered.emplace(std::make_pair(block.key_id, app), block).second) {
    throw Error(Errc::InvalidState, "key " + block.key_id + " already delivered to " + to_string(app));
  }
}

bool KeyStore::symmetric() const {
  for (const auto& [id, info] : info_) {
    const auto& a = kms_.at(info.a).buffers.at(id);
    const auto& b = kms_.at(info.b).buffers.at(id);
    if (a.bits_available != b.bits_available || a.stream_cursor != b.stream_cursor) return false;
  }
  return true;
}

bool KeyStore::conserved() const {
  for (const auto& [id, acc] : accounts_) {
    const auto& buffer = kms_.at(info_.at(id).a).buffers.at(id);
    if (acc.initial + acc.generated != buffer.bits_available + acc.consumed) return false;
  }
  return true;
}

}  // namespace qkdnet
