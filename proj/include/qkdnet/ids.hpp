#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace qkdnet {

// Opaque ordered identifier. The tag keeps node/link/domain/controller ids
// from being mixed up at compile time.
template <class Tag, class Rep = std::uint32_t>
struct Id {
  Rep value{};

  constexpr Id() = default;
  constexpr explicit Id(Rep v) : value(v) {}

  constexpr auto operator<=>(const Id&) const = default;
};

using NodeId = Id<struct NodeTag>;
using LinkId = Id<struct LinkTag>;
using DomainId = Id<struct DomainTag>;
using ControllerId = Id<struct ControllerTag>;
using RequestId = Id<struct RequestTag, std::uint64_t>;

// Simulated time in integer microseconds. Integer time keeps accrual exact
// and traces byte-stable.
using SimTime = std::int64_t;

constexpr SimTime kMicrosPerSecond = 1'000'000;

constexpr SimTime seconds(double s) {
  return static_cast<SimTime>(s * 1e6 + (s >= 0 ? 0.5 : -0.5));
}
constexpr SimTime millis(double ms) {
  return static_cast<SimTime>(ms * 1e3 + (ms >= 0 ? 0.5 : -0.5));
}
constexpr double to_seconds(SimTime t) { return static_cast<double>(t) / 1e6; }

// Node ids carry their domain: value = domain * kNodesPerDomain + local index.
// This lets independently built domains compose without renumbering.
constexpr std::uint32_t kNodesPerDomain = 1000;
constexpr std::uint32_t kLinksPerDomain = 10000;
constexpr std::uint32_t kChannelOffset = 5000;
constexpr std::uint32_t kBackboneLinkBase = 100'000'000;

constexpr NodeId make_node_id(DomainId d, std::uint32_t local) {
  return NodeId{d.value * kNodesPerDomain + local};
}
constexpr DomainId domain_of(NodeId n) { return DomainId{n.value / kNodesPerDomain}; }
constexpr std::uint32_t local_index(NodeId n) { return n.value % kNodesPerDomain; }

// An application is identified by the node hosting it.
struct AppId {
  NodeId node;
  constexpr auto operator<=>(const AppId&) const = default;
};

inline std::string to_string(NodeId n) {
  return "qn" + std::to_string(domain_of(n).value) + "." + std::to_string(local_index(n));
}
inline std::string to_string(LinkId l) { return "l" + std::to_string(l.value); }
inline std::string to_string(DomainId d) { return "d" + std::to_string(d.value); }
inline std::string to_string(AppId a) { return "app@" + to_string(a.node); }

}  // namespace qkdnet

template <class Tag, class Rep>
struct std::hash<qkdnet::Id<Tag, Rep>> {
  std::size_t operator()(const qkdnet::Id<Tag, Rep>& id) const noexcept {
    return std::hash<Rep>{}(id.value);
  }
};
