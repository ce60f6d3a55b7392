#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "qkdnet/ids.hpp"

namespace qkdnet {

enum class Errc {
  InvalidTopologyParam,
  DisconnectedBackbone,
  NotInterdomain,
  UnknownNode,
  NoRoute,
  KeyDepleted,
  RelayFailed,
  CoordinatorUnavailable,
  InvalidRequest,
  InvalidState,
  NegotiationFailed,
  ReservationDenied,
  SchedulingError,
  UnknownEntity,
  IncomparableRuns,
  ScenarioError,
};

std::string_view to_string(Errc code);
Errc errc_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

class KeyDepletedError : public Error {
 public:
  KeyDepletedError(LinkId link, std::uint64_t deficit)
      : Error(Errc::KeyDepleted, "KeyDepleted(" + to_string(link) + ", deficit " +
                                     std::to_string(deficit) + ")"),
        link(link),
        deficit(deficit) {}
  LinkId link;
  std::uint64_t deficit;
};

class RelayFailedError : public Error {
 public:
  RelayFailedError(std::size_t hop, NodeId from, NodeId to, std::uint64_t deficit)
      : Error(Errc::RelayFailed, "RelayFailed(hop " + std::to_string(hop) + " " +
                                     to_string(from) + "-" + to_string(to) + ")"),
        hop(hop),
        from(from),
        to(to),
        deficit(deficit) {}
  std::size_t hop;
  NodeId from;
  NodeId to;
  std::uint64_t deficit;
};

}  // namespace qkdnet
