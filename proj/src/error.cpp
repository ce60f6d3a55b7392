#include "qkdnet/error.hpp"

#include <array>
#include <utility>

namespace qkdnet {

namespace {

constexpr std::array<std::pair<Errc, std::string_view>, 16> kNames{{
    {Errc::InvalidTopologyParam, "InvalidTopologyParam"},
    {Errc::DisconnectedBackbone, "DisconnectedBackbone"},
    {Errc::NotInterdomain, "NotInterdomain"},
    {Errc::UnknownNode, "UnknownNode"},
    {Errc::NoRoute, "NoRoute"},
    {Errc::KeyDepleted, "KeyDepleted"},
    {Errc::RelayFailed, "RelayFailed"},
    {Errc::CoordinatorUnavailable, "CoordinatorUnavailable"},
    {Errc::InvalidRequest, "InvalidRequest"},
    {Errc::InvalidState, "InvalidState"},
    {Errc::NegotiationFailed, "NegotiationFailed"},
    {Errc::ReservationDenied, "ReservationDenied"},
    {Errc::SchedulingError, "SchedulingError"},
    {Errc::UnknownEntity, "UnknownEntity"},
    {Errc::IncomparableRuns, "IncomparableRuns"},
    {Errc::ScenarioError, "ScenarioError"},
}};

}  // namespace

std::string_view to_string(Errc code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

Errc errc_from_string(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  throw Error(Errc::UnknownEntity, "unknown error code '" + std::string(name) + "'");
}

}  // namespace qkdnet
