#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "qkdnet/protocol_base.hpp"

namespace qkdnet {

// One peer controller per domain; EWBI links mirror the domain quotient graph.
struct PeerTable {
  std::map<ControllerId, DomainId> peers;
  std::map<DomainId, ControllerId> by_domain;
  std::set<std::pair<ControllerId, ControllerId>> ewbi_links;  // stored with first < second

  std::vector<ControllerId> neighbours(ControllerId c) const;
  // First hop on a shortest EWBI path avoiding peers for which `usable` is
  // false (the target is always usable). Ties go to the smaller id.
  std::optional<ControllerId> next_hop(ControllerId from, ControllerId to,
                                       const std::function<bool(ControllerId)>& usable) const;
  ControllerId peer(DomainId d) const;
};

PeerTable make_peer_table(const Topology& topology, const std::map<DomainId, ControllerId>& controllers);

// Controller that arbitrates reservations on a backbone link: the peer of the
// endpoint with the smaller domain id.
DomainId link_owner(const Topology& topology, LinkId link);

enum class ReservationState { Pending, Granted, Denied, Released };
std::string_view to_string(ReservationState s);

struct Reservation {
  RequestId request_id;
  std::vector<LinkId> links;
  std::uint64_t bits = 0;
  Priority priority;
  ReservationState state = ReservationState::Pending;
  std::uint32_t attempt = 1;
  ControllerId requester;
};

// Batch arbiter for one owner. Pending reservations are decided together in
// priority order; a link that cannot satisfy a reservation is closed to every
// lower-priority one in the same batch, so grants form a priority prefix.
class ReservationArbiter {
 public:
  void submit(Reservation r);
  bool has_pending() const { return !pending_.empty(); }
  std::vector<Reservation> decide(const std::function<std::uint64_t(LinkId)>& available);
  void release(RequestId id);
  std::uint64_t outstanding(LinkId link) const;
  const std::vector<Reservation>& granted() const { return granted_; }

 private:
  std::vector<Reservation> pending_;
  std::vector<Reservation> granted_;
};

struct Proposal {
  Path backbone;  // empty: no route on this view
  SimTime freshness = 0;
  bool operator==(const Proposal&) const = default;
};

// Backbone segment of the best route on `view`, with the newest
// last_updated over the links it uses.
Proposal propose(const Topology& topology, const NetworkView& view, NodeId src, NodeId dst, std::uint64_t bits,
                 SimTime now);

// Equal proposals agree; otherwise the fresher one wins, ties go to the
// source. Both empty: NegotiationFailed.
Path peer_negotiate(const Proposal& source, const Proposal& dest);

// Interdomain links traversed by a backbone segment, as resolved on `view`.
std::optional<std::vector<LinkId>> backbone_links_of(const Topology& topology, const NetworkView& view,
                                                     const Path& backbone, std::uint64_t bits, SimTime now);

struct PeerOptions {
  std::map<DomainId, std::string> names;  // default "P-d<id>"
  bool reroute_on_fault = true;
};

class DistributedProtocol : public ProtocolBase {
 public:
  DistributedProtocol(PeerTable table, PeerOptions options) : table_(std::move(table)), options_(std::move(options)) {}

  std::string_view name() const override { return "distributed"; }
  void start(Engine& engine) override;
  ControllerId entry_controller(const Engine& engine, DomainId domain) const override;
  void on_message(Engine& engine, const Message& msg) override;
  void on_timer(Engine& engine, const Timer& timer) override;
  void on_fault(Engine& engine, const FaultEntry& fault) override;
  void on_relay_complete(Engine& engine, RequestId id) override;
  void on_links_consumed(Engine& engine, const std::vector<LinkId>& links, RequestId id) override;

  // Floods this peer's own-domain snapshot over the EWBI.
  void gossip_state(Engine& engine, ControllerId me);

  const PeerTable& table() const { return table_; }
  const ReservationArbiter& arbiter(ControllerId owner) const;

 private:
  struct Flow {
    ControllerId origin;
    ControllerId dest;
    std::optional<Proposal> source_proposal;
    std::set<ControllerId> awaiting;  // owners yet to answer
    bool denied = false;
    std::optional<Path> src_path;
    std::optional<Path> dst_path;
  };

  bool forward(Engine& engine, ControllerId me, ControllerId target, MessageBody body);
  void fail(Engine& engine, ControllerId me, RequestId id, Errc code, const std::string& segment);
  void begin_interdomain(Engine& engine, RequestId id);
  void send_proposal(Engine& engine, RequestId id);
  void start_reservations(Engine& engine, RequestId id);
  void on_reservation_answer(Engine& engine, RequestId id, std::uint32_t attempt, ControllerId owner, bool granted);
  void proceed_to_paths(Engine& engine, RequestId id);
  void submit(Engine& engine, ControllerId owner, Reservation r);
  void check_reroute(Engine& engine, ControllerId me);

  PeerTable table_;
  PeerOptions options_;
  std::map<RequestId, Flow> flows_;
  std::map<ControllerId, ReservationArbiter> arbiters_;
  std::map<ControllerId, std::uint64_t> gossip_version_;
  std::set<std::tuple<ControllerId, ControllerId, std::uint64_t>> seen_;  // (receiver, origin, version)
};

PeerTable install_distributed(Engine& engine, const PeerOptions& options = {});

}  // namespace qkdnet
