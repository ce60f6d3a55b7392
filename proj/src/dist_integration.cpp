#include "qkdnet/dist_integration.hpp"

#include <algorithm>
#include <deque>

namespace qkdnet {

std::vector<ControllerId> PeerTable::neighbours(ControllerId c) const {
  std::vector<ControllerId> out;
  for (const auto& [a, b] : ewbi_links) {
    if (a == c) out.push_back(b);
    if (b == c) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<ControllerId> PeerTable::next_hop(ControllerId from, ControllerId to,
                                                const std::function<bool(ControllerId)>& usable) const {
  if (from == to) return to;
  std::map<ControllerId, std::size_t> dist{{to, 0}};
  std::deque<ControllerId> frontier{to};
  while (!frontier.empty()) {
    const ControllerId v = frontier.front();
    frontier.pop_front();
    if (v == from) continue;
    for (ControllerId w : neighbours(v)) {
      if (w != from && !usable(w)) continue;
      if (dist.emplace(w, dist[v] + 1).second) frontier.push_back(w);
    }
  }
  auto it = dist.find(from);
  if (it == dist.end()) return std::nullopt;
  for (ControllerId w : neighbours(from)) {
    auto dw = dist.find(w);
    if (dw != dist.end() && dw->second + 1 == it->second) return w;
  }
  return std::nullopt;
}

ControllerId PeerTable::peer(DomainId d) const {
  auto it = by_domain.find(d);
  if (it == by_domain.end()) throw Error(Errc::UnknownEntity, "no peer controller for " + to_string(d));
  return it->second;
}

PeerTable make_peer_table(const Topology& topology, const std::map<DomainId, ControllerId>& controllers) {
  PeerTable t;
  for (const auto& [d, c] : controllers) {
    t.peers[c] = d;
    t.by_domain[d] = c;
  }
  for (LinkId id : topology.backbone_links) {
    const auto& l = topology.link(id);
    const ControllerId a = t.peer(domain_of(l.a));
    const ControllerId b = t.peer(domain_of(l.b));
    t.ewbi_links.emplace(std::min(a, b), std::max(a, b));
  }
  return t;
}

DomainId link_owner(const Topology& topology, LinkId link) {
  const auto& l = topology.link(link);
  return std::min(domain_of(l.a), domain_of(l.b));
}

std::string_view to_string(ReservationState s) {
  switch (s) {
    case ReservationState::Pending: return "Pending";
    case ReservationState::Granted: return "Granted";
    case ReservationState::Denied: return "Denied";
    case ReservationState::Released: return "Released";
  }
  return "?";
}

void ReservationArbiter::submit(Reservation r) {
  r.state = ReservationState::Pending;
  pending_.push_back(std::move(r));
}

std::vector<Reservation> ReservationArbiter::decide(const std::function<std::uint64_t(LinkId)>& available) {
  std::vector<Reservation> batch = std::move(pending_);
  pending_.clear();
  std::sort(batch.begin(), batch.end(), [](const Reservation& a, const Reservation& b) {
    return std::tie(a.priority, a.request_id) < std::tie(b.priority, b.request_id);
  });

  std::map<LinkId, std::uint64_t> remaining;
  auto left = [&](LinkId l) -> std::uint64_t& {
    auto it = remaining.find(l);
    if (it == remaining.end()) {
      const std::uint64_t avail = available(l);
      const std::uint64_t held = outstanding(l);
      it = remaining.emplace(l, avail > held ? avail - held : 0).first;
    }
    return it->second;
  };
  std::set<LinkId> blocked;
  for (auto& r : batch) {
    const bool fits = std::all_of(r.links.begin(), r.links.end(),
                                  [&](LinkId l) { return !blocked.contains(l) && left(l) >= r.bits; });
    if (fits) {
      for (LinkId l : r.links) left(l) -= r.bits;
      r.state = ReservationState::Granted;
      granted_.push_back(r);
    } else {
      for (LinkId l : r.links) {
        if (left(l) < r.bits) blocked.insert(l);
      }
      r.state = ReservationState::Denied;
    }
  }
  return batch;
}

void ReservationArbiter::release(RequestId id) {
  std::erase_if(granted_, [&](const Reservation& r) { return r.request_id == id; });
}

std::uint64_t ReservationArbiter::outstanding(LinkId link) const {
  std::uint64_t total = 0;
  for (const auto& r : granted_) {
    if (std::find(r.links.begin(), r.links.end(), link) != r.links.end()) total += r.bits;
  }
  return total;
}

Proposal propose(const Topology& topology, const NetworkView& view, NodeId src, NodeId dst, std::uint64_t bits,
                 SimTime now) {
  Proposal p;
  auto route = compute_route(topology, view, RouteQuery{src, dst, bits, now, std::nullopt});
  if (!route) return p;
  p.backbone = split_route(*route, domain_of(src), domain_of(dst)).backbone;
  for (std::size_t i = 0; i + 1 < p.backbone.size(); ++i) {
    if (auto l = feasible_link_between(topology, view, p.backbone[i], p.backbone[i + 1], bits, now)) {
      p.freshness = std::max(p.freshness, view.link_states.at(*l).last_updated);
    }
  }
  return p;
}

Path peer_negotiate(const Proposal& source, const Proposal& dest) {
  if (source.backbone.empty() && dest.backbone.empty()) {
    throw Error(Errc::NegotiationFailed, "no interdomain route on either view");
  }
  if (dest.backbone.empty() || source.backbone == dest.backbone) return source.backbone;
  if (source.backbone.empty()) return dest.backbone;
  return dest.freshness > source.freshness ? dest.backbone : source.backbone;
}

std::optional<std::vector<LinkId>> backbone_links_of(const Topology& topology, const NetworkView& view,
                                                     const Path& backbone, std::uint64_t bits, SimTime now) {
  std::vector<LinkId> links;
  for (std::size_t i = 0; i + 1 < backbone.size(); ++i) {
    if (domain_of(backbone[i]) == domain_of(backbone[i + 1])) continue;
    auto l = feasible_link_between(topology, view, backbone[i], backbone[i + 1], bits, now);
    if (!l) return std::nullopt;
    links.push_back(*l);
  }
  return links;
}

// ---- protocol ---------------------------------------------------------------

void DistributedProtocol::start(Engine& engine) {
  for (const auto& [c, d] : table_.peers) {
    engine.schedule_timer(engine.now() + engine.config().sync_period, Timer{TimerKind::PeriodicSync, c, 0});
  }
}

ControllerId DistributedProtocol::entry_controller(const Engine&, DomainId domain) const {
  return table_.peer(domain);
}

const ReservationArbiter& DistributedProtocol::arbiter(ControllerId owner) const {
  auto it = arbiters_.find(owner);
  if (it == arbiters_.end()) throw Error(Errc::UnknownEntity, "no arbiter state at c" + std::to_string(owner.value));
  return it->second;
}

bool DistributedProtocol::forward(Engine& engine, ControllerId me, ControllerId target, MessageBody body) {
  auto next = table_.next_hop(me, target, [&](ControllerId c) { return engine.controller(c).serving(); });
  if (!next) return false;
  return engine.send(me, *next, std::move(body), target) == SendStatus::Sent;
}

void DistributedProtocol::fail(Engine& engine, ControllerId me, RequestId id, Errc code, const std::string& segment) {
  auto it = flows_.find(id);
  const ControllerId origin = it != flows_.end() ? it->second.origin : me;
  if (me == origin) {
    fail_to_app(engine, me, id, code, segment);
    return;
  }
  engine.fail_session(id, code, segment);
  forward(engine, me, origin, ErrorReport{id, code, segment, engine.session(id).attempt});
}

void DistributedProtocol::begin_interdomain(Engine& engine, RequestId id) {
  const auto& s = engine.session(id);
  Flow flow;
  flow.origin = table_.peer(s.source_domain);
  flow.dest = table_.peer(s.dest_domain);
  flows_[id] = flow;
  engine.send(flow.origin, s.request.app_src.node, AvailabilityQuery{id, s.request.app_src.node});
}

void DistributedProtocol::send_proposal(Engine& engine, RequestId id) {
  const auto& s = engine.session(id);
  const auto& flow = flows_.at(id);
  engine.refresh_direct(flow.origin);
  const Proposal p = propose(engine.topology(), engine.controller(flow.origin).view, s.request.app_src.node,
                             s.request.app_dst.node, s.request.bits, engine.now());
  const InterdomainRoute msg{id, p.backbone, RouteStage::Propose, p.freshness, s.attempt};
  if (!forward(engine, flow.origin, flow.dest, msg)) {
    fail(engine, flow.origin, id, Errc::CoordinatorUnavailable, engine.controller(flow.dest).name);
  }
}

void DistributedProtocol::start_reservations(Engine& engine, RequestId id) {
  const auto& s = engine.session(id);
  auto& flow = flows_.at(id);
  const auto& view = engine.controller(flow.origin).view;
  auto links = backbone_links_of(engine.topology(), view, s.backbone_path, s.request.bits, engine.now());
  if (!links) {
    fail(engine, flow.origin, id, Errc::NoRoute, "interdomain");
    return;
  }
  std::map<ControllerId, std::vector<LinkId>> by_owner;
  for (LinkId l : *links) by_owner[table_.peer(link_owner(engine.topology(), l))].push_back(l);
  flow.awaiting.clear();
  flow.denied = false;
  for (const auto& [owner, owned] : by_owner) flow.awaiting.insert(owner);
  if (by_owner.empty()) {
    proceed_to_paths(engine, id);
    return;
  }

  const Priority priority{s.request.issued_at, s.source_domain};
  for (const auto& [owner, owned] : by_owner) {
    if (owner == flow.origin) {
      submit(engine, owner, Reservation{id, owned, s.request.bits, priority, {}, s.attempt, flow.origin});
      continue;
    }
    if (!forward(engine, flow.origin, owner, ReserveRequest{id, owned, s.request.bits, priority, s.attempt})) {
      fail(engine, flow.origin, id, Errc::CoordinatorUnavailable, engine.controller(owner).name);
      return;
    }
  }
}

void DistributedProtocol::submit(Engine& engine, ControllerId owner, Reservation r) {
  auto& arb = arbiters_[owner];
  const bool idle = !arb.has_pending();
  arb.submit(std::move(r));
  if (idle) {
    engine.schedule_timer(engine.now() + engine.config().reserve_window, Timer{TimerKind::ArbiterClose, owner, 0});
  }
}

void DistributedProtocol::on_reservation_answer(Engine& engine, RequestId id, std::uint32_t attempt,
                                                ControllerId owner, bool granted) {
  if (!current(engine, id, attempt)) return;
  auto& flow = flows_.at(id);
  if (flow.denied || !flow.awaiting.erase(owner)) return;
  if (!granted) {
    flow.denied = true;
    fail(engine, flow.origin, id, Errc::ReservationDenied, engine.controller(owner).name);
    return;
  }
  if (flow.awaiting.empty()) proceed_to_paths(engine, id);
}

void DistributedProtocol::proceed_to_paths(Engine& engine, RequestId id) {
  auto& s = engine.session(id);
  auto& flow = flows_.at(id);
  const NodeId src = s.request.app_src.node;
  const NodeId exit = s.backbone_path.front();
  std::optional<Path> path = Path{src};
  if (src != exit) {
    engine.refresh_direct(flow.origin);
    path = compute_route(engine.topology(), engine.controller(flow.origin).view,
                         RouteQuery{src, exit, s.request.bits, engine.now(), s.source_domain});
  }
  if (!path) {
    fail(engine, flow.origin, id, Errc::NoRoute, to_string(s.source_domain));
    return;
  }
  flow.src_path = path;
  if (!forward(engine, flow.origin, flow.dest, IntradomainRouteSet{id, *path, s.attempt})) {
    fail(engine, flow.origin, id, Errc::CoordinatorUnavailable, engine.controller(flow.dest).name);
  }
}

void DistributedProtocol::gossip_state(Engine& engine, ControllerId me) {
  if (!engine.controller(me).serving()) return;
  const std::uint64_t version = ++gossip_version_[me];
  seen_.emplace(me, me, version);
  const StateSync sync{me, version, engine.view_snapshot(me)};
  for (ControllerId n : table_.neighbours(me)) engine.send(me, n, sync);
}

void DistributedProtocol::check_reroute(Engine& engine, ControllerId me) {
  if (!options_.reroute_on_fault) return;
  const auto& topo = engine.topology();
  const auto& view = engine.controller(me).view;
  std::vector<RequestId> affected;
  for (const auto& [id, flow] : flows_) {
    if (flow.origin != me || !engine.has_session(id)) continue;
    const auto& s = engine.session(id);
    if (terminal(s) || s.state == SessionState::Delivering || !s.key_id.empty() || s.backbone_path.empty()) continue;
    for (std::size_t i = 0; i + 1 < s.backbone_path.size(); ++i) {
      const NodeId a = s.backbone_path[i];
      const NodeId b = s.backbone_path[i + 1];
      bool any_up = false;
      for (const auto& [lid, link] : topo.links) {
        if (!((link.a == a && link.b == b) || (link.a == b && link.b == a))) continue;
        auto st = view.link_states.find(lid);
        if (st != view.link_states.end() && st->second.up) any_up = true;
      }
      if (!any_up) {
        affected.push_back(id);
        break;
      }
    }
  }
  for (RequestId id : affected) {
    auto& s = engine.session(id);
    if (s.attempt > 1) {
      fail(engine, me, id, Errc::NoRoute, "interdomain");
      continue;
    }
    ++s.attempt;
    s.state = SessionState::Routing;
    s.backbone_path.clear();
    auto& flow = flows_.at(id);
    flow.awaiting.clear();
    flow.denied = false;
    flow.src_path.reset();
    flow.dst_path.reset();
    flow.source_proposal.reset();
    send_proposal(engine, id);
  }
}

void DistributedProtocol::on_message(Engine& engine, const Message& msg) {
  const ControllerId me = std::get<ControllerId>(msg.to);
  if (msg.final_to && *msg.final_to != me) {
    if (!forward(engine, me, *msg.final_to, msg.body)) {
      const auto id = request_of(msg.body);
      if (id && !std::holds_alternative<ErrorReport>(msg.body) && current(engine, *id, attempt_of(msg.body))) {
        fail(engine, me, *id, Errc::CoordinatorUnavailable, engine.controller(*msg.final_to).name);
      }
    }
    return;
  }

  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, KeyServiceRequest>) {
          if (!accept_request(engine, me, body)) return;
          if (classify_request(engine.topology(), table_.peers.at(me), body) == RequestScope::Local) {
            begin_local(engine, me, body.request_id);
          } else {
            begin_interdomain(engine, body.request_id);
          }
        } else if constexpr (std::is_same_v<T, AvailabilityReply>) {
          if (on_local_reply(engine, me, body)) return;
          auto it = flows_.find(body.request_id);
          if (it == flows_.end() || !current(engine, body.request_id, engine.session(body.request_id).attempt)) return;
          auto& flow = it->second;
          if (!body.ok) {
            fail(engine, me, body.request_id, Errc::NoRoute, to_string(body.node));
          } else if (me == flow.origin) {
            send_proposal(engine, body.request_id);
          } else if (me == flow.dest && flow.source_proposal) {
            const auto& s = engine.session(body.request_id);
            engine.refresh_direct(me);
            const Proposal own = propose(engine.topology(), engine.controller(me).view, s.request.app_src.node,
                                         s.request.app_dst.node, s.request.bits, engine.now());
            Path agreed;
            try {
              agreed = peer_negotiate(*flow.source_proposal, own);
            } catch (const Error& e) {
              fail(engine, me, body.request_id, e.code(), "interdomain");
              return;
            }
            const SimTime freshness = agreed == own.backbone ? own.freshness : flow.source_proposal->freshness;
            const InterdomainRoute reply{body.request_id, agreed, RouteStage::Agree, freshness, s.attempt};
            if (!forward(engine, me, flow.origin, reply)) {
              fail(engine, me, body.request_id, Errc::CoordinatorUnavailable, engine.controller(flow.origin).name);
            }
          }
        } else if constexpr (std::is_same_v<T, InterdomainRoute>) {
          if (!current(engine, body.request_id, body.attempt)) return;
          auto& flow = flows_.at(body.request_id);
          auto& s = engine.session(body.request_id);
          if (body.stage == RouteStage::Propose && me == flow.dest) {
            flow.source_proposal = Proposal{body.backbone_path, body.freshness};
            engine.send(me, s.request.app_dst.node, AvailabilityQuery{body.request_id, s.request.app_dst.node});
          } else if (body.stage == RouteStage::Agree && me == flow.origin) {
            s.backbone_path = body.backbone_path;
            s.advance(SessionState::Establishing);
            start_reservations(engine, body.request_id);
          }
        } else if constexpr (std::is_same_v<T, ReserveRequest>) {
          const ControllerId requester = table_.peer(body.priority.origin);
          submit(engine, me, Reservation{body.request_id, body.links, body.bits, body.priority, {}, body.attempt,
                                         requester});
        } else if constexpr (std::is_same_v<T, ReserveGrant> || std::is_same_v<T, ReserveDeny>) {
          const ControllerId owner = table_.peer(link_owner(engine.topology(), body.links.front()));
          on_reservation_answer(engine, body.request_id, body.attempt, owner, std::is_same_v<T, ReserveGrant>);
        } else if constexpr (std::is_same_v<T, IntradomainRouteSet>) {
          if (!current(engine, body.request_id, body.attempt)) return;
          auto& flow = flows_.at(body.request_id);
          auto& s = engine.session(body.request_id);
          if (me == flow.dest) {
            flow.src_path = body.path;
            const NodeId entry = s.backbone_path.back();
            const NodeId dst = s.request.app_dst.node;
            std::optional<Path> path = Path{entry};
            if (entry != dst) {
              engine.refresh_direct(me);
              path = compute_route(engine.topology(), engine.controller(me).view,
                                   RouteQuery{entry, dst, s.request.bits, engine.now(), s.dest_domain});
            }
            if (!path) {
              fail(engine, me, body.request_id, Errc::NoRoute, to_string(s.dest_domain));
            } else if (!forward(engine, me, flow.origin, IntradomainRouteSet{body.request_id, *path, s.attempt})) {
              fail(engine, me, body.request_id, Errc::CoordinatorUnavailable, engine.controller(flow.origin).name);
            }
            return;
          }
          if (me != flow.origin || !flow.src_path) return;
          flow.dst_path = body.path;
          s.intradomain_paths[s.source_domain] = *flow.src_path;
          s.intradomain_paths[s.dest_domain] = *flow.dst_path;
          Path full = *flow.src_path;
          full.insert(full.end(), s.backbone_path.begin() + 1, s.backbone_path.end());
          full.insert(full.end(), flow.dst_path->begin() + 1, flow.dst_path->end());
          std::string hop;
          if (auto err = engine.start_relay(body.request_id, me, full, &hop)) fail(engine, me, body.request_id, *err, hop);
        } else if constexpr (std::is_same_v<T, Confirm>) {
          if (!current(engine, body.request_id, body.attempt) || body.kind != ConfirmKind::Delivered) return;
          const auto& flow = flows_.at(body.request_id);
          forward(engine, me, flow.origin, ConnectionEnd{body.request_id, body.attempt});
        } else if constexpr (std::is_same_v<T, ConnectionEnd>) {
          if (!current(engine, body.request_id, body.attempt)) return;
          auto& s = engine.session(body.request_id);
          const auto& flow = flows_.at(body.request_id);
          if (me == flow.origin) {
            forward(engine, me, flow.dest, ConnectionEnd{body.request_id, body.attempt});
            engine.send(me, s.request.app_src, KeyReady{body.request_id, s.key_id});
          } else if (me == flow.dest) {
            engine.send(me, s.request.app_dst, KeyReady{body.request_id, s.key_id});
            s.advance(SessionState::Closed);
          }
        } else if constexpr (std::is_same_v<T, ErrorReport>) {
          if (!engine.has_session(body.request_id)) return;
          engine.send(me, engine.session(body.request_id).request.app_src, body);
        } else if constexpr (std::is_same_v<T, StateSync>) {
          if (!seen_.emplace(me, body.origin, body.version).second) return;
          const bool changed = apply_state_update(engine.controller(me).view, body.entries);
          const auto* from = std::get_if<ControllerId>(&msg.from);
          for (ControllerId n : table_.neighbours(me)) {
            if ((from && n == *from) || n == body.origin) continue;
            engine.send(me, n, body);
          }
          if (changed) check_reroute(engine, me);
        }
      },
      msg.body);
}

void DistributedProtocol::on_relay_complete(Engine& engine, RequestId id) {
  if (complete_local(engine, id)) return;
  auto& s = engine.session(id);
  if (terminal(s)) return;
  s.advance(SessionState::Delivering);
  engine.send(s.request.app_dst.node, flows_.at(id).dest, Confirm{id, ConfirmKind::Delivered, s.attempt});
}

void DistributedProtocol::on_links_consumed(Engine& engine, const std::vector<LinkId>& links, RequestId id) {
  for (auto& [owner, arb] : arbiters_) arb.release(id);
  for (const auto& [c, d] : table_.peers) {
    const auto& info = engine.controller(c);
    if (!info.serving()) continue;
    if (std::none_of(links.begin(), links.end(), [&](LinkId l) { return info.direct.contains(l); })) continue;
    engine.refresh_direct(c);
    gossip_state(engine, c);
  }
}

void DistributedProtocol::on_timer(Engine& engine, const Timer& timer) {
  const ControllerId c = timer.controller;
  switch (timer.kind) {
    case TimerKind::PeriodicSync:
      if (engine.controller(c).serving()) {
        engine.refresh_direct(c);
        gossip_state(engine, c);
        check_reroute(engine, c);
      }
      engine.schedule_timer(engine.now() + engine.config().sync_period, timer);
      break;
    case TimerKind::ArbiterClose: {
      if (!engine.controller(c).serving()) {
        engine.schedule_timer(engine.now() + engine.config().reserve_window, timer);
        break;
      }
      engine.refresh_direct(c);
      const auto& view = engine.controller(c).view;
      auto decisions = arbiters_[c].decide([&](LinkId l) -> std::uint64_t {
        auto it = view.link_states.find(l);
        return it == view.link_states.end() || !it->second.up ? 0 : it->second.bits_available;
      });
      for (const auto& r : decisions) {
        const bool granted = r.state == ReservationState::Granted;
        if (granted) {
          engine.schedule_timer(engine.now() + engine.config().reserve_lease,
                                Timer{TimerKind::LeaseExpiry, c, r.request_id.value});
        }
        if (r.requester == c) {
          on_reservation_answer(engine, r.request_id, r.attempt, c, granted);
          continue;
        }
        MessageBody answer = granted ? MessageBody{ReserveGrant{r.request_id, r.links, r.priority, r.attempt}}
                                     : MessageBody{ReserveDeny{r.request_id, r.links, r.priority, r.attempt}};
        forward(engine, c, r.requester, std::move(answer));
      }
      break;
    }
    case TimerKind::LeaseExpiry:
      arbiters_[c].release(RequestId{timer.tag});
      break;
    default:
      break;
  }
}

void DistributedProtocol::on_fault(Engine& engine, const FaultEntry& fault) {
  std::set<LinkId> touched;
  std::optional<ControllerId> returning;
  switch (fault.action) {
    case FaultAction::LinkDown:
    case FaultAction::LinkUp:
      touched.insert(LinkId{static_cast<std::uint32_t>(std::stoul(fault.target.substr(1)))});
      break;
    case FaultAction::DomainIsolate:
    case FaultAction::DomainRestore: {
      const DomainId d{static_cast<std::uint32_t>(std::stoul(fault.target.substr(1)))};
      touched = engine.topology().domain_scope(d);
      if (fault.action == FaultAction::DomainRestore) returning = table_.peer(d);
      break;
    }
    case FaultAction::ControllerUp:
      returning = engine.controller_by_name(fault.target);
      break;
    case FaultAction::ControllerDown:
      break;
  }
  if (returning && engine.controller(*returning).serving()) {
    engine.refresh_direct(*returning);
    gossip_state(engine, *returning);
  }
  for (const auto& [c, d] : table_.peers) {
    const auto& info = engine.controller(c);
    if (!info.serving() || c == returning) continue;
    if (std::none_of(touched.begin(), touched.end(), [&](LinkId l) { return info.direct.contains(l); })) continue;
    gossip_state(engine, c);
    check_reroute(engine, c);
  }
}

PeerTable install_distributed(Engine& engine, const PeerOptions& options) {
  std::map<DomainId, ControllerId> ids;
  for (const auto& d : engine.topology().domains) {
    auto it = options.names.find(d.id);
    const std::string name = it != options.names.end() ? it->second : "P-" + to_string(d.id);
    ids[d.id] = engine.add_controller(name, ControllerRole{Level::Peer, std::nullopt}, d.id, std::nullopt, false);
  }
  PeerTable table = make_peer_table(engine.topology(), ids);
  engine.set_protocol(std::make_unique<DistributedProtocol>(table, options));
  return table;
}

}  // namespace qkdnet
