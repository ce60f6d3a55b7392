#include "qkdnet/hier_integration.hpp"

#include <algorithm>
#include <deque>
#include <functional>

namespace qkdnet {

std::vector<ControllerId> Hierarchy::path_to_root(ControllerId c) const {
  std::vector<ControllerId> path{c};
  while (path.back() != root) {
    auto it = parent.find(path.back());
    if (it == parent.end()) throw Error(Errc::UnknownEntity, "controller c" + std::to_string(c.value) + " not in tree");
    path.push_back(it->second);
    if (path.size() > parent.size() + 1) throw Error(Errc::InvalidState, "controller tree has a cycle");
  }
  return path;
}

bool Hierarchy::in_subtree(ControllerId node, ControllerId top) const {
  const auto p = path_to_root(node);
  return std::find(p.begin(), p.end(), top) != p.end();
}

ControllerId Hierarchy::lca(ControllerId a, ControllerId b) const {
  const auto pa = path_to_root(a);
  for (ControllerId c : path_to_root(b)) {
    if (std::find(pa.begin(), pa.end(), c) != pa.end()) return c;
  }
  return root;
}

std::vector<ControllerId> Hierarchy::tree_path(ControllerId a, ControllerId b) const {
  const ControllerId top = lca(a, b);
  std::vector<ControllerId> up;
  for (ControllerId c : path_to_root(a)) {
    up.push_back(c);
    if (c == top) break;
  }
  std::vector<ControllerId> down;
  for (ControllerId c : path_to_root(b)) {
    if (c == top) break;
    down.push_back(c);
  }
  up.insert(up.end(), down.rbegin(), down.rend());
  return up;
}

ControllerId Hierarchy::next_hop(ControllerId from, ControllerId to) const {
  if (from == to) return to;
  return tree_path(from, to).at(1);
}

ControllerId Hierarchy::l1(DomainId d) const {
  auto it = l1_of.find(d);
  if (it == l1_of.end()) throw Error(Errc::UnknownEntity, "no L1 controller for " + to_string(d));
  return it->second;
}

HierarchySpec default_hierarchy(const Topology& topology) {
  HierarchySpec spec;
  spec.controllers.push_back({"L3", std::nullopt, std::nullopt, false});
  for (const auto& d : topology.domains) {
    spec.controllers.push_back({"L1-" + to_string(d.id), "L3", d.id, false});
  }
  return spec;
}

std::vector<std::string> check_hierarchy(const HierarchySpec& spec, const Topology& topology) {
  std::vector<std::string> problems;
  std::map<std::string, const HierarchySpec::Entry*> by_name;
  std::size_t roots = 0;
  std::map<DomainId, int> l1_count;
  for (const auto& e : spec.controllers) {
    if (!by_name.emplace(e.name, &e).second) problems.push_back("duplicate controller name " + e.name);
    if (!e.parent) ++roots;
    if (e.domain) {
      if (!topology.has_domain(*e.domain)) problems.push_back(e.name + " manages unknown " + to_string(*e.domain));
      ++l1_count[*e.domain];
    }
  }
  if (roots != 1) problems.push_back("expected exactly one root controller, found " + std::to_string(roots));
  for (const auto& e : spec.controllers) {
    if (e.parent && !by_name.contains(*e.parent)) {
      problems.push_back(e.name + " has unknown parent " + *e.parent);
    } else if (e.parent && by_name.at(*e.parent)->domain) {
      problems.push_back(e.name + " is placed under L1 controller " + *e.parent);
    }
    if (e.domain && !e.parent) problems.push_back("L1 controller " + e.name + " cannot be the root");
  }
  for (const auto& e : spec.controllers) {
    std::set<std::string> seen{e.name};
    const auto* at = &e;
    while (at->parent && by_name.contains(*at->parent)) {
      if (!seen.insert(*at->parent).second) {
        problems.push_back("cycle through " + e.name);
        break;
      }
      at = by_name.at(*at->parent);
    }
  }
  for (const auto& d : topology.domains) {
    const int count = l1_count[d.id];
    if (count != 1) problems.push_back(to_string(d.id) + " has " + std::to_string(count) + " L1 controllers");
  }
  return problems;
}

ControllerId escalate(const Hierarchy& h, const Engine& engine, ControllerId l1, const KeyServiceRequest& req) {
  const ControllerId dest = h.l1(domain_of(req.app_dst.node));
  if (dest == l1) throw Error(Errc::InvalidRequest, "local requests are not escalated");
  for (ControllerId c : h.tree_path(l1, dest)) {
    const auto& info = engine.controller(c);
    if (!info.serving() && !info.has_standby) {
      throw Error(Errc::CoordinatorUnavailable, info.name + " is down without a standby");
    }
  }
  return h.lca(l1, dest);
}

Hierarchy install_hierarchical(Engine& engine, const HierarchySpec& spec) {
  const auto& topo = engine.topology();
  if (auto problems = check_hierarchy(spec, topo); !problems.empty()) {
    std::string text = "invalid hierarchy:";
    for (const auto& p : problems) text += " " + p + ";";
    throw Error(Errc::ScenarioError, text);
  }

  std::map<std::string, std::vector<const HierarchySpec::Entry*>> children;
  const HierarchySpec::Entry* root = nullptr;
  for (const auto& e : spec.controllers) {
    if (e.parent) {
      children[*e.parent].push_back(&e);
    } else {
      root = &e;
    }
  }

  // Regional scope = union of the domains below.
  std::map<std::string, std::set<LinkId>> scope;
  std::function<std::set<LinkId>(const HierarchySpec::Entry&)> collect = [&](const HierarchySpec::Entry& e) {
    std::set<LinkId> s;
    if (e.domain) s = topo.domain_scope(*e.domain);
    for (const auto* c : children[e.name]) {
      auto sub = collect(*c);
      s.insert(sub.begin(), sub.end());
    }
    scope[e.name] = s;
    return s;
  };
  collect(*root);

  Hierarchy h;
  std::map<std::string, ControllerId> ids;
  std::deque<const HierarchySpec::Entry*> queue{root};
  while (!queue.empty()) {
    const auto* e = queue.front();
    queue.pop_front();
    ControllerRole role;
    std::optional<std::set<LinkId>> view_scope;
    if (!e->parent) {
      role.level = Level::L3;
    } else {
      role.level = e->domain ? Level::L1 : Level::L2;
      role.parent = ids.at(*e->parent);
      view_scope = scope.at(e->name);
    }
    const ControllerId id = engine.add_controller(e->name, role, e->domain, view_scope, e->standby);
    ids[e->name] = id;
    if (role.parent) h.parent[id] = *role.parent;
    h.standby[id] = e->standby ? std::optional<ControllerId>(id) : std::nullopt;
    if (e->domain) h.l1_of[*e->domain] = id;
    for (const auto* c : children[e->name]) queue.push_back(c);
  }
  h.root = ids.at(root->name);
  engine.set_protocol(std::make_unique<HierarchicalProtocol>(h));
  return h;
}

// ---- protocol ---------------------------------------------------------------

void HierarchicalProtocol::start(Engine& engine) {
  for (const auto& [domain, l1] : h_.l1_of) {
    engine.schedule_timer(engine.now() + engine.config().sync_period, Timer{TimerKind::PeriodicSync, l1, 0});
  }
}

ControllerId HierarchicalProtocol::entry_controller(const Engine&, DomainId domain) const { return h_.l1(domain); }

bool HierarchicalProtocol::forward(Engine& engine, ControllerId me, ControllerId target, MessageBody body) {
  const ControllerId next = h_.next_hop(me, target);
  return engine.send(me, next, std::move(body), target) == SendStatus::Sent;
}

void HierarchicalProtocol::fail(Engine& engine, ControllerId me, RequestId id, Errc code, const std::string& segment) {
  auto it = flows_.find(id);
  const ControllerId origin = it != flows_.end() ? it->second.origin : me;
  if (me == origin) {
    fail_to_app(engine, me, id, code, segment);
    return;
  }
  engine.fail_session(id, code, segment);
  forward(engine, me, origin, ErrorReport{id, code, segment, engine.session(id).attempt});
}

void HierarchicalProtocol::begin_interdomain(Engine& engine, RequestId id) {
  auto& s = engine.session(id);
  auto& flow = flows_[id];
  flow.origin = h_.l1(s.source_domain);
  flow.dest = h_.l1(s.dest_domain);
  flow.src_path.reset();
  flow.dst_path.reset();
  flow.teardown = false;
  s.coordinator = h_.lca(flow.origin, flow.dest);
  engine.send(flow.origin, s.request.app_src.node, AvailabilityQuery{id, s.request.app_src.node});
}

void HierarchicalProtocol::on_message(Engine& engine, const Message& msg) {
  const ControllerId me = std::get<ControllerId>(msg.to);
  if (msg.final_to && *msg.final_to != me) {
    if (!forward(engine, me, *msg.final_to, msg.body)) {
      const auto id = request_of(msg.body);
      const bool is_error = std::holds_alternative<ErrorReport>(msg.body);
      if (id && !is_error && current(engine, *id, attempt_of(msg.body))) {
        fail(engine, me, *id, Errc::CoordinatorUnavailable, engine.controller(h_.next_hop(me, *msg.final_to)).name);
      }
    }
    return;
  }

  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, KeyServiceRequest>) {
          if (!accept_request(engine, me, body)) return;
          const auto domain = *engine.controller(me).domain;
          if (classify_request(engine.topology(), domain, body) == RequestScope::Local) {
            begin_local(engine, me, body.request_id);
          } else {
            begin_interdomain(engine, body.request_id);
          }
        } else if constexpr (std::is_same_v<T, AvailabilityReply>) {
          if (on_local_reply(engine, me, body)) return;
          auto it = flows_.find(body.request_id);
          if (it == flows_.end() || !current(engine, body.request_id, engine.session(body.request_id).attempt)) return;
          const auto& flow = it->second;
          const auto& s = engine.session(body.request_id);
          if (!body.ok) {
            fail(engine, me, body.request_id, Errc::NoRoute, to_string(body.node));
          } else if (me == flow.origin) {
            const ControllerId next = h_.next_hop(me, flow.dest);
            if (engine.send(me, next, Escalate{body.request_id, s.request, s.attempt}) == SendStatus::Unreachable) {
              fail(engine, me, body.request_id, Errc::CoordinatorUnavailable, engine.controller(next).name);
            }
          } else if (me == flow.dest) {
            if (!forward(engine, me, *s.coordinator, Confirm{body.request_id, ConfirmKind::Availability, s.attempt})) {
              fail(engine, me, body.request_id, Errc::CoordinatorUnavailable, engine.controller(*s.coordinator).name);
            }
          }
        } else if constexpr (std::is_same_v<T, Escalate>) {
          if (!current(engine, body.request_id, body.attempt)) return;
          const auto& flow = flows_.at(body.request_id);
          if (me == flow.dest) {
            const NodeId qn = body.payload.app_dst.node;
            engine.send(me, qn, AvailabilityQuery{body.request_id, qn});
            return;
          }
          const ControllerId next = h_.next_hop(me, flow.dest);
          if (engine.send(me, next, body) == SendStatus::Unreachable) {
            fail(engine, me, body.request_id, Errc::CoordinatorUnavailable, engine.controller(next).name);
          }
        } else if constexpr (std::is_same_v<T, Confirm>) {
          if (!current(engine, body.request_id, body.attempt)) return;
          auto& s = engine.session(body.request_id);
          const auto& flow = flows_.at(body.request_id);
          if (body.kind == ConfirmKind::Delivered) {
            if (me == flow.origin && !flow.teardown) teardown(engine, body.request_id);
            return;
          }
          const auto& view = engine.controller(me).view;
          auto route = compute_route(engine.topology(), view,
                                     RouteQuery{s.request.app_src.node, s.request.app_dst.node, s.request.bits,
                                                engine.now(), std::nullopt});
          if (!route) {
            fail(engine, me, body.request_id, Errc::NoRoute, "interdomain");
            return;
          }
          s.backbone_path = split_route(*route, s.source_domain, s.dest_domain).backbone;
          s.advance(SessionState::Establishing);
          const InterdomainRoute order{body.request_id, s.backbone_path, RouteStage::Order, 0, s.attempt};
          for (ControllerId l1 : {flow.origin, flow.dest}) {
            if (!forward(engine, me, l1, order)) {
              fail(engine, me, body.request_id, Errc::CoordinatorUnavailable, engine.controller(l1).name);
              return;
            }
          }
        } else if constexpr (std::is_same_v<T, InterdomainRoute>) {
          if (!current(engine, body.request_id, body.attempt)) return;
          const auto& s = engine.session(body.request_id);
          const auto& flow = flows_.at(body.request_id);
          const bool source_side = me == flow.origin;
          const NodeId from = source_side ? s.request.app_src.node : body.backbone_path.back();
          const NodeId to = source_side ? body.backbone_path.front() : s.request.app_dst.node;
          const DomainId domain = source_side ? s.source_domain : s.dest_domain;
          std::optional<Path> path = Path{from};
          if (from != to) {
            engine.refresh_direct(me);
            path = compute_route(engine.topology(), engine.controller(me).view,
                                 RouteQuery{from, to, s.request.bits, engine.now(), domain});
          }
          if (!path) {
            fail(engine, me, body.request_id, Errc::NoRoute, to_string(domain));
            return;
          }
          if (!forward(engine, me, *s.coordinator, IntradomainRouteSet{body.request_id, *path, s.attempt})) {
            fail(engine, me, body.request_id, Errc::CoordinatorUnavailable, engine.controller(*s.coordinator).name);
          }
        } else if constexpr (std::is_same_v<T, IntradomainRouteSet>) {
          if (!current(engine, body.request_id, body.attempt)) return;
          auto& s = engine.session(body.request_id);
          auto& flow = flows_.at(body.request_id);
          if (domain_of(body.path.front()) == s.source_domain) {
            flow.src_path = body.path;
          } else {
            flow.dst_path = body.path;
          }
          if (!flow.src_path || !flow.dst_path || !s.key_id.empty()) return;
          s.intradomain_paths[s.source_domain] = *flow.src_path;
          s.intradomain_paths[s.dest_domain] = *flow.dst_path;
          Path full = *flow.src_path;
          full.insert(full.end(), s.backbone_path.begin() + 1, s.backbone_path.end());
          full.insert(full.end(), flow.dst_path->begin() + 1, flow.dst_path->end());
          std::string hop;
          if (auto err = engine.start_relay(body.request_id, me, full, &hop)) {
            fail(engine, me, body.request_id, *err, hop);
          }
        } else if constexpr (std::is_same_v<T, ConnectionEnd>) {
          if (!engine.has_session(body.request_id)) return;
          auto& s = engine.session(body.request_id);
          if (s.state == SessionState::Delivering && body.attempt == s.attempt) s.advance(SessionState::Closed);
        } else if constexpr (std::is_same_v<T, ErrorReport>) {
          if (!engine.has_session(body.request_id)) return;
          engine.send(me, engine.session(body.request_id).request.app_src, body);
        } else if constexpr (std::is_same_v<T, StateSync>) {
          apply_state_update(engine.controller(me).view, body.entries);
          if (auto p = h_.parent.find(me); p != h_.parent.end()) engine.send(me, p->second, body);
        }
      },
      msg.body);
}

void HierarchicalProtocol::teardown(Engine& engine, RequestId id) {
  auto& s = engine.session(id);
  auto it = flows_.find(id);
  if (it == flows_.end() || s.state != SessionState::Delivering || it->second.teardown) {
    throw Error(Errc::InvalidState, "teardown of request " + std::to_string(id.value) + " in state " +
                                        std::string(to_string(s.state)) +
                                        (it != flows_.end() && it->second.teardown ? " (already torn down)" : ""));
  }
  it->second.teardown = true;
  forward(engine, it->second.origin, it->second.dest, ConnectionEnd{id, s.attempt});
}

void HierarchicalProtocol::on_relay_complete(Engine& engine, RequestId id) {
  if (complete_local(engine, id)) return;
  auto& s = engine.session(id);
  if (terminal(s)) return;
  s.advance(SessionState::Delivering);
  engine.send(s.request.app_src.node, s.request.app_src, KeyReady{id, s.key_id});
  engine.send(s.request.app_dst.node, s.request.app_dst, KeyReady{id, s.key_id});
  engine.send(s.request.app_src.node, flows_.at(id).origin, Confirm{id, ConfirmKind::Delivered, s.attempt});
}

void HierarchicalProtocol::push_sync(Engine& engine, ControllerId l1) {
  if (!engine.controller(l1).serving()) return;
  auto p = h_.parent.find(l1);
  if (p == h_.parent.end()) return;
  engine.send(l1, p->second, StateSync{l1, ++sync_version_[l1], engine.view_snapshot(l1)});
}

void HierarchicalProtocol::on_links_consumed(Engine& engine, const std::vector<LinkId>& links, RequestId) {
  for (const auto& [domain, l1] : h_.l1_of) {
    const auto& direct = engine.controller(l1).direct;
    if (std::none_of(links.begin(), links.end(), [&](LinkId l) { return direct.contains(l); })) continue;
    if (!engine.controller(l1).serving()) continue;
    engine.refresh_direct(l1);
    push_sync(engine, l1);
  }
}

void HierarchicalProtocol::on_timer(Engine& engine, const Timer& timer) {
  switch (timer.kind) {
    case TimerKind::PeriodicSync:
      if (engine.controller(timer.controller).serving()) {
        engine.refresh_direct(timer.controller);
        push_sync(engine, timer.controller);
      }
      engine.schedule_timer(engine.now() + engine.config().sync_period, timer);
      break;
    case TimerKind::HeartbeatMiss: {
      const auto& info = engine.controller(timer.controller);
      if (timer.tag == down_epoch_[timer.controller] && !info.up() && !info.standby_active) {
        failover(engine, timer.controller);
      }
      break;
    }
    default:
      break;
  }
}

ControllerId HierarchicalProtocol::failover(Engine& engine, ControllerId c) {
  auto& info = engine.controller(c);
  if (info.up() || info.standby_active) return c;
  if (!info.has_standby) throw Error(Errc::CoordinatorUnavailable, info.name + " has no standby");
  info.standby_active = true;
  info.view = info.standby_view;
  failed_over_.insert(c);
  retry_or_fail(engine, c, true);
  return c;
}

bool HierarchicalProtocol::involves(RequestId id, ControllerId c) const {
  auto it = flows_.find(id);
  if (it == flows_.end()) return false;
  const auto path = h_.tree_path(it->second.origin, it->second.dest);
  return std::find(path.begin(), path.end(), c) != path.end();
}

void HierarchicalProtocol::retry_or_fail(Engine& engine, ControllerId c, bool retry) {
  std::vector<RequestId> ids;
  for (const auto& [id, s] : engine.sessions()) {
    if (terminal(s)) continue;
    const bool local_here = s.local() && h_.l1_of.contains(s.source_domain) && h_.l1(s.source_domain) == c;
    if (local_here || involves(id, c)) ids.push_back(id);
  }
  const std::string name = engine.controller(c).name;
  for (RequestId id : ids) {
    auto& s = engine.session(id);
    auto flow = flows_.find(id);
    if (!retry) {
      // A relay already under way completes on the data plane regardless.
      if (!s.key_id.empty()) continue;
      const ControllerId origin = flow != flows_.end() ? flow->second.origin : c;
      if (origin != c && engine.controller(origin).serving()) {
        fail_to_app(engine, origin, id, Errc::CoordinatorUnavailable, name);
      } else {
        engine.fail_session(id, Errc::CoordinatorUnavailable, name);
      }
      continue;
    }
    if (s.state == SessionState::Delivering) {
      if (flow != flows_.end() && flow->second.teardown) {
        forward(engine, flow->second.origin, flow->second.dest, ConnectionEnd{id, s.attempt});
      }
      continue;
    }
    if (!s.key_id.empty()) continue;
    if (s.attempt > 1) {
      const ControllerId origin = flow != flows_.end() ? flow->second.origin : c;
      fail_to_app(engine, origin, id, Errc::CoordinatorUnavailable, name);
      continue;
    }
    ++s.attempt;
    s.state = SessionState::Routing;
    s.coordinator.reset();
    s.backbone_path.clear();
    s.intradomain_paths.clear();
    if (s.local()) {
      begin_local(engine, c, id);
    } else {
      begin_interdomain(engine, id);
    }
  }
}

void HierarchicalProtocol::on_fault(Engine& engine, const FaultEntry& fault) {
  auto controller_down = [&](ControllerId c) {
    const std::uint64_t epoch = ++down_epoch_[c];
    const auto& info = engine.controller(c);
    if (info.has_standby) {
      const SimTime at = engine.now() + engine.config().heartbeat * engine.config().heartbeat_misses;
      engine.schedule_timer(at, Timer{TimerKind::HeartbeatMiss, c, epoch});
    } else {
      retry_or_fail(engine, c, false);
    }
  };
  auto controller_up = [&](ControllerId c) {
    ++down_epoch_[c];
    const auto& info = engine.controller(c);
    if (!info.up()) return;
    if (failed_over_.erase(c) == 0 && info.has_standby) retry_or_fail(engine, c, true);
    engine.refresh_direct(c);
    if (info.domain) push_sync(engine, c);
  };
  auto sync_observers = [&](const std::set<LinkId>& links) {
    for (const auto& [domain, l1] : h_.l1_of) {
      const auto& direct = engine.controller(l1).direct;
      if (std::any_of(links.begin(), links.end(), [&](LinkId l) { return direct.contains(l); })) {
        push_sync(engine, l1);
      }
    }
  };

  switch (fault.action) {
    case FaultAction::ControllerDown:
      controller_down(*engine.controller_by_name(fault.target));
      break;
    case FaultAction::ControllerUp:
      controller_up(*engine.controller_by_name(fault.target));
      break;
    case FaultAction::LinkDown:
    case FaultAction::LinkUp: {
      const LinkId l{static_cast<std::uint32_t>(std::stoul(fault.target.substr(1)))};
      sync_observers({l});
      break;
    }
    case FaultAction::DomainIsolate:
    case FaultAction::DomainRestore: {
      const DomainId d{static_cast<std::uint32_t>(std::stoul(fault.target.substr(1)))};
      if (fault.action == FaultAction::DomainIsolate) {
        controller_down(h_.l1(d));
      } else {
        controller_up(h_.l1(d));
      }
      sync_observers(engine.topology().domain_scope(d));
      break;
    }
  }
}

}  // namespace qkdnet
