#include "qkdnet/sim_engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "qkdnet/error.hpp"

namespace qkdnet {

namespace {

constexpr std::pair<FaultAction, std::string_view> kFaultNames[] = {
    {FaultAction::ControllerDown, "ControllerDown"}, {FaultAction::ControllerUp, "ControllerUp"},
    {FaultAction::LinkDown, "LinkDown"},             {FaultAction::LinkUp, "LinkUp"},
    {FaultAction::DomainIsolate, "DomainIsolate"},   {FaultAction::DomainRestore, "DomainRestore"},
};

bool is_down_action(FaultAction a) {
  return a == FaultAction::ControllerDown || a == FaultAction::LinkDown || a == FaultAction::DomainIsolate;
}

std::optional<std::uint32_t> parse_prefixed(std::string_view text, char prefix) {
  if (text.size() < 2 || text.front() != prefix) return std::nullopt;
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data() + 1, text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

}  // namespace

std::string_view to_string(FaultAction a) {
  for (const auto& [action, name] : kFaultNames) {
    if (action == a) return name;
  }
  return "?";
}

FaultAction fault_action_from_string(std::string_view s) {
  for (const auto& [action, name] : kFaultNames) {
    if (name == s) return action;
  }
  throw Error(Errc::ScenarioError, "unknown fault action '" + std::string(s) + "'");
}

std::vector<std::string> check_nesting(const FaultScript& script) {
  std::vector<const FaultEntry*> ordered;
  for (const auto& e : script.entries) ordered.push_back(&e);
  std::stable_sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->at < b->at; });

  std::map<std::string, int> depth;
  std::vector<std::string> problems;
  for (const auto* e : ordered) {
    auto& d = depth[e->target];
    if (is_down_action(e->action)) {
      ++d;
    } else if (d == 0) {
      problems.push_back(std::string(to_string(e->action)) + " on " + e->target + " at t=" +
                         std::to_string(e->at) + "us without a preceding down");
    } else {
      --d;
    }
  }
  return problems;
}

const LatencyClass& LatencyModel::of(Channel c) const {
  switch (c) {
    case Channel::Nbi: return nbi;
    case Channel::Sbi: return sbi;
    case Channel::Controller: return controller;
    case Channel::DataPlane: return data_plane;
  }
  return controller;
}

SimTime LatencyModel::delay(Channel c, double km) const {
  const auto& cls = of(c);
  const auto us = std::llround((cls.base_ms + cls.per_km_ms * km) * 1000.0);
  return std::max<SimTime>(us, 1);
}

Engine::Engine(Topology topology, EngineConfig config)
    : topology_(std::move(topology)),
      config_(config),
      store_(topology_, config_.rate, config_.seed, config_.initial_bits) {}

Engine::~Engine() = default;

void Engine::set_protocol(std::unique_ptr<Protocol> protocol) {
  protocol_ = std::move(protocol);
  protocol_->start(*this);
}

ControllerId Engine::add_controller(std::string name, ControllerRole role, std::optional<DomainId> domain,
                                    std::optional<std::set<LinkId>> scope, bool has_standby) {
  if (controller_by_name(name)) throw Error(Errc::ScenarioError, "duplicate controller name " + name);
  ControllerInfo info;
  info.id = ControllerId{static_cast<std::uint32_t>(controllers_.size())};
  info.name = std::move(name);
  info.role = role;
  info.domain = domain;
  info.view = make_view(topology_, std::move(scope));
  if (domain) info.direct = topology_.domain_scope(*domain);

  // Bootstrap from ground truth at the current time.
  std::set<LinkId> visible;
  for (const auto& [id, acc] : store_.accounts()) {
    if (info.view.in_scope(id)) visible.insert(id);
  }
  for (LinkId id : visible) store_.advance(id, now_);
  apply_state_update(info.view, observe_links(store_, visible, now_));
  info.standby_view = info.view;
  info.has_standby = has_standby;
  if (role.parent) controller(*role.parent).children.push_back(info.id);
  controllers_.push_back(std::move(info));
  return controllers_.back().id;
}

ControllerInfo& Engine::controller(ControllerId id) {
  if (id.value >= controllers_.size()) throw Error(Errc::UnknownEntity, "no controller c" + std::to_string(id.value));
  return controllers_[id.value];
}

const ControllerInfo& Engine::controller(ControllerId id) const {
  if (id.value >= controllers_.size()) throw Error(Errc::UnknownEntity, "no controller c" + std::to_string(id.value));
  return controllers_[id.value];
}

std::optional<ControllerId> Engine::controller_by_name(std::string_view name) const {
  for (const auto& c : controllers_) {
    if (c.name == name) return c.id;
  }
  return std::nullopt;
}

std::string Engine::endpoint_name(const Endpoint& e) const {
  if (const auto* c = std::get_if<ControllerId>(&e)) return controller(*c).name;
  if (const auto* n = std::get_if<NodeId>(&e)) return to_string(*n);
  return to_string(std::get<AppId>(e));
}

void Engine::schedule(Event event) {
  if (event.time < now_) {
    throw Error(Errc::SchedulingError,
                "event at " + std::to_string(event.time) + "us is before now (" + std::to_string(now_) + "us)");
  }
  event.seq = next_seq_++;
  queue_.push(std::move(event));
}

void Engine::schedule_timer(SimTime at, Timer timer) { schedule(Event{at, 0, timer}); }

void Engine::schedule_request(KeyServiceRequest request) {
  if (request.bits == 0) throw Error(Errc::InvalidRequest, "zero-bit request " + std::to_string(request.request_id.value));
  const SimTime at = request.issued_at;
  schedule(Event{at, 0, Arrival{std::move(request)}});
}

void Engine::inject_fault(const FaultEntry& fault) {
  switch (fault.action) {
    case FaultAction::ControllerDown:
    case FaultAction::ControllerUp:
      if (!controller_by_name(fault.target)) throw Error(Errc::UnknownEntity, "no controller named " + fault.target);
      break;
    case FaultAction::LinkDown:
    case FaultAction::LinkUp: {
      auto id = parse_prefixed(fault.target, 'l');
      if (!id || !topology_.has_link(LinkId{*id})) throw Error(Errc::UnknownEntity, "no link " + fault.target);
      break;
    }
    case FaultAction::DomainIsolate:
    case FaultAction::DomainRestore: {
      auto id = parse_prefixed(fault.target, 'd');
      if (!id || !topology_.has_domain(DomainId{*id})) throw Error(Errc::UnknownEntity, "no domain " + fault.target);
      break;
    }
  }
  schedule(Event{fault.at, 0, fault});
}

void Engine::run_until(SimTime t_end) {
  if (t_end < now_) throw Error(Errc::SchedulingError, "run_until target is in the past");
  if (!protocol_) throw Error(Errc::InvalidState, "engine has no protocol");
  while (!queue_.empty() && queue_.top().time <= t_end) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    dispatch(ev);
  }
  now_ = t_end;
  store_.advance_all(now_);
}

void Engine::dispatch(const Event& event) {
  std::visit(
      [&](const auto& payload) {
        using T = std::decay_t<decltype(payload)>;
        if constexpr (std::is_same_v<T, Message>) {
          deliver(payload);
        } else if constexpr (std::is_same_v<T, Timer>) {
          protocol_->on_timer(*this, payload);
        } else if constexpr (std::is_same_v<T, FaultEntry>) {
          apply_fault(payload);
        } else {
          const auto& req = payload.request;
          const auto entry = protocol_->entry_controller(*this, domain_of(req.app_src.node));
          if (send(req.app_src, entry, req) == SendStatus::Unreachable) {
            open_session(req);
            fail_session(req.request_id, Errc::CoordinatorUnavailable, controller(entry).name);
          }
        }
      },
      event.payload);
}

Channel Engine::channel_of(const Endpoint& from, const Endpoint& to) const {
  const bool app = std::holds_alternative<AppId>(from) || std::holds_alternative<AppId>(to);
  if (app) return Channel::Nbi;
  const bool from_node = std::holds_alternative<NodeId>(from);
  const bool to_node = std::holds_alternative<NodeId>(to);
  if (from_node && to_node) return Channel::DataPlane;
  if (from_node || to_node) return Channel::Sbi;
  return Channel::Controller;
}

SendStatus Engine::send(Endpoint from, Endpoint to, MessageBody body, std::optional<ControllerId> final_to,
                        double distance_km) {
  if (const auto* c = std::get_if<ControllerId>(&to)) {
    const auto& info = controller(*c);
    // Without a standby the failure is visible to the sender at once.
    if (!info.serving() && !info.has_standby) return SendStatus::Unreachable;
  }
  const SimTime delay = config_.latency.delay(channel_of(from, to), distance_km);
  Message msg{std::move(from), std::move(to), now_, std::move(body), final_to};
  schedule(Event{now_ + delay, 0, std::move(msg)});
  return SendStatus::Sent;
}

void Engine::record(const Message& msg) {
  TraceRecord r;
  r.time = now_;
  r.sender = endpoint_name(msg.from);
  r.receiver = endpoint_name(msg.to);
  r.type = std::string(message_type(msg.body));
  r.request_id = request_of(msg.body);
  const bool app = std::holds_alternative<AppId>(msg.from) || std::holds_alternative<AppId>(msg.to);
  const bool dp = std::holds_alternative<NodeId>(msg.from) && std::holds_alternative<NodeId>(msg.to);
  r.plane = app ? Plane::AP : (dp ? Plane::DP : Plane::CP);
  r.detail = message_detail(msg.body);
  trace_.push_back(std::move(r));
}

void Engine::deliver(const Message& msg) {
  if (const auto* c = std::get_if<ControllerId>(&msg.to)) {
    auto& info = controller(*c);
    if (info.has_standby && !info.standby_active) {
      if (const auto* sync = std::get_if<StateSync>(&msg.body)) apply_state_update(info.standby_view, sync->entries);
    }
    if (!info.serving()) {
      ++dropped_;
      return;
    }
  }
  record(msg);
  ++delivered_;
  if (std::holds_alternative<ControllerId>(msg.to)) {
    protocol_->on_message(*this, msg);
  } else if (const auto* n = std::get_if<NodeId>(&msg.to)) {
    node_receive(*n, msg);
  } else {
    app_receive(std::get<AppId>(msg.to), msg);
  }
}

void Engine::app_receive(AppId, const Message&) {}

void Engine::node_receive(NodeId node, const Message& msg) {
  if (const auto* q = std::get_if<AvailabilityQuery>(&msg.body)) {
    store_.advance_all(now_);
    AvailabilityReply reply{q->request_id, node, false, 0};
    if (store_.has_kms(node) && node_reachable(node)) {
      reply.ok = true;
      reply.bits_available = store_.node_bits(node);
    }
    send(node, msg.from, reply);
    return;
  }

  const auto* relay = std::get_if<KeyRelay>(&msg.body);
  if (!relay) return;
  auto it = relays_.find(relay->request_id);
  if (it == relays_.end() || it->second.block.key_id != relay->key_id) return;
  const auto& flight = it->second;
  const std::size_t k = relay->hop;
  if (flight.path.at(k == 0 ? 0 : k) != node) return;

  if (k + 1 < flight.path.size()) {
    const auto& hop = flight.record.hops.at(k);
    KeyRelay next{relay->request_id, relay->key_id, {}, k + 1, hop.ciphertext};
    send(node, flight.path[k + 1], std::move(next), std::nullopt, topology_.link(hop.link).length_km);
    return;
  }

  // Last hop reached: both end KMSs now hold the key.
  const RequestId id = relay->request_id;
  const auto& s = sessions_.at(id);
  const KeyBlock at_src = flight.block;
  const KeyBlock at_dst{flight.block.key_id, flight.block.bits, flight.record.delivered_payload, flight.block.epoch};
  store_.deliver(flight.path.front(), s.request.app_src, at_src);
  store_.deliver(flight.path.back(), s.request.app_dst, at_dst);
  deliveries_.push_back(DeliveryRecord{id, at_src.key_id, s.request.app_src, s.request.app_dst, at_src, at_dst,
                                       flight.path});
  relays_.erase(it);
  protocol_->on_relay_complete(*this, id);
}

InterdomainSession& Engine::open_session(const KeyServiceRequest& request) {
  InterdomainSession s;
  s.request = request;
  s.source_domain = domain_of(request.app_src.node);
  s.dest_domain = domain_of(request.app_dst.node);
  auto [it, fresh] = sessions_.emplace(request.request_id, std::move(s));
  if (!fresh) throw Error(Errc::InvalidState, "duplicate request id " + std::to_string(request.request_id.value));
  return it->second;
}

InterdomainSession& Engine::session(RequestId id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(Errc::UnknownEntity, "no session " + std::to_string(id.value));
  return it->second;
}

void Engine::fail_session(RequestId id, Errc code, std::string segment) {
  auto& s = session(id);
  if (s.state == SessionState::Closed || s.state == SessionState::Failed) return;
  s.failure = code;
  s.failure_segment = std::move(segment);
  s.advance(SessionState::Failed);
}

void Engine::refresh_direct(ControllerId id) {
  auto& info = controller(id);
  std::set<LinkId> links;
  for (LinkId l : info.direct) {
    if (store_.accounts().contains(l)) {
      store_.advance(l, now_);
      links.insert(l);
    }
  }
  apply_state_update(info.view, observe_links(store_, links, now_));
}

std::vector<std::pair<LinkId, LinkState>> Engine::view_snapshot(ControllerId id) const {
  const auto& info = controller(id);
  std::vector<std::pair<LinkId, LinkState>> out;
  for (LinkId l : info.direct) {
    auto it = info.view.link_states.find(l);
    if (it != info.view.link_states.end()) out.emplace_back(l, it->second);
  }
  return out;
}

bool Engine::node_reachable(NodeId node) const { return !isolated_.contains(domain_of(node)); }

std::optional<Errc> Engine::start_relay(RequestId id, ControllerId orderer, const Path& path,
                                        std::string* failed_hop) {
  auto& s = session(id);
  const std::string key_id = "k" + std::to_string(id.value) + "." + std::to_string(s.attempt);
  const KeyBlock block = store_.make_block(key_id, s.request.bits, now_);
  RelayRecord record;
  try {
    record = store_.relay_key(path, block, now_);
  } catch (const RelayFailedError& e) {
    if (failed_hop) *failed_hop = to_string(e.from) + "-" + to_string(e.to);
    return Errc::KeyDepleted;
  }
  std::vector<LinkId> links;
  for (const auto& hop : record.hops) {
    links.push_back(hop.link);
    relay_consumption_[hop.link] += block.bits;
  }
  s.key_id = key_id;
  s.full_path = path;
  relays_[id] = RelayInFlight{block, std::move(record), path};
  send(orderer, path.front(), KeyRelay{id, key_id, path, 0, {}});
  protocol_->on_links_consumed(*this, links, id);
  return std::nullopt;
}

void Engine::apply_fault(const FaultEntry& fault) {
  std::set<LinkId> touched;
  auto link_down = [&](LinkId l) {
    if (++link_faults_[l] == 1) store_.set_link_up(l, false, now_);
    touched.insert(l);
  };
  auto link_up = [&](LinkId l) {
    auto& count = link_faults_[l];
    if (count == 0) return;
    if (--count == 0) store_.set_link_up(l, true, now_);
    touched.insert(l);
  };

  switch (fault.action) {
    case FaultAction::ControllerDown:
      ++controller(*controller_by_name(fault.target)).down_count;
      break;
    case FaultAction::ControllerUp: {
      auto& info = controller(*controller_by_name(fault.target));
      if (info.down_count > 0) --info.down_count;
      if (info.up()) info.standby_active = false;
      break;
    }
    case FaultAction::LinkDown:
      link_down(LinkId{*parse_prefixed(fault.target, 'l')});
      break;
    case FaultAction::LinkUp:
      link_up(LinkId{*parse_prefixed(fault.target, 'l')});
      break;
    case FaultAction::DomainIsolate: {
      const DomainId d{*parse_prefixed(fault.target, 'd')};
      if (!isolated_.insert(d).second) break;
      for (LinkId l : topology_.domain_scope(d)) link_down(l);
      for (auto& c : controllers_) {
        if (c.domain == d) ++c.down_count;
      }
      break;
    }
    case FaultAction::DomainRestore: {
      const DomainId d{*parse_prefixed(fault.target, 'd')};
      if (isolated_.erase(d) == 0) break;
      for (LinkId l : topology_.domain_scope(d)) link_up(l);
      for (auto& c : controllers_) {
        if (c.domain == d && c.down_count > 0) --c.down_count;
      }
      break;
    }
  }

  for (auto& c : controllers_) {
    if (!c.serving()) continue;
    const bool observes = std::any_of(touched.begin(), touched.end(), [&](LinkId l) { return c.direct.contains(l); });
    if (observes) refresh_direct(c.id);
  }
  protocol_->on_fault(*this, fault);
}

}  // namespace qkdnet
