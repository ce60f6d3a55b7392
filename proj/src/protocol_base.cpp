#include "qkdnet/protocol_base.hpp"

namespace qkdnet {

bool ProtocolBase::current(Engine& engine, RequestId id, std::uint32_t attempt) {
  if (!engine.has_session(id)) return false;
  const auto& s = engine.session(id);
  return !terminal(s) && s.attempt == attempt;
}

bool ProtocolBase::accept_request(Engine& engine, ControllerId me, const KeyServiceRequest& req) {
  engine.open_session(req);
  const auto& topo = engine.topology();
  if (!topo.has_node(req.app_dst.node)) {
    fail_to_app(engine, me, req.request_id, Errc::UnknownNode, to_string(req.app_dst.node));
    return false;
  }
  if (req.bits == 0 || req.app_src.node == req.app_dst.node) {
    fail_to_app(engine, me, req.request_id, Errc::InvalidRequest, "");
    return false;
  }
  return true;
}

void ProtocolBase::fail_to_app(Engine& engine, ControllerId me, RequestId id, Errc code, const std::string& segment) {
  engine.fail_session(id, code, segment);
  const auto& s = engine.session(id);
  engine.send(me, s.request.app_src, ErrorReport{id, code, segment, s.attempt});
}

void ProtocolBase::begin_local(Engine& engine, ControllerId me, RequestId id) {
  const auto& req = engine.session(id).request;
  local_[id] = LocalFlow{me, 2, true};
  engine.send(me, req.app_src.node, AvailabilityQuery{id, req.app_src.node});
  engine.send(me, req.app_dst.node, AvailabilityQuery{id, req.app_dst.node});
}

bool ProtocolBase::on_local_reply(Engine& engine, ControllerId me, const AvailabilityReply& reply) {
  auto it = local_.find(reply.request_id);
  if (it == local_.end()) return false;
  auto& flow = it->second;
  if (!engine.has_session(reply.request_id) || terminal(engine.session(reply.request_id))) return true;
  if (!reply.ok) {
    flow.ok = false;
    fail_to_app(engine, me, reply.request_id, Errc::NoRoute, to_string(reply.node));
    return true;
  }
  if (--flow.pending > 0) return true;

  auto& s = engine.session(reply.request_id);
  engine.refresh_direct(me);
  const auto& view = engine.controller(me).view;
  auto path = compute_route(engine.topology(), view,
                            RouteQuery{s.request.app_src.node, s.request.app_dst.node, s.request.bits, engine.now(),
                                       s.source_domain});
  if (!path) {
    fail_to_app(engine, me, s.request.request_id, Errc::NoRoute, to_string(s.source_domain));
    return true;
  }
  s.intradomain_paths[s.source_domain] = *path;
  s.advance(SessionState::Establishing);
  engine.send(me, path->front(), IntradomainRouteSet{s.request.request_id, *path, s.attempt});
  std::string hop;
  if (auto err = engine.start_relay(s.request.request_id, me, *path, &hop)) {
    fail_to_app(engine, me, s.request.request_id, *err, hop);
  }
  return true;
}

bool ProtocolBase::complete_local(Engine& engine, RequestId id) {
  if (!local_.contains(id)) return false;
  auto& s = engine.session(id);
  s.advance(SessionState::Delivering);
  engine.send(s.request.app_src.node, s.request.app_src, KeyReady{id, s.key_id});
  engine.send(s.request.app_dst.node, s.request.app_dst, KeyReady{id, s.key_id});
  s.advance(SessionState::Closed);
  local_.erase(id);
  return true;
}

}  // namespace qkdnet
