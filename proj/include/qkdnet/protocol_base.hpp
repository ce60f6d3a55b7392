#pragma once

#include <map>

#include "qkdnet/sim_engine.hpp"

namespace qkdnet {

// Behaviour common to both integration models: requests that stay inside one
// domain, and delivery of failures to the requesting application.
class ProtocolBase : public Protocol {
 protected:
  // KeyServiceRequest reached controller `me`. Opens the session and rejects
  // malformed requests; returns false when the request was rejected.
  bool accept_request(Engine& engine, ControllerId me, const KeyServiceRequest& req);

  void begin_local(Engine& engine, ControllerId me, RequestId id);
  // Returns true when the reply belonged to a local flow.
  bool on_local_reply(Engine& engine, ControllerId me, const AvailabilityReply& reply);
  // Returns true when the session is local (and was completed).
  bool complete_local(Engine& engine, RequestId id);

  // Fails the session and tells the source application, from `me`.
  void fail_to_app(Engine& engine, ControllerId me, RequestId id, Errc code, const std::string& segment);

  static bool terminal(const InterdomainSession& s) {
    return s.state == SessionState::Closed || s.state == SessionState::Failed;
  }
  // Session exists, is still running and the message belongs to its attempt.
  static bool current(Engine& engine, RequestId id, std::uint32_t attempt);

 private:
  struct LocalFlow {
    ControllerId controller;
    int pending = 0;
    bool ok = true;
  };
  std::map<RequestId, LocalFlow> local_;
};

}  // namespace qkdnet
