#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "qkdnet/control_plane.hpp"
#include "qkdnet/net_model.hpp"
#include "qkdnet/qkd_layer.hpp"
#include "qkdnet/trace.hpp"

namespace qkdnet {

enum class FaultAction { ControllerDown, ControllerUp, LinkDown, LinkUp, DomainIsolate, DomainRestore };
std::string_view to_string(FaultAction a);
FaultAction fault_action_from_string(std::string_view s);

struct FaultEntry {
  SimTime at = 0;
  FaultAction action = FaultAction::LinkDown;
  std::string target;  // controller name, link id ("l<id>") or domain id ("d<id>")
};

struct FaultScript {
  std::vector<FaultEntry> entries;
};

// Down/Up pairs must be well nested per target; returns one message per breach.
std::vector<std::string> check_nesting(const FaultScript& script);

enum class Channel { Nbi, Sbi, Controller, DataPlane };

struct LatencyClass {
  double base_ms = 5.0;
  double per_km_ms = 0.005;
};

struct LatencyModel {
  LatencyClass nbi;
  LatencyClass sbi;
  LatencyClass controller;
  LatencyClass data_plane;

  const LatencyClass& of(Channel c) const;
  // Strictly positive: at least one microsecond.
  SimTime delay(Channel c, double km) const;
};

enum class TimerKind { PeriodicSync, ArbiterClose, HeartbeatMiss, LeaseExpiry };

struct Timer {
  TimerKind kind = TimerKind::PeriodicSync;
  ControllerId controller;
  std::uint64_t tag = 0;
};

struct Arrival {
  KeyServiceRequest request;
};

struct Event {
  SimTime time = 0;
  std::uint64_t seq = 0;
  std::variant<Message, Timer, FaultEntry, Arrival> payload;
};

struct EngineConfig {
  RateModel rate;
  LatencyModel latency;
  std::uint64_t seed = 0;
  std::uint64_t initial_bits = 0;
  SimTime sync_period = seconds(10);
  SimTime heartbeat = seconds(5);
  int heartbeat_misses = 3;
  SimTime reserve_window = millis(10);
  SimTime reserve_lease = seconds(2);
};

struct ControllerInfo {
  ControllerId id;
  std::string name;
  ControllerRole role;
  std::optional<DomainId> domain;  // L1 / Peer
  std::vector<ControllerId> children;
  NetworkView view;
  NetworkView standby_view;  // rebuilt from the StateSync stream
  std::set<LinkId> direct;   // links observed through its own SBI
  int down_count = 0;
  bool has_standby = false;
  bool standby_active = false;

  bool up() const { return down_count == 0; }
  // Primary up, or its standby has taken over.
  bool serving() const { return up() || standby_active; }
};

struct RelayInFlight {
  KeyBlock block;
  RelayRecord record;
  Path path;
};

struct DeliveryRecord {
  RequestId request_id;
  std::string key_id;
  AppId app_src;
  AppId app_dst;
  KeyBlock at_src;
  KeyBlock at_dst;
  Path path;
};

class Engine;

// Model-specific controller behaviour plugged into the engine.
class Protocol {
 public:
  virtual ~Protocol() = default;
  virtual std::string_view name() const = 0;
  virtual void start(Engine& engine) = 0;
  // Controller that receives app requests for a domain.
  virtual ControllerId entry_controller(const Engine& engine, DomainId domain) const = 0;
  virtual void on_message(Engine& engine, const Message& msg) = 0;
  virtual void on_timer(Engine& engine, const Timer& timer) = 0;
  virtual void on_fault(Engine& engine, const FaultEntry& fault) = 0;
  virtual void on_relay_complete(Engine& engine, RequestId id) = 0;
  // Ground-truth consumption on these links (for event-driven sync).
  virtual void on_links_consumed(Engine& engine, const std::vector<LinkId>& links, RequestId id) = 0;
};

enum class SendStatus { Sent, Unreachable };

class Engine {
 public:
  Engine(Topology topology, EngineConfig config);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  void set_protocol(std::unique_ptr<Protocol> protocol);
  Protocol& protocol() { return *protocol_; }

  ControllerId add_controller(std::string name, ControllerRole role, std::optional<DomainId> domain,
                              std::optional<std::set<LinkId>> scope, bool has_standby = false);

  // Event queue.
  void schedule(Event event);
  void schedule_timer(SimTime at, Timer timer);
  void schedule_request(KeyServiceRequest request);
  void run_until(SimTime t_end);
  // Checks the target exists (UnknownEntity) and queues the fault.
  void inject_fault(const FaultEntry& fault);
  SimTime now() const { return now_; }
  bool idle() const { return queue_.empty(); }

  // Messaging.
  SendStatus send(Endpoint from, Endpoint to, MessageBody body, std::optional<ControllerId> final_to = {},
                  double distance_km = 0.0);

  // State access.
  const Topology& topology() const { return topology_; }
  const EngineConfig& config() const { return config_; }
  KeyStore& store() { return store_; }
  const KeyStore& store() const { return store_; }
  ControllerInfo& controller(ControllerId id);
  const ControllerInfo& controller(ControllerId id) const;
  const std::vector<ControllerInfo>& controllers() const { return controllers_; }
  std::optional<ControllerId> controller_by_name(std::string_view name) const;
  std::string endpoint_name(const Endpoint& e) const;

  InterdomainSession& open_session(const KeyServiceRequest& request);
  bool has_session(RequestId id) const { return sessions_.contains(id); }
  InterdomainSession& session(RequestId id);
  const std::map<RequestId, InterdomainSession>& sessions() const { return sessions_; }
  void fail_session(RequestId id, Errc code, std::string segment);

  // Refreshes the controller's directly observed links from ground truth.
  void refresh_direct(ControllerId id);
  // Snapshot of the controller's view for a StateSync.
  std::vector<std::pair<LinkId, LinkState>> view_snapshot(ControllerId id) const;
  bool node_reachable(NodeId node) const;
  bool domain_isolated(DomainId d) const { return isolated_.contains(d); }

  // Reserves the whole path (all or nothing), then orders the hop-by-hop
  // relay from `orderer`. Returns the error code on failure; nothing consumed.
  std::optional<Errc> start_relay(RequestId id, ControllerId orderer, const Path& path,
                                  std::string* failed_hop = nullptr);

  const std::vector<TraceRecord>& trace() const { return trace_; }
  std::uint64_t delivered_messages() const { return delivered_; }
  std::uint64_t dropped_messages() const { return dropped_; }
  const std::vector<DeliveryRecord>& deliveries() const { return deliveries_; }
  // Bits consumed per link by completed relay reservations, for audits.
  const std::map<LinkId, std::uint64_t>& relay_consumption() const { return relay_consumption_; }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void dispatch(const Event& event);
  void deliver(const Message& msg);
  void node_receive(NodeId node, const Message& msg);
  void app_receive(AppId app, const Message& msg);
  void apply_fault(const FaultEntry& fault);
  void record(const Message& msg);
  Channel channel_of(const Endpoint& from, const Endpoint& to) const;

  Topology topology_;
  EngineConfig config_;
  KeyStore store_;
  std::unique_ptr<Protocol> protocol_;
  std::vector<ControllerInfo> controllers_;
  std::map<RequestId, InterdomainSession> sessions_;
  std::map<RequestId, RelayInFlight> relays_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  SimTime now_ = 0;
  std::vector<TraceRecord> trace_;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_ = 0;
  std::set<DomainId> isolated_;
  std::map<LinkId, int> link_faults_;
  std::vector<DeliveryRecord> deliveries_;
  std::map<LinkId, std::uint64_t> relay_consumption_;
};

}  // namespace qkdnet
