#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qkdnet/protocol_base.hpp"

namespace qkdnet {

// Controller tree rooted at the L3. L1s are the leaves, one per domain.
struct Hierarchy {
  ControllerId root;
  std::map<ControllerId, ControllerId> parent;
  std::map<ControllerId, std::optional<ControllerId>> standby;  // standby adopts the same identity
  std::map<DomainId, ControllerId> l1_of;

  std::vector<ControllerId> path_to_root(ControllerId c) const;
  std::size_t depth(ControllerId c) const { return path_to_root(c).size() - 1; }
  bool in_subtree(ControllerId node, ControllerId top) const;
  ControllerId lca(ControllerId a, ControllerId b) const;
  // a, ..., lca, ..., b along tree edges.
  std::vector<ControllerId> tree_path(ControllerId a, ControllerId b) const;
  ControllerId next_hop(ControllerId from, ControllerId to) const;
  ControllerId l1(DomainId d) const;
};

// Declarative description of the tree, by controller name.
struct HierarchySpec {
  struct Entry {
    std::string name;
    std::optional<std::string> parent;  // absent only for the root
    std::optional<DomainId> domain;     // set for L1s
    bool standby = false;
  };
  std::vector<Entry> controllers;
};

// L3 named "L3" with one L1 per domain directly beneath it.
HierarchySpec default_hierarchy(const Topology& topology);

// Structural checks; one message per problem.
std::vector<std::string> check_hierarchy(const HierarchySpec& spec, const Topology& topology);

// Coordinator for an interdomain request issued at `l1`: the lowest common
// ancestor of both L1s. Throws CoordinatorUnavailable when a controller on the
// escalation path is down without a standby.
ControllerId escalate(const Hierarchy& h, const Engine& engine, ControllerId l1, const KeyServiceRequest& req);

class HierarchicalProtocol : public ProtocolBase {
 public:
  explicit HierarchicalProtocol(Hierarchy hierarchy) : h_(std::move(hierarchy)) {}

  std::string_view name() const override { return "hierarchical"; }
  void start(Engine& engine) override;
  ControllerId entry_controller(const Engine& engine, DomainId domain) const override;
  void on_message(Engine& engine, const Message& msg) override;
  void on_timer(Engine& engine, const Timer& timer) override;
  void on_fault(Engine& engine, const FaultEntry& fault) override;
  void on_relay_complete(Engine& engine, RequestId id) override;
  void on_links_consumed(Engine& engine, const std::vector<LinkId>& links, RequestId id) override;

  // Starts ConnectionEnd from the source L1; InvalidState unless Delivering
  // and not already being torn down.
  void teardown(Engine& engine, RequestId id);
  // Activates the standby of a down controller; returns the serving identity.
  ControllerId failover(Engine& engine, ControllerId c);

  const Hierarchy& hierarchy() const { return h_; }

 private:
  struct Flow {
    ControllerId origin;
    ControllerId dest;
    std::optional<Path> src_path;
    std::optional<Path> dst_path;
    bool teardown = false;
  };

  void begin_interdomain(Engine& engine, RequestId id);
  void fail(Engine& engine, ControllerId me, RequestId id, Errc code, const std::string& segment);
  // Sends toward `target` along the tree; false when the next hop is unreachable.
  bool forward(Engine& engine, ControllerId me, ControllerId target, MessageBody body);
  void push_sync(Engine& engine, ControllerId l1);
  void retry_or_fail(Engine& engine, ControllerId c, bool failed_over);
  bool involves(RequestId id, ControllerId c) const;

  Hierarchy h_;
  std::map<RequestId, Flow> flows_;
  std::map<ControllerId, std::uint64_t> sync_version_;
  std::map<ControllerId, std::uint64_t> down_epoch_;
  std::set<ControllerId> failed_over_;
};

// Creates the controllers on `engine` and installs the protocol.
Hierarchy install_hierarchical(Engine& engine, const HierarchySpec& spec);

}  // namespace qkdnet
