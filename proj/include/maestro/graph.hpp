#pragma once

#include <algorithm>
#include <deque>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "maestro/config.hpp"
#include "maestro/spec.hpp"

namespace maestro {

// Layered DAG compiled from a valid spec. Immutable after compile; node ids
// are agent types, node order is (step, position-in-step).
class OrchestrationGraph {
 public:
  struct Node {
    std::string id;
    RoleSpec role;
    CapacityLevel capacity;
    std::size_t step;
    std::vector<std::size_t> parents;   // indices, in declared ref order
    std::vector<std::size_t> children;  // indices, in node order
  };

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::vector<std::size_t>>& layers() const { return layers_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  const std::string& spec_digest() const { return digest_; }

  std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("unknown node id: " + id);
    return it->second;
  }

  bool has_node(const std::string& id) const { return index_.count(id) > 0; }

  const Node& node(const std::string& id) const { return nodes_[index_of(id)]; }

  std::set<std::pair<std::string, std::string>> edges() const {
    std::set<std::pair<std::string, std::string>> e;
    for (const Node& v : nodes_)
      for (std::size_t u : v.parents) e.insert({nodes_[u].id, v.id});
    return e;
  }

 private:
  friend OrchestrationGraph compile(const OrchestrationSpec&);

  std::vector<Node> nodes_;
  std::vector<std::vector<std::size_t>> layers_;
  std::map<std::string, std::size_t> index_;
  std::size_t edge_count_ = 0;
  std::string digest_;
};

// Callers must validate first; an invalid spec here is a programming error.
inline OrchestrationGraph compile(const OrchestrationSpec& spec) {
  ValidationReport structural = validate(spec, RolePool("any", {}));
  structural.errors.erase(
      std::remove_if(structural.errors.begin(), structural.errors.end(),
                     [](const ValidationIssue& e) { return e.rule == "unknown-base-role"; }),
      structural.errors.end());
  if (!structural.errors.empty())
    throw std::invalid_argument("compile: spec failed validation: " + structural.errors.front().message);

  OrchestrationGraph g;
  g.digest_ = spec_digest(spec);
  for (std::size_t k = 0; k < spec.steps.size(); ++k) {
    std::vector<std::size_t> layer;
    for (const AgentEntry& a : spec.steps[k]) {
      std::size_t idx = g.nodes_.size();
      g.index_[a.role.agent_type] = idx;
      g.nodes_.push_back({a.role.agent_type, a.role, a.capacity, k, {}, {}});
      layer.push_back(idx);
    }
    g.layers_.push_back(std::move(layer));
  }
  for (std::size_t k = 0; k < spec.steps.size(); ++k) {
    for (const AgentEntry& a : spec.steps[k]) {
      std::size_t v = g.index_.at(a.role.agent_type);
      for (const std::string& target : a.refs) {
        std::size_t u = g.index_.at(target);
        g.nodes_[v].parents.push_back(u);
        g.nodes_[u].children.push_back(v);
        ++g.edge_count_;
      }
    }
  }
  return g;
}

// Parent ids in declared ref order.
inline std::vector<std::string> parents(const OrchestrationGraph& g, const std::string& node_id) {
  const auto& n = g.node(node_id);
  std::vector<std::string> out;
  out.reserve(n.parents.size());
  for (std::size_t u : n.parents) out.push_back(g.nodes()[u].id);
  return out;
}

// Mean of the clamped normalized agent and dependency counts, in [0, 1].
inline double structure_cost(const OrchestrationGraph& g, const RewardConfig& cfg) {
  auto clamp01 = [](double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); };
  double v = static_cast<double>(g.node_count()) / cfg.v_max;
  double e = static_cast<double>(g.edge_count()) / cfg.e_max;
  return clamp01((v + e) / 2.0);
}

struct NodeEdit {
  std::string node;
};
struct EdgeEdit {
  std::string from, to;
};
using GraphEdit = std::variant<NodeEdit, EdgeEdit>;

// Nodes whose prompt or upstream context changes under the edit: the edited
// node (or edge head) plus everything reachable downstream from it.
inline std::set<std::string> affected_set(const OrchestrationGraph& g, const GraphEdit& edit) {
  std::size_t start;
  if (const NodeEdit* ne = std::get_if<NodeEdit>(&edit)) {
    start = g.index_of(ne->node);
  } else {
    const EdgeEdit& ee = std::get<EdgeEdit>(edit);
    std::size_t from = g.index_of(ee.from);
    std::size_t to = g.index_of(ee.to);
    const auto& ps = g.nodes()[to].parents;
    if (std::find(ps.begin(), ps.end(), from) == ps.end())
      throw std::out_of_range("edge not in graph: " + ee.from + " -> " + ee.to);
    start = to;
  }

  std::set<std::string> out;
  std::deque<std::size_t> queue{start};
  std::vector<bool> seen(g.node_count(), false);
  seen[start] = true;
  while (!queue.empty()) {
    std::size_t v = queue.front();
    queue.pop_front();
    out.insert(g.nodes()[v].id);
    for (std::size_t c : g.nodes()[v].children)
      if (!seen[c]) {
        seen[c] = true;
        queue.push_back(c);
      }
  }
  return out;
}

inline std::string to_dot(const OrchestrationGraph& g) {
  std::string out = "digraph orchestration {\n  rankdir=TB;\n";
  for (const auto& n : g.nodes()) {
    out += "  \"" + n.id + "\" [label=\"" + n.id + "\\n" + n.role.base_role + " / " +
           capacity_name(n.capacity) + "\"];\n";
  }
  for (const auto& [u, v] : g.edges()) out += "  \"" + u + "\" -> \"" + v + "\";\n";
  out += "}\n";
  return out;
}

inline nlohmann::json graph_to_json(const OrchestrationGraph& g) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& n : g.nodes())
    j["nodes"].push_back({{"id", n.id},
                          {"base_role", n.role.base_role},
                          {"capacity", capacity_name(n.capacity)},
                          {"step", n.step + 1}});
  j["edges"] = nlohmann::json::array();
  for (const auto& [u, v] : g.edges()) j["edges"].push_back({u, v});
  j["layers"] = nlohmann::json::array();
  for (const auto& layer : g.layers()) {
    nlohmann::json l = nlohmann::json::array();
    for (std::size_t idx : layer) l.push_back(g.nodes()[idx].id);
    j["layers"].push_back(l);
  }
  return j;
}

}  // namespace maestro
