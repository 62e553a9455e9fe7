#pragma once

#include <future>
#include <mutex>
#include <optional>
#include <unordered_map>

#include <json.hpp>

#include "maestro/backend.hpp"
#include "maestro/graph.hpp"

namespace maestro {

// Key over the fields that determine a worker call's behavior: task, base
// role, duty, capacity, and the referenced upstream outputs (by digest, in
// ref order). The agent type identifier is deliberately excluded.
struct CacheKey {
  std::string material;
  std::uint64_t digest = 0;

  static CacheKey make(const WorkerCall& call) {
    std::string m;
    auto part = [&m](std::string_view s) {
      m += std::to_string(s.size());
      m += ':';
      m += s;
      m += ';';
    };
    part(call.task.id);
    part(call.role.base_role);
    part(call.role.duty);
    part(capacity_name(call.capacity));
    for (const auto& [_, out] : call.parent_outputs) part(hex64(fnv1a64(out)));
    return {std::move(m), fnv1a64(m)};
  }
};

// Concurrent lookups and inserts are safe; double-insert of an equal key is
// idempotent (first write wins, which is equal by determinism).
class ExecutionCache {
 public:
  std::optional<WorkerResult> lookup(const CacheKey& key) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key.material);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void insert(const CacheKey& key, const WorkerResult& result) {
    std::lock_guard<std::mutex> lock(mu_);
    entries_.emplace(key.material, result);
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.size();
  }

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, WorkerResult> entries_;
};

enum class NodeStatus { ok, failed, skipped };

inline const char* node_status_name(NodeStatus s) {
  switch (s) {
    case NodeStatus::ok: return "ok";
    case NodeStatus::failed: return "failed";
    case NodeStatus::skipped: return "skipped";
  }
  return "?";
}

struct NodeExecution {
  std::string node_id;
  WorkerResult result;
  bool cache_hit = false;
  NodeStatus status = NodeStatus::ok;
  std::string error;
};

struct ExecutionRecord {
  std::string spec_digest;
  bool valid = true;
  std::string final_answer;
  bool correct = false;
  long total_tokens = 0;  // every ok node, cache hits included
  long fresh_tokens = 0;  // only nodes actually executed this run
  std::size_t agent_count = 0;
  std::size_t edge_count = 0;
  std::vector<NodeExecution> per_node;  // (step, position) order
  std::uint64_t seed = 0;
  std::optional<std::string> failed_node;

  bool failed() const { return failed_node.has_value(); }

  static ExecutionRecord invalid_record(std::string digest) {
    ExecutionRecord r;
    r.spec_digest = std::move(digest);
    r.valid = false;
    return r;
  }
};

// Terminal aggregation: a single last-layer node answers verbatim; otherwise
// majority vote over normalized answers, ties going to the lowest position.
inline std::string aggregate(const OrchestrationGraph& g,
                             const std::map<std::string, std::string>& outputs) {
  const auto& last = g.layers().back();
  if (last.empty()) throw std::logic_error("aggregate: empty terminal layer");
  if (last.size() == 1) return outputs.at(g.nodes()[last[0]].id);

  std::map<std::string, int> votes;
  std::vector<std::pair<std::string, std::string>> terminal;  // (normalized, raw), position order
  for (std::size_t idx : last) {
    const std::string& raw = outputs.at(g.nodes()[idx].id);
    std::string norm = normalize_answer(raw);
    votes[norm]++;
    terminal.emplace_back(std::move(norm), raw);
  }
  const std::pair<std::string, std::string>* winner = &terminal.front();
  int best = votes[terminal.front().first];
  for (const auto& t : terminal) {
    if (votes[t.first] > best) {
      best = votes[t.first];
      winner = &t;
    }
  }
  return winner->second;
}

inline bool answers_match(const std::string& answer, const std::string& key) {
  return normalize_answer(answer) == normalize_answer(key);
}

// Runs the graph layer by layer; nodes within a layer execute concurrently.
// A failed node poisons its descendants but sibling branches still run.
inline ExecutionRecord execute(const OrchestrationGraph& g, const TaskInstance& task,
                               WorkerBackend& backend, ExecutionCache* cache, std::uint64_t seed) {
  ExecutionRecord rec;
  rec.spec_digest = g.spec_digest();
  rec.seed = seed;
  rec.agent_count = g.node_count();
  rec.edge_count = g.edge_count();
  rec.per_node.resize(g.node_count());

  std::vector<NodeStatus> status(g.node_count(), NodeStatus::ok);
  std::vector<std::string> output(g.node_count());

  for (const auto& layer : g.layers()) {
    struct Pending {
      std::size_t idx;
      CacheKey key;
      std::future<WorkerResult> fut;
    };
    std::vector<Pending> pending;

    for (std::size_t idx : layer) {
      const auto& node = g.nodes()[idx];
      NodeExecution& ne = rec.per_node[idx];
      ne.node_id = node.id;

      std::string bad_parent;
      for (std::size_t u : node.parents)
        if (status[u] != NodeStatus::ok) {
          bad_parent = g.nodes()[u].id;
          break;
        }
      if (!bad_parent.empty()) {
        status[idx] = NodeStatus::skipped;
        ne.status = NodeStatus::skipped;
        ne.error = "upstream failure: " + bad_parent;
        continue;
      }

      WorkerCall call;
      call.task = task;
      call.role = node.role;
      call.capacity = node.capacity;
      for (std::size_t u : node.parents) call.parent_outputs.emplace_back(g.nodes()[u].id, output[u]);
      CacheKey key = CacheKey::make(call);
      call.seed = mix64(seed, key.digest);

      if (cache) {
        if (auto hit = cache->lookup(key)) {
          ne.result = *hit;
          ne.cache_hit = true;
          output[idx] = hit->output;
          continue;
        }
      }
      pending.push_back(
          {idx, std::move(key),
           std::async(std::launch::async, [&backend, call]() { return backend.run(call); })});
    }

    for (Pending& p : pending) {
      NodeExecution& ne = rec.per_node[p.idx];
      try {
        ne.result = p.fut.get();
        output[p.idx] = ne.result.output;
        if (cache) cache->insert(p.key, ne.result);
      } catch (const std::exception& e) {
        status[p.idx] = NodeStatus::failed;
        ne.status = NodeStatus::failed;
        ne.error = e.what();
      }
    }
  }

  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const NodeExecution& ne = rec.per_node[i];
    if (ne.status != NodeStatus::ok) {
      if (!rec.failed_node) rec.failed_node = ne.node_id;
      continue;
    }
    rec.total_tokens += ne.result.tokens_in + ne.result.tokens_out;
    if (!ne.cache_hit) rec.fresh_tokens += ne.result.tokens_in + ne.result.tokens_out;
  }

  if (!rec.failed()) {
    std::map<std::string, std::string> outs;
    for (std::size_t idx : g.layers().back()) outs[g.nodes()[idx].id] = output[idx];
    rec.final_answer = aggregate(g, outs);
    rec.correct = task.answer_key && answers_match(rec.final_answer, *task.answer_key);
  }
  return rec;
}

// Re-execution of a single-mutation variant against the original run's cache
// and seed; unchanged nodes come back as cache hits.
inline ExecutionRecord execute_counterfactual(const ExecutionRecord& original,
                                              const OrchestrationGraph& edited,
                                              const TaskInstance& task, WorkerBackend& backend,
                                              ExecutionCache& cache) {
  return execute(edited, task, backend, &cache, original.seed);
}

inline nlohmann::json record_to_json(const ExecutionRecord& r) {
  nlohmann::json j;
  j["spec_digest"] = r.spec_digest;
  j["valid"] = r.valid;
  j["final_answer"] = r.final_answer;
  j["correct"] = r.correct;
  j["total_tokens"] = r.total_tokens;
  j["fresh_tokens"] = r.fresh_tokens;
  j["agent_count"] = r.agent_count;
  j["edge_count"] = r.edge_count;
  j["seed"] = r.seed;
  j["failed_node"] = r.failed_node ? nlohmann::json(*r.failed_node) : nlohmann::json(nullptr);
  j["per_node"] = nlohmann::json::array();
  for (const auto& n : r.per_node) {
    j["per_node"].push_back({{"node", n.node_id},
                             {"output", n.result.output},
                             {"tokens_in", n.result.tokens_in},
                             {"tokens_out", n.result.tokens_out},
                             {"cache_hit", n.cache_hit},
                             {"status", node_status_name(n.status)},
                             {"error", n.error}});
  }
  return j;
}

inline std::string record_to_jsonl(const ExecutionRecord& r) { return record_to_json(r).dump(); }

// Outcome equality: everything observable except cache-hit bookkeeping.
inline bool same_outcome(const ExecutionRecord& a, const ExecutionRecord& b) {
  if (std::tie(a.spec_digest, a.valid, a.final_answer, a.correct, a.total_tokens, a.agent_count,
               a.edge_count, a.seed, a.failed_node) !=
      std::tie(b.spec_digest, b.valid, b.final_answer, b.correct, b.total_tokens, b.agent_count,
               b.edge_count, b.seed, b.failed_node))
    return false;
  if (a.per_node.size() != b.per_node.size()) return false;
  for (std::size_t i = 0; i < a.per_node.size(); ++i) {
    const auto& x = a.per_node[i];
    const auto& y = b.per_node[i];
    if (x.node_id != y.node_id || !(x.result == y.result) || x.status != y.status ||
        x.error != y.error)
      return false;
  }
  return true;
}

}  // namespace maestro
