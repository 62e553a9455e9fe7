#pragma once

#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "maestro/common.hpp"
#include "maestro/env.hpp"
#include "maestro/spec.hpp"

namespace maestro {

struct WorkerCall {
  TaskInstance task;
  RoleSpec role;
  CapacityLevel capacity = CapacityLevel::medium;
  std::vector<std::pair<std::string, std::string>> parent_outputs;  // (node id, output), ref order
  std::uint64_t seed = 0;
};

struct WorkerResult {
  std::string output;
  int tokens_in = 0;
  int tokens_out = 0;

  friend bool operator==(const WorkerResult&, const WorkerResult&) = default;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic given the call (stochastic backends fold call.seed in).
// Implementations must be safe for concurrent run() calls.
class WorkerBackend {
 public:
  virtual ~WorkerBackend() = default;
  virtual WorkerResult run(const WorkerCall& call) = 0;
  virtual std::string backend_id() const = 0;
};

// ---------------------------------------------------------------------------
// Scripted backend: pure text functions keyed by (base_role, capacity).
// ---------------------------------------------------------------------------

class ScriptedBackend : public WorkerBackend {
 public:
  using ScriptFn = std::function<std::string(const WorkerCall&)>;

  struct Script {
    ScriptFn fn;
    int tokens_in = 10;
    int tokens_out = 10;
  };

  void add(const std::string& base_role, ScriptFn fn, int tokens_in = 10, int tokens_out = 10) {
    for (CapacityLevel c : {CapacityLevel::small, CapacityLevel::medium, CapacityLevel::large})
      add(base_role, c, fn, tokens_in, tokens_out);
  }

  void add(const std::string& base_role, CapacityLevel capacity, ScriptFn fn, int tokens_in = 10,
           int tokens_out = 10) {
    scripts_[{base_role, capacity}] = {std::move(fn), tokens_in, tokens_out};
  }

  WorkerResult run(const WorkerCall& call) override {
    auto it = scripts_.find({call.role.base_role, call.capacity});
    if (it == scripts_.end())
      throw BackendError("no script for (" + call.role.base_role + ", " +
                         capacity_name(call.capacity) + ")");
    const Script& s = it->second;
    return {s.fn(call), s.tokens_in, s.tokens_out};
  }

  std::string backend_id() const override { return "scripted"; }

  // Echo-style table for CLI demos: role(inputs...) with the prompt at roots.
  static ScriptedBackend demo(const RolePool& pool) {
    ScriptedBackend b;
    for (const std::string& role : pool.role_names()) {
      b.add(role, [role](const WorkerCall& call) {
        std::vector<std::string> inputs;
        if (call.parent_outputs.empty()) inputs.push_back(call.task.prompt);
        for (const auto& [_, out] : call.parent_outputs) inputs.push_back(out);
        return role + "(" + join(inputs, "; ") + ")";
      });
    }
    return b;
  }

 private:
  std::map<std::pair<std::string, CapacityLevel>, Script> scripts_;
};

// ---------------------------------------------------------------------------
// Synthetic backend: seeded marker-propagation worker over a SyntheticEnv.
// ---------------------------------------------------------------------------

class SyntheticBackend : public WorkerBackend {
 public:
  SyntheticBackend(const SyntheticEnv& env, const RolePool& pool) : env_(env), pool_(pool) {}

  WorkerResult run(const WorkerCall& call) override {
    const TaskArchetype* task = env_.find(call.task.id);
    if (!task) throw BackendError("synthetic backend: unknown task id `" + call.task.id + "`");

    std::set<std::string> markers;
    bool upstream_covered = false;
    for (const auto& [_, out] : call.parent_outputs) {
      if (out == task->answer_key) {
        upstream_covered = true;
        continue;
      }
      parse_markers(out, markers);
    }

    bool specialized = !pool_.contains(call.role.base_role) ||
                       call.role.duty != pool_.canonical_duty(call.role.base_role);
    double p = env_.success_probability(*task, call.role.base_role, call.capacity, specialized);
    std::mt19937_64 rng(call.seed);
    if (uniform_real(rng) < p) markers.insert(call.role.base_role);

    bool covered = upstream_covered ||
                   std::all_of(task->required.begin(), task->required.end(),
                               [&](const auto& kv) { return markers.count(kv.first) > 0; });

    WorkerResult res;
    if (covered) {
      res.output = task->answer_key;
    } else {
      std::vector<std::string> sorted(markers.begin(), markers.end());
      res.output = "markers:" + join(sorted, ",");
    }
    int total = env_.tokens_for(call.capacity);
    res.tokens_in = (total * 2) / 3;
    res.tokens_out = total - res.tokens_in;
    return res;
  }

  std::string backend_id() const override { return "synthetic"; }

 private:
  static void parse_markers(const std::string& out, std::set<std::string>& markers) {
    constexpr std::string_view prefix = "markers:";
    if (out.rfind(prefix, 0) != 0) return;
    std::string body = out.substr(prefix.size());
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) markers.insert(item);
  }

  const SyntheticEnv& env_;
  const RolePool& pool_;
};

}  // namespace maestro
