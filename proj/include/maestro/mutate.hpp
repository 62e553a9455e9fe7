#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "maestro/graph.hpp"
#include "maestro/reward.hpp"
#include "maestro/spec.hpp"

namespace maestro {

enum class MutationKind : int {
  dependency_deletion = 0,
  role_rollback = 1,
  capacity_downgrade = 2,
};

constexpr std::size_t kMutationKinds = 3;

inline const char* mutation_kind_name(MutationKind k) {
  switch (k) {
    case MutationKind::dependency_deletion: return "dependency_deletion";
    case MutationKind::role_rollback: return "role_rollback";
    case MutationKind::capacity_downgrade: return "capacity_downgrade";
  }
  return "?";
}

// One legal single edit. Only the fields of the matching kind are meaningful.
struct MutationSite {
  MutationKind kind = MutationKind::dependency_deletion;
  std::string agent;
  std::string deleted_ref;                           // dependency_deletion
  std::string duty_before, duty_after;               // role_rollback
  CapacityLevel capacity_from = CapacityLevel::small;  // capacity_downgrade
  CapacityLevel capacity_to = CapacityLevel::small;
};

struct FeasibleMutations {
  std::array<std::vector<MutationSite>, kMutationKinds> sites;

  const std::vector<MutationSite>& of(MutationKind k) const {
    return sites[static_cast<std::size_t>(k)];
  }
  bool feasible(MutationKind k) const { return !of(k).empty(); }
  bool empty() const {
    for (const auto& s : sites)
      if (!s.empty()) return false;
    return true;
  }
  std::vector<MutationKind> kinds() const {
    std::vector<MutationKind> out;
    for (std::size_t i = 0; i < kMutationKinds; ++i)
      if (!sites[i].empty()) out.push_back(static_cast<MutationKind>(i));
    return out;
  }
  std::size_t total_sites() const {
    std::size_t n = 0;
    for (const auto& s : sites) n += s.size();
    return n;
  }
};

// Dependency deletion needs a reference to remove, capacity downgrade a level
// to shed, and duty rollback a duty that actually differs from the pool text.
inline FeasibleMutations feasible_mutations(const OrchestrationGraph& g, const RolePool& pool) {
  FeasibleMutations out;
  for (const auto& node : g.nodes()) {
    for (std::size_t u : node.parents) {
      MutationSite s;
      s.kind = MutationKind::dependency_deletion;
      s.agent = node.id;
      s.deleted_ref = g.nodes()[u].id;
      out.sites[0].push_back(std::move(s));
    }
    if (pool.contains(node.role.base_role) &&
        node.role.duty != pool.canonical_duty(node.role.base_role)) {
      MutationSite s;
      s.kind = MutationKind::role_rollback;
      s.agent = node.id;
      s.duty_before = node.role.duty;
      s.duty_after = pool.canonical_duty(node.role.base_role);
      out.sites[1].push_back(std::move(s));
    }
    if (node.capacity > CapacityLevel::small) {
      MutationSite s;
      s.kind = MutationKind::capacity_downgrade;
      s.agent = node.id;
      s.capacity_from = node.capacity;
      s.capacity_to = static_cast<CapacityLevel>(static_cast<int>(node.capacity) - 1);
      out.sites[2].push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adaptive mutation sampler
// ---------------------------------------------------------------------------

// Softmax of u / temperature with an iterative per-entry probability floor:
// entries below the floor are pinned to it and the remaining mass is
// redistributed over the rest in proportion to their softmax weights.
inline std::array<double, kMutationKinds> floor_softmax(const std::array<double, kMutationKinds>& u,
                                                        double temperature, double p_min) {
  if (static_cast<double>(kMutationKinds) * p_min > 1.0 + 1e-12)
    throw std::invalid_argument("floor_softmax: floor is infeasible");

  std::array<double, kMutationKinds> w{};
  double max_u = u[0];
  for (double x : u) max_u = std::max(max_u, x);
  double sum = 0.0;
  for (std::size_t i = 0; i < kMutationKinds; ++i) {
    w[i] = std::exp((u[i] - max_u) / temperature);
    sum += w[i];
  }

  std::array<bool, kMutationKinds> floored{};
  std::array<double, kMutationKinds> p{};
  for (;;) {
    std::size_t n_floored = 0;
    double free_weight = 0.0;
    for (std::size_t i = 0; i < kMutationKinds; ++i) {
      if (floored[i])
        ++n_floored;
      else
        free_weight += w[i];
    }
    double free_mass = 1.0 - static_cast<double>(n_floored) * p_min;
    bool changed = false;
    for (std::size_t i = 0; i < kMutationKinds; ++i) {
      if (floored[i]) {
        p[i] = p_min;
        continue;
      }
      p[i] = free_mass * w[i] / free_weight;
      if (p[i] < p_min) {
        floored[i] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return p;
}

struct SamplerConfig {
  double ema_alpha = 0.1;
  double temperature = 1.0;
  double p_min = 0.05;
};

struct SamplerState {
  std::array<double, kMutationKinds> u{0.0, 0.0, 0.0};
  std::array<double, kMutationKinds> p{1.0 / 3, 1.0 / 3, 1.0 / 3};
  SamplerConfig cfg;

  explicit SamplerState(SamplerConfig c = {}) : cfg(c) {}
};

// Kind drawn from p restricted to feasible kinds and renormalized; the site
// is uniform within the chosen kind.
inline std::pair<MutationKind, MutationSite> sample_mutation(const SamplerState& state,
                                                             const FeasibleMutations& feasible,
                                                             std::mt19937_64& rng) {
  if (feasible.empty()) throw std::invalid_argument("sample_mutation: no feasible mutations");
  std::vector<MutationKind> kinds = feasible.kinds();
  double mass = 0.0;
  for (MutationKind k : kinds) mass += state.p[static_cast<std::size_t>(k)];

  double r = uniform_real(rng) * mass;
  MutationKind chosen = kinds.back();
  double acc = 0.0;
  for (MutationKind k : kinds) {
    acc += state.p[static_cast<std::size_t>(k)];
    if (r < acc) {
      chosen = k;
      break;
    }
  }
  const auto& sites = feasible.of(chosen);
  return {chosen, sites[uniform_index(rng, sites.size())]};
}

inline std::pair<MutationKind, MutationSite> sample_mutation(const SamplerState& state,
                                                             const FeasibleMutations& feasible,
                                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_mutation(state, feasible, rng);
}

// EMA update on the sampled kind, then the floor-softmax over all kinds.
inline void update_sampler(SamplerState& state, MutationKind kind, double delta) {
  std::size_t i = static_cast<std::size_t>(kind);
  state.u[i] = (1.0 - state.cfg.ema_alpha) * state.u[i] + state.cfg.ema_alpha * std::abs(delta);
  state.p = floor_softmax(state.u, state.cfg.temperature, state.cfg.p_min);
}

// ---------------------------------------------------------------------------
// Edit application and reward contrast
// ---------------------------------------------------------------------------

struct MutationResult {
  OrchestrationSpec edited;
  Span span_original;  // edited field's value range in serialize(original)
  Span span_edited;    // same field's value range in serialize(edited)
};

inline SpecField mutated_field(MutationKind kind) {
  switch (kind) {
    case MutationKind::dependency_deletion: return SpecField::refs;
    case MutationKind::role_rollback: return SpecField::duty;
    case MutationKind::capacity_downgrade: return SpecField::capacity;
  }
  throw std::logic_error("unreachable");
}

inline MutationResult apply_mutation(const OrchestrationSpec& spec, const MutationSite& site,
                                     const RolePool& pool) {
  MutationResult out;
  out.edited = spec;

  AgentEntry* agent = nullptr;
  for (auto& step : out.edited.steps)
    for (auto& a : step)
      if (a.role.agent_type == site.agent) agent = &a;
  if (!agent) throw std::invalid_argument("apply_mutation: unknown agent `" + site.agent + "`");

  switch (site.kind) {
    case MutationKind::dependency_deletion: {
      auto it = std::find(agent->refs.begin(), agent->refs.end(), site.deleted_ref);
      if (it == agent->refs.end())
        throw std::invalid_argument("apply_mutation: stale site, ref `" + site.deleted_ref +
                                    "` not present");
      agent->refs.erase(it);
      break;
    }
    case MutationKind::role_rollback: {
      const std::string& canonical = pool.canonical_duty(agent->role.base_role);
      if (agent->role.duty == canonical)
        throw std::invalid_argument("apply_mutation: stale site, duty already canonical");
      agent->role.duty = canonical;
      break;
    }
    case MutationKind::capacity_downgrade: {
      if (agent->capacity != site.capacity_from)
        throw std::invalid_argument("apply_mutation: stale site, capacity changed");
      if (agent->capacity == CapacityLevel::small)
        throw std::invalid_argument("apply_mutation: cannot downgrade `small`");
      agent->capacity = static_cast<CapacityLevel>(static_cast<int>(agent->capacity) - 1);
      break;
    }
  }

  SpecField field = mutated_field(site.kind);
  out.span_original = serialize(spec).span(site.agent, field);
  out.span_edited = serialize(out.edited).span(site.agent, field);
  return out;
}

struct Contrast {
  double delta = 0.0;
  int direction = 1;     // +1 iff delta >= 0
  double weight = 0.0;   // min(|delta|, cap) / cap
  bool filtered = false;  // |delta| below the minimum; no loss, stats still update
};

inline Contrast contrast(const RewardBreakdown& original, const RewardBreakdown& counterfactual,
                         const CfConfig& cfg) {
  Contrast c;
  c.delta = original.total - counterfactual.total;
  c.direction = c.delta >= 0.0 ? 1 : -1;
  c.weight = std::min(std::abs(c.delta), cfg.delta_cap) / cfg.delta_cap;
  c.filtered = std::abs(c.delta) < cfg.min_abs_delta;
  return c;
}

struct CounterfactualPair {
  SerializedSpec original;
  SerializedSpec edited;
  MutationSite site;
  Span span_original;
  Span span_edited;
  double delta = 0.0;
  int direction = 1;
  double weight = 0.0;
  bool filtered = false;
};

inline nlohmann::json site_to_json(const MutationSite& s) {
  nlohmann::json j{{"kind", mutation_kind_name(s.kind)}, {"agent", s.agent}};
  switch (s.kind) {
    case MutationKind::dependency_deletion:
      j["deleted_ref"] = s.deleted_ref;
      break;
    case MutationKind::role_rollback:
      j["duty_before"] = s.duty_before;
      j["duty_after"] = s.duty_after;
      break;
    case MutationKind::capacity_downgrade:
      j["capacity_from"] = capacity_name(s.capacity_from);
      j["capacity_to"] = capacity_name(s.capacity_to);
      break;
  }
  return j;
}

inline nlohmann::json pair_to_json(const CounterfactualPair& p, bool include_rewards = true) {
  nlohmann::json j;
  j["site"] = site_to_json(p.site);
  j["original_text"] = p.original.text;
  j["edited_text"] = p.edited.text;
  j["span_original"] = {{"begin", p.span_original.begin}, {"end", p.span_original.end}};
  j["span_edited"] = {{"begin", p.span_edited.begin}, {"end", p.span_edited.end}};
  if (include_rewards) {
    j["delta"] = p.delta;
    j["direction"] = p.direction;
    j["weight"] = p.weight;
    j["filtered"] = p.filtered;
  }
  return j;
}

}  // namespace maestro
