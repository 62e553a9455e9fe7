#pragma once

// Shared test utilities: fixture loading, independent random-spec and
// brute-force edit generators used as oracles against the library.

#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "maestro/maestro.hpp"

#ifndef MAESTRO_FIXTURES_DIR
#define MAESTRO_FIXTURES_DIR "tests/fixtures"
#endif

namespace test_support {

inline std::string fixture_path(const std::string& name) {
  return std::string(MAESTRO_FIXTURES_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open fixture: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string read_fixture(const std::string& name) { return read_file(fixture_path(name)); }

// Independent generator of structurally valid specs. Deliberately goes
// through plain containers rather than any library sampling path.
inline maestro::OrchestrationSpec random_valid_spec(std::mt19937_64& rng,
                                                    const maestro::RolePool& pool,
                                                    int max_steps = 4, int max_agents = 3,
                                                    double ref_prob = 0.45) {
  std::vector<std::string> roles = pool.role_names();
  maestro::OrchestrationSpec spec;
  int n_steps = 1 + static_cast<int>(maestro::uniform_index(rng, static_cast<std::size_t>(max_steps)));
  int counter = 0;
  std::vector<std::string> earlier;
  for (int k = 0; k < n_steps; ++k) {
    int n_agents =
        1 + static_cast<int>(maestro::uniform_index(rng, static_cast<std::size_t>(max_agents)));
    std::vector<maestro::AgentEntry> step;
    std::vector<std::string> this_step;
    for (int j = 0; j < n_agents; ++j) {
      maestro::AgentEntry a;
      a.role.agent_type = "agent_" + std::to_string(counter++);
      a.role.base_role = roles[maestro::uniform_index(rng, roles.size())];
      switch (maestro::uniform_index(rng, 3)) {
        case 0: a.role.duty = pool.canonical_duty(a.role.base_role); break;
        case 1: a.role.duty = pool.canonical_duty(a.role.base_role) + " Focus on this task."; break;
        default: a.role.duty = "Handle the " + a.role.base_role + " step for this task."; break;
      }
      a.capacity = static_cast<maestro::CapacityLevel>(maestro::uniform_index(rng, 3));
      for (const std::string& cand : earlier)
        if (maestro::uniform_real(rng) < ref_prob) a.refs.push_back(cand);
      this_step.push_back(a.role.agent_type);
      step.push_back(std::move(a));
    }
    for (auto& t : this_step) earlier.push_back(std::move(t));
    spec.steps.push_back(std::move(step));
  }
  return spec;
}

// Brute-force oracle: enumerate every conceivable single edit, apply it to a
// copy, and keep the ones that re-validate. Compares against
// feasible_mutations without sharing its graph-based logic.
struct EnumeratedEdit {
  maestro::MutationKind kind;
  std::string agent;
  std::string detail;  // deleted ref | new duty | new capacity

  bool operator<(const EnumeratedEdit& o) const {
    return std::tie(kind, agent, detail) < std::tie(o.kind, o.agent, o.detail);
  }
  bool operator==(const EnumeratedEdit& o) const {
    return kind == o.kind && agent == o.agent && detail == o.detail;
  }
};

inline std::set<EnumeratedEdit> enumerate_legal_edits(const maestro::OrchestrationSpec& spec,
                                                      const maestro::RolePool& pool) {
  std::set<EnumeratedEdit> out;
  for (std::size_t k = 0; k < spec.steps.size(); ++k) {
    for (std::size_t j = 0; j < spec.steps[k].size(); ++j) {
      const maestro::AgentEntry& a = spec.steps[k][j];
      for (std::size_t r = 0; r < a.refs.size(); ++r) {
        maestro::OrchestrationSpec edited = spec;
        edited.steps[k][j].refs.erase(edited.steps[k][j].refs.begin() +
                                      static_cast<std::ptrdiff_t>(r));
        if (maestro::validate(edited, pool).valid)
          out.insert({maestro::MutationKind::dependency_deletion, a.role.agent_type, a.refs[r]});
      }
      if (pool.contains(a.role.base_role) &&
          a.role.duty != pool.canonical_duty(a.role.base_role)) {
        maestro::OrchestrationSpec edited = spec;
        edited.steps[k][j].role.duty = pool.canonical_duty(a.role.base_role);
        if (maestro::validate(edited, pool).valid)
          out.insert({maestro::MutationKind::role_rollback, a.role.agent_type,
                      pool.canonical_duty(a.role.base_role)});
      }
      if (a.capacity > maestro::CapacityLevel::small) {
        maestro::OrchestrationSpec edited = spec;
        edited.steps[k][j].capacity =
            static_cast<maestro::CapacityLevel>(static_cast<int>(a.capacity) - 1);
        if (maestro::validate(edited, pool).valid)
          out.insert({maestro::MutationKind::capacity_downgrade, a.role.agent_type,
                      maestro::capacity_name(edited.steps[k][j].capacity)});
      }
    }
  }
  return out;
}

inline std::set<EnumeratedEdit> edits_from_feasible(const maestro::FeasibleMutations& f) {
  std::set<EnumeratedEdit> out;
  for (const auto& s : f.of(maestro::MutationKind::dependency_deletion))
    out.insert({s.kind, s.agent, s.deleted_ref});
  for (const auto& s : f.of(maestro::MutationKind::role_rollback))
    out.insert({s.kind, s.agent, s.duty_after});
  for (const auto& s : f.of(maestro::MutationKind::capacity_downgrade))
    out.insert({s.kind, s.agent, maestro::capacity_name(s.capacity_to)});
  return out;
}

// Generic DFS cycle detector, independent of the layered structure.
inline bool has_cycle(const maestro::OrchestrationGraph& g) {
  enum class Color { white, grey, black };
  std::vector<Color> color(g.node_count(), Color::white);
  std::function<bool(std::size_t)> visit = [&](std::size_t v) {
    color[v] = Color::grey;
    for (std::size_t c : g.nodes()[v].children) {
      if (color[c] == Color::grey) return true;
      if (color[c] == Color::white && visit(c)) return true;
    }
    color[v] = Color::black;
    return false;
  };
  for (std::size_t v = 0; v < g.node_count(); ++v)
    if (color[v] == Color::white && visit(v)) return true;
  return false;
}

}  // namespace test_support
