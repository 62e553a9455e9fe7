#pragma once

#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "maestro/backend.hpp"
#include "maestro/engine.hpp"
#include "maestro/env.hpp"
#include "maestro/policy.hpp"
#include "maestro/reward.hpp"

namespace maestro {

struct TrainRow {
  int iteration = 0;
  double mean_reward = 0.0;
  double mean_task_success = 0.0;
  double mean_total_tokens = 0.0;
  double validity_rate = 0.0;
  std::array<double, kMutationKinds> sampler_u{};
  std::array<double, kMutationKinds> sampler_p{};
  int cf_pairs_used = 0;
  int cf_pairs_filtered = 0;
  long cumulative_fresh_tokens = 0;
};

struct TrainReport {
  std::vector<TrainRow> rows;

  static const char* csv_header() {
    return "iteration,mean_reward,mean_task_success,mean_total_tokens,validity_rate,"
           "u_dependency_deletion,u_role_rollback,u_capacity_downgrade,"
           "p_dependency_deletion,p_role_rollback,p_capacity_downgrade,"
           "cf_pairs_used,cf_pairs_filtered,cumulative_fresh_tokens";
  }

  std::string to_csv() const {
    std::string out = csv_header();
    out += "\n";
    char buf[512];
    for (const TrainRow& r : rows) {
      std::snprintf(buf, sizeof(buf),
                    "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%d,%ld\n",
                    r.iteration, r.mean_reward, r.mean_task_success, r.mean_total_tokens, r.validity_rate,
                    r.sampler_u[0], r.sampler_u[1], r.sampler_u[2], r.sampler_p[0], r.sampler_p[1],
                    r.sampler_p[2], r.cf_pairs_used, r.cf_pairs_filtered, r.cumulative_fresh_tokens);
      out += buf;
    }
    return out;
  }

  std::string to_jsonl() const {
    std::string out;
    for (const TrainRow& r : rows) {
      nlohmann::json j{{"iteration", r.iteration},
                       {"mean_reward", r.mean_reward},
                       {"mean_task_success", r.mean_task_success},
                       {"mean_total_tokens", r.mean_total_tokens},
                       {"validity_rate", r.validity_rate},
                       {"sampler_u", r.sampler_u},
                       {"sampler_p", r.sampler_p},
                       {"cf_pairs_used", r.cf_pairs_used},
                       {"cf_pairs_filtered", r.cf_pairs_filtered},
                       {"cumulative_fresh_tokens", r.cumulative_fresh_tokens}};
      out += j.dump();
      out += "\n";
    }
    return out;
  }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

namespace detail {

inline OrchestrationSpec teacher_chain(const PolicyGrammar& grammar,
                                       const std::vector<std::pair<std::string, CapacityLevel>>& roles) {
  OrchestrationSpec spec;
  std::string prev_type;
  int k = 0;
  for (const auto& [role_name, capacity] : roles) {
    int role = grammar.role_index(role_name);
    if (role < 0) continue;
    AgentEntry entry;
    entry.role.agent_type = grammar.agent_type(role, k, 0);
    entry.role.base_role = role_name;
    entry.role.duty = grammar.duty_text(role, 1);
    entry.capacity = capacity;
    if (!prev_type.empty()) entry.refs.push_back(prev_type);
    prev_type = entry.role.agent_type;
    spec.steps.push_back({std::move(entry)});
    ++k;
  }
  return spec;
}

}  // namespace detail

// Hand-built warm-start corpus standing in for teacher-generated specs. For
// each task archetype it holds the minimal chain over that task's required
// roles (capacities one level above threshold), paired with a generalist
// pipeline chaining the union of all required roles at large capacity. The
// padding is deliberate; training is what trims it.
inline std::vector<OrchestrationSpec> teacher_corpus(const SyntheticEnv& env,
                                                     const PolicyGrammar& grammar) {
  auto bump = [](CapacityLevel c) {
    return static_cast<CapacityLevel>(std::min(static_cast<int>(c) + 1, 2));
  };

  std::vector<std::pair<std::string, CapacityLevel>> union_roles;
  for (const TaskArchetype& arch : env.archetypes()) {
    for (const auto& [role_name, threshold] : arch.required) {
      auto it = std::find_if(union_roles.begin(), union_roles.end(),
                             [&](const auto& r) { return r.first == role_name; });
      if (it == union_roles.end())
        union_roles.emplace_back(role_name, threshold);
      else
        it->second = std::max(it->second, threshold);
    }
  }
  if (static_cast<int>(union_roles.size()) > grammar.max_steps())
    union_roles.resize(static_cast<std::size_t>(grammar.max_steps()));
  for (auto& [_, cap] : union_roles) cap = bump(cap);
  OrchestrationSpec pipeline = detail::teacher_chain(grammar, union_roles);

  std::vector<OrchestrationSpec> corpus;
  for (const TaskArchetype& arch : env.archetypes()) {
    std::vector<std::pair<std::string, CapacityLevel>> roles;
    for (const auto& [role_name, threshold] : arch.required) roles.emplace_back(role_name, bump(threshold));
    OrchestrationSpec chain = detail::teacher_chain(grammar, roles);
    if (!chain.steps.empty()) corpus.push_back(std::move(chain));
    if (!pipeline.steps.empty()) corpus.push_back(pipeline);
  }
  return corpus;
}

// Full optimization loop: grouped rollouts with group-relative advantages,
// plus at most one counterfactual pair per group when enabled. Deterministic
// byte-for-byte in its report for a fixed seed.
inline TrainReport train(const SyntheticEnv& env, const AppConfig& cfg, std::uint64_t seed) {
  RolePool pool = RolePool::baseline();
  PolicyParams params = PolicyParams::make(cfg.policy, pool, cfg.cf);
  SyntheticBackend backend(env, pool);
  SamplerState sampler({cfg.cf.ema_alpha, cfg.cf.temperature, cfg.cf.p_min});

  if (cfg.train.warm_start_epochs > 0) {
    std::vector<OrchestrationSpec> corpus = teacher_corpus(env, params.grammar);
    warm_start(params, corpus, cfg.train.warm_start_epochs);
  }

  TrainReport report;
  long cumulative_fresh = 0;
  const int B = cfg.train.group_size;

  struct QueuedCf {
    CounterfactualPair pair;
    OrchestrationSpec original;
    OrchestrationSpec edited;
    TaskInstance task;
  };

  for (int iter = 0; iter < cfg.train.iterations; ++iter) {
    TrainRow row;
    row.iteration = iter;

    std::vector<GrpoItem> batch;
    std::vector<QueuedCf> queued;
    double reward_sum = 0.0;
    double r_task_sum = 0.0;
    long token_sum = 0;
    int n_rollouts = 0, n_valid = 0;

    for (std::size_t t = 0; t < env.tasks().size(); ++t) {
      const TaskInstance& task = env.tasks()[t];

      struct Rollout {
        OrchestrationSpec spec;
        DecisionTrace trace;
        bool valid = false;
        OrchestrationGraph graph;
        std::unique_ptr<ExecutionCache> cache;
        ExecutionRecord record;
        RewardBreakdown reward;
      };
      std::vector<Rollout> group(static_cast<std::size_t>(B));
      std::vector<double> rewards;

      for (int b = 0; b < B; ++b) {
        Rollout& ro = group[static_cast<std::size_t>(b)];
        std::mt19937_64 rng(stream_seed(seed, {0xA, static_cast<std::uint64_t>(iter), t,
                                               static_cast<std::uint64_t>(b)}));
        auto [spec, trace] = sample_spec(params, task, rng);
        ro.spec = std::move(spec);
        ro.trace = std::move(trace);
        ro.valid = validate(ro.spec, pool).valid;
        if (ro.valid) {
          ro.graph = compile(ro.spec);
          ro.cache = std::make_unique<ExecutionCache>();
          std::uint64_t exec_seed = stream_seed(
              seed, {0xE, static_cast<std::uint64_t>(iter), t, static_cast<std::uint64_t>(b)});
          ro.record = execute(ro.graph, task, backend, ro.cache.get(), exec_seed);
          ro.reward = orchestration_reward(ro.record, task, &ro.graph, cfg.reward);
          r_task_sum += ro.reward.r_task;
          token_sum += ro.record.total_tokens;
          cumulative_fresh += ro.record.fresh_tokens;
          ++n_valid;
        } else {
          ro.record = ExecutionRecord::invalid_record(spec_digest(ro.spec));
          ro.reward = orchestration_reward(ro.record, task, nullptr, cfg.reward);
        }
        rewards.push_back(ro.reward.total);
        reward_sum += ro.reward.total;
        ++n_rollouts;
      }

      std::vector<double> advantages = group_advantages(rewards, cfg.reward.eps_adv);
      for (int b = 0; b < B; ++b)
        batch.push_back({group[static_cast<std::size_t>(b)].trace,
                         advantages[static_cast<std::size_t>(b)]});

      if (cfg.cf.enabled) {
        Rollout* chosen = nullptr;
        for (Rollout& ro : group)
          if (ro.valid) {
            chosen = &ro;
            break;
          }
        if (chosen && !chosen->record.failed()) {
          FeasibleMutations feas = feasible_mutations(chosen->graph, pool);
          if (!feas.empty()) {
            std::mt19937_64 rng(stream_seed(seed, {0xC, static_cast<std::uint64_t>(iter), t}));
            auto [kind, site] = sample_mutation(sampler, feas, rng);
            MutationResult mres = apply_mutation(chosen->spec, site, pool);
            OrchestrationGraph edited_graph = compile(mres.edited);
            ExecutionRecord cf_record = execute_counterfactual(chosen->record, edited_graph, task,
                                                               backend, *chosen->cache);
            RewardBreakdown cf_reward = orchestration_reward(cf_record, task, &edited_graph, cfg.reward);
            cumulative_fresh += cf_record.fresh_tokens;

            Contrast ct = contrast(chosen->reward, cf_reward, cfg.cf);
            update_sampler(sampler, kind, ct.delta);

            if (ct.filtered) {
              ++row.cf_pairs_filtered;
            } else {
              CounterfactualPair pair;
              pair.original = serialize(chosen->spec);
              pair.edited = serialize(mres.edited);
              pair.site = site;
              pair.span_original = mres.span_original;
              pair.span_edited = mres.span_edited;
              pair.delta = ct.delta;
              pair.direction = ct.direction;
              pair.weight = ct.weight;
              pair.filtered = false;
              queued.push_back({std::move(pair), chosen->spec, mres.edited, task});
              ++row.cf_pairs_used;
            }
          }
        }
      }
    }

    grpo_step(params, batch, static_cast<std::size_t>(B));
    for (const QueuedCf& q : queued) cf_step(params, q.pair, q.original, q.edited, q.task);

    row.mean_reward = reward_sum / static_cast<double>(n_rollouts);
    row.mean_task_success = n_valid > 0 ? r_task_sum / n_valid : 0.0;
    row.mean_total_tokens = n_valid > 0 ? static_cast<double>(token_sum) / n_valid : 0.0;
    row.validity_rate = static_cast<double>(n_valid) / static_cast<double>(n_rollouts);
    row.sampler_u = sampler.u;
    row.sampler_p = sampler.p;
    row.cumulative_fresh_tokens = cumulative_fresh;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace maestro
