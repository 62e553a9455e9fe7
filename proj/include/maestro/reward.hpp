#pragma once

#include <cmath>
#include <vector>

#include "maestro/config.hpp"
#include "maestro/engine.hpp"

namespace maestro {

struct RewardBreakdown {
  double r_task = 0.0;
  double b_tok = 0.0;
  double c_graph = 0.0;
  double total = 0.0;
  bool valid = true;
};

// Exact match of the final answer against the answer key after whitespace
// and case normalization. A failed run never scores.
inline double task_success(const ExecutionRecord& record, const TaskInstance& task) {
  if (!task.answer_key)
    throw std::invalid_argument("task_success: task `" + task.id + "` has no answer key");
  if (record.failed()) return 0.0;
  return answers_match(record.final_answer, *task.answer_key) ? 1.0 : 0.0;
}

// Clamped linear budget bonus in [0, 1].
inline double token_bonus(const ExecutionRecord& record, const RewardConfig& cfg) {
  double b = 1.0 - static_cast<double>(record.total_tokens) / cfg.token_budget;
  return b > 0.0 ? b : 0.0;
}

inline double structure_cost_from_counts(std::size_t agents, std::size_t edges,
                                         const RewardConfig& cfg) {
  double v = static_cast<double>(agents) / cfg.v_max;
  double e = static_cast<double>(edges) / cfg.e_max;
  double c = (v + e) / 2.0;
  return c < 0.0 ? 0.0 : (c > 1.0 ? 1.0 : c);
}

inline RewardBreakdown orchestration_reward(const ExecutionRecord& record, const TaskInstance& task,
                                            const OrchestrationGraph* graph,
                                            const RewardConfig& cfg) {
  RewardBreakdown out;
  if (!record.valid) {
    out.valid = false;
    out.total = cfg.r_invalid;
    return out;
  }
  out.r_task = task_success(record, task);
  out.b_tok = token_bonus(record, cfg);
  out.c_graph = graph ? structure_cost(*graph, cfg)
                      : structure_cost_from_counts(record.agent_count, record.edge_count, cfg);
  out.total = cfg.execution_weight * out.r_task + cfg.efficiency_weight * out.b_tok -
              cfg.structure_weight * out.c_graph;
  return out;
}

// Group-relative advantages: (R_i - mean) / (population std + eps).
inline std::vector<double> group_advantages(const std::vector<double>& rewards, double eps) {
  if (rewards.size() < 2)
    throw std::invalid_argument("group_advantages: group size must be at least 2");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rewards.size());
  double denom = std::sqrt(var) + eps;
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

inline nlohmann::json reward_to_json(const RewardBreakdown& r) {
  return {{"r_task", r.r_task},
          {"b_tok", r.b_tok},
          {"c_graph", r.c_graph},
          {"total", r.total},
          {"valid", r.valid}};
}

}  // namespace maestro
