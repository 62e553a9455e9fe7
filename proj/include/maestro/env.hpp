#pragma once

#include <map>
#include <string>
#include <vector>

#include "maestro/config.hpp"
#include "maestro/spec.hpp"

namespace maestro {

// A task archetype names the base roles whose (sufficiently provisioned)
// output must reach the terminal agent for the answer to come out right.
struct TaskArchetype {
  std::string id;
  std::string prompt;
  std::string answer_key;
  std::map<std::string, CapacityLevel> required;  // base_role -> minimum capacity
};

// Deterministic stand-in for benchmark execution. A worker call on a role
// succeeds with probability that degrades below the archetype's capacity
// threshold and when the duty is left at the pool's canonical text; success
// emits a marker, markers flow along dependency references, and a node whose
// accumulated markers cover the required set emits the answer token.
class SyntheticEnv {
 public:
  explicit SyntheticEnv(EnvConfig cfg = {}) : cfg_(cfg) {
    auto add = [&](std::string id, std::string prompt,
                   std::map<std::string, CapacityLevel> required) {
      archetypes_.push_back({id, std::move(prompt), "answer_" + id, std::move(required)});
      tasks_.push_back({archetypes_.back().id, archetypes_.back().prompt, archetypes_.back().answer_key});
    };
    add("count_items", "How many items remain after the described removals?",
        {{"quantity_extractor", CapacityLevel::small}, {"calculator", CapacityLevel::small}});
    add("unit_convert", "Convert the measured quantity into the requested unit.",
        {{"quantity_extractor", CapacityLevel::small}, {"calculator", CapacityLevel::medium}});
    add("multi_step_word", "Solve the multi-step word problem about shared costs.",
        {{"quantity_extractor", CapacityLevel::small},
         {"equation_builder", CapacityLevel::medium},
         {"calculator", CapacityLevel::medium}});
    add("fact_lookup", "Which of the listed statements matches the recorded fact?",
        {{"quantity_extractor", CapacityLevel::medium}});
    add("plan_route", "Order the stops so every constraint is met.",
        {{"equation_builder", CapacityLevel::small}, {"verifier", CapacityLevel::small}});
    add("verify_claim", "Decide whether the quoted claim follows from the passage.",
        {{"verifier", CapacityLevel::medium}});
    add("arithmetic_chain", "Evaluate the nested arithmetic expression.",
        {{"equation_builder", CapacityLevel::medium}, {"calculator", CapacityLevel::large}});
    add("summary_brief", "Summarize the findings into one sentence.",
        {{"quantity_extractor", CapacityLevel::small}, {"verifier", CapacityLevel::small}});
  }

  const EnvConfig& config() const { return cfg_; }
  const std::vector<TaskInstance>& tasks() const { return tasks_; }
  const std::vector<TaskArchetype>& archetypes() const { return archetypes_; }

  const TaskArchetype* find(const std::string& task_id) const {
    for (const auto& a : archetypes_)
      if (a.id == task_id) return &a;
    return nullptr;
  }

  // Probability that one worker call emits its role marker.
  double success_probability(const TaskArchetype& task, const std::string& base_role,
                             CapacityLevel capacity, bool duty_specialized) const {
    CapacityLevel threshold = CapacityLevel::small;
    if (auto it = task.required.find(base_role); it != task.required.end()) threshold = it->second;
    double p = cfg_.base_success;
    int shortfall = static_cast<int>(threshold) - static_cast<int>(capacity);
    for (int i = 0; i < shortfall; ++i) p *= cfg_.shortfall_factor;
    if (!duty_specialized) p *= cfg_.canonical_duty_factor;
    return p;
  }

  int tokens_for(CapacityLevel capacity) const {
    return cfg_.tokens_per_call[static_cast<std::size_t>(capacity)];
  }

 private:
  EnvConfig cfg_;
  std::vector<TaskArchetype> archetypes_;
  std::vector<TaskInstance> tasks_;
};

}  // namespace maestro
