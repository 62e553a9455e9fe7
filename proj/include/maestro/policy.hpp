#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "maestro/config.hpp"
#include "maestro/mutate.hpp"
#include "maestro/spec.hpp"

namespace maestro {

class OutOfGrammar : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// ---------------------------------------------------------------------------
// Grammar: which specs the toy policy can emit
// ---------------------------------------------------------------------------

// Each grammar decision is one "token" of the serialized specification.
// Duty variant 0 is the pool's canonical text; variants 1..K append a fixed
// specialization phrase, so rollback targets stay inside the grammar.
class PolicyGrammar {
 public:
  PolicyGrammar() = default;
  PolicyGrammar(const PolicyConfig& cfg, const RolePool& pool)
      : s_max_(cfg.max_steps),
        a_max_(cfg.max_agents_per_step),
        n_variants_(cfg.duty_templates + 1),
        roles_(pool.role_names()) {
    static const std::vector<std::string> suffixes = {
        "Prioritize the quantities and constraints named in the prompt.",
        "Cross-check intermediate results before passing them on.",
        "Keep the output short and directly usable downstream.",
        "Flag any assumption that the prompt does not state.",
    };
    if (cfg.duty_templates < 1 || cfg.duty_templates > static_cast<int>(suffixes.size()))
      throw std::invalid_argument("duty_templates must be in [1, 4]");
    if (s_max_ < 1 || a_max_ < 1) throw std::invalid_argument("grammar dimensions must be >= 1");
    for (const std::string& role : roles_) {
      std::vector<std::string> texts;
      texts.push_back(pool.canonical_duty(role));
      for (int v = 0; v < cfg.duty_templates; ++v)
        texts.push_back(pool.canonical_duty(role) + " " + suffixes[static_cast<std::size_t>(v)]);
      duty_texts_.push_back(std::move(texts));
    }
  }

  int max_steps() const { return s_max_; }
  int max_agents() const { return a_max_; }
  int num_roles() const { return static_cast<int>(roles_.size()); }
  int num_variants() const { return n_variants_; }
  const std::vector<std::string>& roles() const { return roles_; }

  int role_index(const std::string& name) const {
    for (std::size_t i = 0; i < roles_.size(); ++i)
      if (roles_[i] == name) return static_cast<int>(i);
    return -1;
  }

  const std::string& duty_text(int role, int variant) const {
    return duty_texts_[static_cast<std::size_t>(role)][static_cast<std::size_t>(variant)];
  }

  int variant_index(int role, const std::string& duty) const {
    const auto& texts = duty_texts_[static_cast<std::size_t>(role)];
    for (std::size_t v = 0; v < texts.size(); ++v)
      if (texts[v] == duty) return static_cast<int>(v);
    return -1;
  }

  std::string agent_type(int role, int step, int pos) const {
    return roles_[static_cast<std::size_t>(role)] + "_s" + std::to_string(step + 1) + "_a" +
           std::to_string(pos + 1);
  }

 private:
  int s_max_ = 0;
  int a_max_ = 0;
  int n_variants_ = 0;
  std::vector<std::string> roles_;
  std::vector<std::vector<std::string>> duty_texts_;  // [role][variant]
};

// ---------------------------------------------------------------------------
// Parameter layout: one flat vector, one block per decision family
// ---------------------------------------------------------------------------

struct Family {
  int offset = 0;
  int size = 0;
};

class PolicyLayout {
 public:
  PolicyLayout() = default;
  PolicyLayout(int s_max, int a_max, int n_roles, int n_variants)
      : s_max_(s_max), a_max_(a_max), n_roles_(n_roles), n_variants_(n_variants) {
    int slots = s_max_ * a_max_;
    off_step_ = 0;
    off_agent_count_ = off_step_ + s_max_;
    off_role_ = off_agent_count_ + s_max_ * a_max_;
    off_variant_ = off_role_ + slots * n_roles_;
    off_capacity_ = off_variant_ + slots * n_roles_ * n_variants_;
    off_ref_ = off_capacity_ + slots * 3;
    ref_base_.resize(static_cast<std::size_t>(slots));
    int acc = 0;
    for (int slot = 0; slot < slots; ++slot) {
      ref_base_[static_cast<std::size_t>(slot)] = acc;
      acc += (slot / a_max_) * a_max_;  // candidates: every slot in an earlier step
    }
    total_ = off_ref_ + acc;
  }

  int total() const { return total_; }
  int slots() const { return s_max_ * a_max_; }
  int slot_index(int step, int pos) const { return step * a_max_ + pos; }

  Family step_count() const { return {off_step_, s_max_}; }
  Family agent_count(int step) const { return {off_agent_count_ + step * a_max_, a_max_}; }
  Family role(int slot) const { return {off_role_ + slot * n_roles_, n_roles_}; }
  Family duty_variant(int slot, int role) const {
    return {off_variant_ + (slot * n_roles_ + role) * n_variants_, n_variants_};
  }
  Family capacity(int slot) const { return {off_capacity_ + slot * 3, 3}; }
  Family ref_include(int slot, int candidate_slot) const {
    return {off_ref_ + ref_base_[static_cast<std::size_t>(slot)] + candidate_slot, 1};
  }

  template <typename Fn>
  void for_each_family(Fn&& fn) const {
    fn(step_count());
    for (int k = 0; k < s_max_; ++k) fn(agent_count(k));
    for (int slot = 0; slot < slots(); ++slot) {
      fn(role(slot));
      for (int r = 0; r < n_roles_; ++r) fn(duty_variant(slot, r));
      fn(capacity(slot));
      int cands = (slot / a_max_) * a_max_;
      for (int c = 0; c < cands; ++c) fn(ref_include(slot, c));
    }
  }

 private:
  int s_max_ = 0, a_max_ = 0, n_roles_ = 0, n_variants_ = 0;
  int off_step_ = 0, off_agent_count_ = 0, off_role_ = 0, off_variant_ = 0, off_capacity_ = 0,
      off_ref_ = 0, total_ = 0;
  std::vector<int> ref_base_;
};

struct PolicyParams {
  PolicyGrammar grammar;
  PolicyLayout layout;
  std::vector<double> theta;
  double learning_rate = 0.05;
  double clip_range = 0.2;
  double kl_coef = 0.0;
  double cf_weight = 0.05;
  double cf_beta = 0.1;

  static PolicyParams make(const PolicyConfig& cfg, const RolePool& pool, const CfConfig& cf = {}) {
    PolicyParams p;
    p.grammar = PolicyGrammar(cfg, pool);
    p.layout = PolicyLayout(cfg.max_steps, cfg.max_agents_per_step, p.grammar.num_roles(),
                            p.grammar.num_variants());
    p.theta.assign(static_cast<std::size_t>(p.layout.total()), 0.0);
    p.learning_rate = cfg.learning_rate;
    p.clip_range = cfg.clip_range;
    p.kl_coef = cfg.kl_coef;
    p.cf_weight = cf.weight;
    p.cf_beta = cf.beta;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Decision traces
// ---------------------------------------------------------------------------

// size == 1 marks a binary (sigmoid) decision with chosen in {0, 1};
// larger sizes are categorical (softmax) with chosen indexing the family.
struct Decision {
  int offset = 0;
  int size = 0;
  int chosen = 0;
  double logp = 0.0;
};

struct DecisionTrace {
  std::vector<Decision> decisions;
  double total_logp = 0.0;
  std::map<std::pair<std::string, SpecField>, std::vector<std::size_t>> field_map;
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double log_sigmoid(double x) {
  // log(1/(1+e^{-x})) computed without overflow on either tail.
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline std::vector<double> softmax(const std::vector<double>& theta, Family f) {
  std::vector<double> p(static_cast<std::size_t>(f.size));
  double m = theta[static_cast<std::size_t>(f.offset)];
  for (int i = 1; i < f.size; ++i)
    m = std::max(m, theta[static_cast<std::size_t>(f.offset + i)]);
  double sum = 0.0;
  for (int i = 0; i < f.size; ++i) {
    p[static_cast<std::size_t>(i)] = std::exp(theta[static_cast<std::size_t>(f.offset + i)] - m);
    sum += p[static_cast<std::size_t>(i)];
  }
  for (double& x : p) x /= sum;
  return p;
}

inline double decision_logp(const std::vector<double>& theta, const Decision& d) {
  if (d.size == 1) {
    double t = theta[static_cast<std::size_t>(d.offset)];
    return d.chosen ? log_sigmoid(t) : log_sigmoid(-t);
  }
  std::vector<double> p = softmax(theta, {d.offset, d.size});
  return std::log(p[static_cast<std::size_t>(d.chosen)]);
}

// grad += coef * d(log p(chosen)) / d(theta)
inline void accumulate_logp_grad(const std::vector<double>& theta, const Decision& d, double coef,
                                 std::vector<double>& grad) {
  if (d.size == 1) {
    double s = sigmoid(theta[static_cast<std::size_t>(d.offset)]);
    grad[static_cast<std::size_t>(d.offset)] += coef * (d.chosen ? (1.0 - s) : -s);
    return;
  }
  std::vector<double> p = softmax(theta, {d.offset, d.size});
  for (int i = 0; i < d.size; ++i) {
    double indicator = (i == d.chosen) ? 1.0 : 0.0;
    grad[static_cast<std::size_t>(d.offset + i)] += coef * (indicator - p[static_cast<std::size_t>(i)]);
  }
}

inline int draw_categorical(const std::vector<double>& theta, Family f, std::mt19937_64& rng) {
  std::vector<double> p = softmax(theta, f);
  double u = uniform_real(rng);
  double acc = 0.0;
  for (int i = 0; i < f.size; ++i) {
    acc += p[static_cast<std::size_t>(i)];
    if (u < acc) return i;
  }
  return f.size - 1;
}

inline int draw_binary(const std::vector<double>& theta, Family f, std::mt19937_64& rng) {
  return uniform_real(rng) < sigmoid(theta[static_cast<std::size_t>(f.offset)]) ? 1 : 0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sampling and scoring
// ---------------------------------------------------------------------------

// The factorized toy policy shares parameters across tasks; `task` is part
// of the conditioning interface.
inline std::pair<OrchestrationSpec, DecisionTrace> sample_spec(const PolicyParams& params,
                                                               const TaskInstance& task,
                                                               std::mt19937_64& rng) {
  (void)task;
  const PolicyGrammar& g = params.grammar;
  const PolicyLayout& L = params.layout;
  OrchestrationSpec spec;
  DecisionTrace trace;

  auto record = [&](Family f, int chosen) {
    Decision d{f.offset, f.size, chosen, 0.0};
    d.logp = detail::decision_logp(params.theta, d);
    trace.total_logp += d.logp;
    trace.decisions.push_back(d);
    return trace.decisions.size() - 1;
  };

  int n_steps = detail::draw_categorical(params.theta, L.step_count(), rng) + 1;
  record(L.step_count(), n_steps - 1);

  struct Slot {
    int slot;
    std::string type;
  };
  std::vector<Slot> earlier;

  for (int k = 0; k < n_steps; ++k) {
    int n_agents = detail::draw_categorical(params.theta, L.agent_count(k), rng) + 1;
    record(L.agent_count(k), n_agents - 1);

    std::vector<AgentEntry> step;
    std::vector<Slot> this_step;
    for (int j = 0; j < n_agents; ++j) {
      int slot = L.slot_index(k, j);
      int role = detail::draw_categorical(params.theta, L.role(slot), rng);
      record(L.role(slot), role);
      int variant = detail::draw_categorical(params.theta, L.duty_variant(slot, role), rng);
      std::size_t variant_decision = record(L.duty_variant(slot, role), variant);
      int cap = detail::draw_categorical(params.theta, L.capacity(slot), rng);
      std::size_t cap_decision = record(L.capacity(slot), cap);

      AgentEntry entry;
      entry.role.agent_type = g.agent_type(role, k, j);
      entry.role.base_role = g.roles()[static_cast<std::size_t>(role)];
      entry.role.duty = g.duty_text(role, variant);
      entry.capacity = static_cast<CapacityLevel>(cap);

      std::vector<std::size_t> ref_decisions;
      for (const Slot& cand : earlier) {
        Family f = L.ref_include(slot, cand.slot);
        int take = detail::draw_binary(params.theta, f, rng);
        ref_decisions.push_back(record(f, take));
        if (take) entry.refs.push_back(cand.type);
      }

      trace.field_map[{entry.role.agent_type, SpecField::duty}] = {variant_decision};
      trace.field_map[{entry.role.agent_type, SpecField::capacity}] = {cap_decision};
      if (!ref_decisions.empty())
        trace.field_map[{entry.role.agent_type, SpecField::refs}] = std::move(ref_decisions);

      this_step.push_back({slot, entry.role.agent_type});
      step.push_back(std::move(entry));
    }
    for (Slot& s : this_step) earlier.push_back(std::move(s));
    spec.steps.push_back(std::move(step));
  }
  return {std::move(spec), std::move(trace)};
}

inline std::pair<OrchestrationSpec, DecisionTrace> sample_spec(const PolicyParams& params,
                                                               const TaskInstance& task,
                                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_spec(params, task, rng);
}

// Exact log-probability of a spec under the factorized policy. References
// are scored as per-candidate membership, so declared ref order is ignored.
inline std::pair<double, DecisionTrace> score_spec(const PolicyParams& params,
                                                   const OrchestrationSpec& spec,
                                                   const TaskInstance& task) {
  (void)task;
  const PolicyGrammar& g = params.grammar;
  const PolicyLayout& L = params.layout;
  DecisionTrace trace;

  auto record = [&](Family f, int chosen) {
    Decision d{f.offset, f.size, chosen, 0.0};
    d.logp = detail::decision_logp(params.theta, d);
    trace.total_logp += d.logp;
    trace.decisions.push_back(d);
    return trace.decisions.size() - 1;
  };

  int n_steps = static_cast<int>(spec.steps.size());
  if (n_steps < 1 || n_steps > g.max_steps())
    throw OutOfGrammar("step count " + std::to_string(n_steps) + " outside grammar");
  record(L.step_count(), n_steps - 1);

  struct Slot {
    int slot;
    std::string type;
  };
  std::vector<Slot> earlier;

  for (int k = 0; k < n_steps; ++k) {
    int n_agents = static_cast<int>(spec.steps[static_cast<std::size_t>(k)].size());
    if (n_agents < 1 || n_agents > g.max_agents())
      throw OutOfGrammar("agent count " + std::to_string(n_agents) + " outside grammar");
    record(L.agent_count(k), n_agents - 1);

    for (int j = 0; j < n_agents; ++j) {
      const AgentEntry& entry = spec.steps[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      int slot = L.slot_index(k, j);
      int role = g.role_index(entry.role.base_role);
      if (role < 0) throw OutOfGrammar("base role `" + entry.role.base_role + "` outside grammar");
      record(L.role(slot), role);
      int variant = g.variant_index(role, entry.role.duty);
      if (variant < 0)
        throw OutOfGrammar("duty of `" + entry.role.agent_type + "` matches no grammar template");
      std::size_t variant_decision = record(L.duty_variant(slot, role), variant);
      std::size_t cap_decision = record(L.capacity(slot), static_cast<int>(entry.capacity));

      std::vector<std::size_t> ref_decisions;
      std::size_t matched = 0;
      for (const Slot& cand : earlier) {
        bool take = std::find(entry.refs.begin(), entry.refs.end(), cand.type) != entry.refs.end();
        if (take) ++matched;
        ref_decisions.push_back(record(L.ref_include(slot, cand.slot), take ? 1 : 0));
      }
      if (matched != entry.refs.size())
        throw OutOfGrammar("refs of `" + entry.role.agent_type +
                           "` include targets outside the earlier agents");

      trace.field_map[{entry.role.agent_type, SpecField::duty}] = {variant_decision};
      trace.field_map[{entry.role.agent_type, SpecField::capacity}] = {cap_decision};
      if (!ref_decisions.empty())
        trace.field_map[{entry.role.agent_type, SpecField::refs}] = std::move(ref_decisions);
    }
    for (int j = 0; j < n_agents; ++j)
      earlier.push_back(
          {L.slot_index(k, j),
           spec.steps[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)].role.agent_type});
  }
  return {trace.total_logp, std::move(trace)};
}

using SpanFields = std::vector<std::pair<std::string, SpecField>>;

inline std::vector<std::size_t> resolve_span(const DecisionTrace& trace, const SpanFields& fields) {
  std::vector<std::size_t> out;
  for (const auto& key : fields) {
    auto it = trace.field_map.find(key);
    if (it == trace.field_map.end()) continue;
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

// Mean log-probability of the decisions behind the given fields; everything
// else conditions the trace but contributes nothing.
inline double span_logprob(const PolicyParams& params, const OrchestrationSpec& spec,
                           const TaskInstance& task, const SpanFields& fields) {
  auto [_, trace] = score_spec(params, spec, task);
  std::vector<std::size_t> ids = resolve_span(trace, fields);
  if (ids.empty()) throw std::invalid_argument("span_logprob: span resolves to zero decisions");
  double sum = 0.0;
  for (std::size_t i : ids) sum += trace.decisions[i].logp;
  return sum / static_cast<double>(ids.size());
}

// ---------------------------------------------------------------------------
// Warm start (likelihood fitting)
// ---------------------------------------------------------------------------

inline double corpus_loglik(const PolicyParams& params, const std::vector<OrchestrationSpec>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("corpus is empty");
  double sum = 0.0;
  TaskInstance dummy{"corpus", "corpus", std::nullopt};
  for (const auto& spec : corpus) sum += score_spec(params, spec, dummy).first;
  return sum / static_cast<double>(corpus.size());
}

// Gradient ascent on mean corpus log-likelihood.
inline void warm_start(PolicyParams& params, const std::vector<OrchestrationSpec>& corpus,
                       int epochs) {
  if (corpus.empty()) throw std::invalid_argument("warm_start: corpus is empty");
  TaskInstance dummy{"corpus", "corpus", std::nullopt};
  for (int e = 0; e < epochs; ++e) {
    std::vector<double> grad(params.theta.size(), 0.0);
    for (const auto& spec : corpus) {
      auto [_, trace] = score_spec(params, spec, dummy);
      double coef = 1.0 / static_cast<double>(corpus.size());
      for (const Decision& d : trace.decisions)
        detail::accumulate_logp_grad(params.theta, d, coef, grad);
    }
    for (std::size_t i = 0; i < params.theta.size(); ++i)
      if (grad[i] != 0.0) params.theta[i] += params.learning_rate * grad[i];
  }
}

// ---------------------------------------------------------------------------
// GRPO update
// ---------------------------------------------------------------------------

struct GrpoItem {
  DecisionTrace trace;  // logps recorded under the sampling-time snapshot
  double advantage = 0.0;
};

namespace detail {

template <bool WithGrad>
double grpo_objective(const PolicyParams& params, const std::vector<GrpoItem>& items,
                      std::vector<double>* grad, std::size_t group_size) {
  if (items.empty()) throw std::invalid_argument("grpo: empty group");
  double total = 0.0;
  double denom = static_cast<double>(group_size == 0 ? items.size() : group_size);
  for (const GrpoItem& item : items) {
    if (item.trace.decisions.empty()) throw std::invalid_argument("grpo: empty trace");
    double per = 1.0 / (denom * static_cast<double>(item.trace.decisions.size()));
    for (const Decision& d : item.trace.decisions) {
      double lp_new = decision_logp(params.theta, d);
      double rho = std::exp(lp_new - d.logp);
      double clipped = std::min(std::max(rho, 1.0 - params.clip_range), 1.0 + params.clip_range);
      double a = item.advantage;
      double unclipped_term = rho * a;
      double clipped_term = clipped * a;
      if (unclipped_term <= clipped_term) {
        total += per * unclipped_term;
        if constexpr (WithGrad) accumulate_logp_grad(params.theta, d, per * a * rho, *grad);
      } else {
        total += per * clipped_term;
      }
      if (params.kl_coef != 0.0) {
        double delta = d.logp - lp_new;  // log(pi_old / pi_new)
        double k3 = std::exp(delta) - delta - 1.0;
        total -= params.kl_coef * per * k3;
        if constexpr (WithGrad)
          accumulate_logp_grad(params.theta, d, -params.kl_coef * per * (1.0 - std::exp(delta)),
                               *grad);
      }
    }
  }
  return total;
}

}  // namespace detail

// `group_size` sets the normalizer: the objective is the per-trace decision
// mean, averaged over each group of `group_size` rollouts and summed across
// groups. Zero (the default) normalizes over the whole batch.
inline double grpo_surrogate(const PolicyParams& params, const std::vector<GrpoItem>& items,
                             std::size_t group_size = 0) {
  return detail::grpo_objective<false>(params, items, nullptr, group_size);
}

// One clipped-surrogate ascent step; returns the surrogate value before the
// update. Traces sampled from the current params give ratios of exactly 1.
inline double grpo_step(PolicyParams& params, const std::vector<GrpoItem>& items,
                        std::size_t group_size = 0) {
  std::vector<double> grad(params.theta.size(), 0.0);
  double value = detail::grpo_objective<true>(params, items, &grad, group_size);
  for (std::size_t i = 0; i < params.theta.size(); ++i)
    if (grad[i] != 0.0) params.theta[i] += params.learning_rate * grad[i];
  return value;
}

// ---------------------------------------------------------------------------
// Localized counterfactual update
// ---------------------------------------------------------------------------

namespace detail {

struct CfEval {
  double objective = 0.0;
  double s_orig = 0.0;
  double s_cf = 0.0;
  std::vector<std::size_t> ids_orig, ids_cf;
  DecisionTrace trace_orig, trace_cf;
};

inline CfEval cf_eval(const PolicyParams& params, const CounterfactualPair& pair,
                      const OrchestrationSpec& original, const OrchestrationSpec& edited,
                      const TaskInstance& task) {
  CfEval ev;
  SpanFields fields = {{pair.site.agent, mutated_field(pair.site.kind)}};
  ev.trace_orig = score_spec(params, original, task).second;
  ev.trace_cf = score_spec(params, edited, task).second;
  ev.ids_orig = resolve_span(ev.trace_orig, fields);
  ev.ids_cf = resolve_span(ev.trace_cf, fields);
  if (ev.ids_orig.empty() || ev.ids_cf.empty())
    throw std::invalid_argument("cf_eval: span resolves to zero decisions");
  for (std::size_t i : ev.ids_orig) ev.s_orig += ev.trace_orig.decisions[i].logp;
  ev.s_orig /= static_cast<double>(ev.ids_orig.size());
  for (std::size_t i : ev.ids_cf) ev.s_cf += ev.trace_cf.decisions[i].logp;
  ev.s_cf /= static_cast<double>(ev.ids_cf.size());
  double t = params.cf_beta * static_cast<double>(pair.direction) * (ev.s_orig - ev.s_cf);
  ev.objective = params.cf_weight * pair.weight * log_sigmoid(t);
  return ev;
}

}  // namespace detail

inline double cf_objective(const PolicyParams& params, const CounterfactualPair& pair,
                           const OrchestrationSpec& original, const OrchestrationSpec& edited,
                           const TaskInstance& task) {
  return detail::cf_eval(params, pair, original, edited, task).objective;
}

// One ascent step on the span-level preference objective. Returns false for
// filtered pairs, which must not touch the parameters.
inline bool cf_step(PolicyParams& params, const CounterfactualPair& pair,
                    const OrchestrationSpec& original, const OrchestrationSpec& edited,
                    const TaskInstance& task) {
  if (pair.filtered) return false;

  detail::CfEval ev = detail::cf_eval(params, pair, original, edited, task);
  double b = static_cast<double>(pair.direction);
  double t = params.cf_beta * b * (ev.s_orig - ev.s_cf);
  double coef = params.cf_weight * pair.weight * (1.0 - detail::sigmoid(t)) * params.cf_beta * b;

  std::vector<double> grad(params.theta.size(), 0.0);
  double inv_o = 1.0 / static_cast<double>(ev.ids_orig.size());
  for (std::size_t i : ev.ids_orig)
    detail::accumulate_logp_grad(params.theta, ev.trace_orig.decisions[i], coef * inv_o, grad);
  double inv_c = 1.0 / static_cast<double>(ev.ids_cf.size());
  for (std::size_t i : ev.ids_cf)
    detail::accumulate_logp_grad(params.theta, ev.trace_cf.decisions[i], -coef * inv_c, grad);

  for (std::size_t i = 0; i < params.theta.size(); ++i)
    if (grad[i] != 0.0) params.theta[i] += params.learning_rate * grad[i];
  return true;
}

}  // namespace maestro
