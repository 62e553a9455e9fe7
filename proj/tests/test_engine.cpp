#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <thread>

#include "support.hpp"

using namespace maestro;

namespace {

OrchestrationSpec chain_spec() {
  OrchestrationSpec spec;
  AgentEntry a;
  a.role = {"first", "planner", "Plan it."};
  a.capacity = CapacityLevel::small;
  AgentEntry b;
  b.role = {"second", "verifier", "Verify it."};
  b.capacity = CapacityLevel::small;
  b.refs = {"first"};
  spec.steps.push_back({a});
  spec.steps.push_back({b});
  return spec;
}

ScriptedBackend chain_backend() {
  ScriptedBackend backend;
  backend.add("planner",
              [](const WorkerCall& call) { return "A:" + call.task.prompt; }, 3, 4);
  backend.add("verifier",
              [](const WorkerCall& call) { return "B:" + call.parent_outputs.at(0).second; }, 5, 6);
  return backend;
}

TaskInstance env_task(const SyntheticEnv& env, const std::string& id) {
  for (const TaskInstance& t : env.tasks())
    if (t.id == id) return t;
  throw std::runtime_error("no such env task: " + id);
}

GraphEdit edit_of(const MutationSite& site) {
  if (site.kind == MutationKind::dependency_deletion)
    return EdgeEdit{site.deleted_ref, site.agent};
  return NodeEdit{site.agent};
}

}  // namespace

TEST_CASE("scripted chain composes outputs through the graph") {
  OrchestrationGraph g = compile(chain_spec());
  ScriptedBackend backend = chain_backend();
  TaskInstance task{"t1", "what is 2+2", "4"};

  ExecutionRecord rec = execute(g, task, backend, nullptr, 7);
  CHECK(rec.final_answer == "B:A:what is 2+2");
  CHECK(rec.agent_count == 2);
  CHECK(rec.edge_count == 1);
  CHECK(rec.total_tokens == 3 + 4 + 5 + 6);
  CHECK(rec.fresh_tokens == rec.total_tokens);
  CHECK_FALSE(rec.failed());
  REQUIRE(rec.per_node.size() == 2);
  CHECK(rec.per_node[0].node_id == "first");
  CHECK(rec.per_node[1].node_id == "second");
}

TEST_CASE("second cached run is all hits with identical outcome") {
  OrchestrationGraph g = compile(chain_spec());
  ScriptedBackend backend = chain_backend();
  TaskInstance task{"t1", "what is 2+2", "4"};
  ExecutionCache cache;

  ExecutionRecord first = execute(g, task, backend, &cache, 7);
  ExecutionRecord second = execute(g, task, backend, &cache, 7);
  CHECK(same_outcome(first, second));
  for (const auto& n : first.per_node) CHECK_FALSE(n.cache_hit);
  for (const auto& n : second.per_node) CHECK(n.cache_hit);
  CHECK(second.total_tokens == first.total_tokens);
  CHECK(second.fresh_tokens == 0);
}

TEST_CASE("cache on and off produce identical outcomes") {
  SyntheticEnv env;
  RolePool pool = RolePool::baseline();
  SyntheticBackend backend(env, pool);
  std::mt19937_64 rng(99);
  for (int i = 0; i < 25; ++i) {
    OrchestrationSpec spec = test_support::random_valid_spec(rng, pool);
    OrchestrationGraph g = compile(spec);
    TaskInstance task = env.tasks()[i % env.tasks().size()];
    ExecutionCache cache;
    ExecutionRecord with_cache = execute(g, task, backend, &cache, 1000 + i);
    ExecutionRecord without = execute(g, task, backend, nullptr, 1000 + i);
    CHECK(same_outcome(with_cache, without));
  }
}

TEST_CASE("synthetic execution is byte-identical under a fixed seed") {
  SyntheticEnv env;
  RolePool pool = RolePool::baseline();
  SyntheticBackend backend(env, pool);
  OrchestrationGraph g = compile(parse_spec(test_support::read_fixture("pipeline.yaml")));
  TaskInstance task = env_task(env, "count_items");

  ExecutionRecord r1 = execute(g, task, backend, nullptr, 42);
  ExecutionRecord r2 = execute(g, task, backend, nullptr, 42);
  CHECK(record_to_jsonl(r1) == record_to_jsonl(r2));
}

TEST_CASE("token accounting matches the per-node sum") {
  SyntheticEnv env;
  RolePool pool = RolePool::baseline();
  SyntheticBackend backend(env, pool);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    OrchestrationGraph g = compile(test_support::random_valid_spec(rng, pool));
    ExecutionRecord rec = execute(g, env.tasks()[i % env.tasks().size()], backend, nullptr, i);
    long sum = 0;
    for (const auto& n : rec.per_node)
      if (n.status == NodeStatus::ok) sum += n.result.tokens_in + n.result.tokens_out;
    CHECK(rec.total_tokens == sum);
  }
}

TEST_CASE("per-node order is independent of completion order") {
  OrchestrationSpec spec;
  std::vector<AgentEntry> layer;
  for (int j = 0; j < 3; ++j) {
    AgentEntry a;
    a.role = {"worker" + std::to_string(j), "planner", "Work."};
    a.capacity = static_cast<CapacityLevel>(j);
    layer.push_back(a);
  }
  spec.steps.push_back(layer);
  OrchestrationGraph g = compile(spec);
  TaskInstance task{"t", "p", std::nullopt};

  auto make_backend = [](bool reversed_delays) {
    ScriptedBackend b;
    for (CapacityLevel c : {CapacityLevel::small, CapacityLevel::medium, CapacityLevel::large}) {
      int delay_ms = reversed_delays ? (2 - static_cast<int>(c)) * 15 : 0;
      b.add("planner", c, [delay_ms, c](const WorkerCall&) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
        return std::string("out_") + capacity_name(c);
      });
    }
    return b;
  };

  ScriptedBackend slow = make_backend(true);
  ScriptedBackend fast = make_backend(false);
  ExecutionRecord permuted = execute(g, task, slow, nullptr, 1);
  ExecutionRecord ordered = execute(g, task, fast, nullptr, 1);
  CHECK(same_outcome(permuted, ordered));
  CHECK(permuted.per_node[0].node_id == "worker0");
  CHECK(permuted.per_node[2].node_id == "worker2");
}

TEST_CASE("a failed node poisons descendants and keeps partial results") {
  OrchestrationSpec spec = parse_spec(test_support::read_fixture("pipeline.yaml"));
  OrchestrationGraph g = compile(spec);
  RolePool pool = RolePool::baseline();
  ScriptedBackend backend;
  for (const std::string& role : pool.role_names())
    backend.add(role, [role](const WorkerCall&) { return "ok_" + role; });
  backend.add("equation_builder",
              [](const WorkerCall&) -> std::string { throw BackendError("boom"); });

  TaskInstance task{"t", "p", "whatever"};
  ExecutionRecord rec = execute(g, task, backend, nullptr, 3);
  REQUIRE(rec.failed());
  CHECK(*rec.failed_node == "build_equations");
  CHECK(rec.valid);  // spec-level validity is not a runtime property

  auto status_of = [&](const std::string& id) {
    for (const auto& n : rec.per_node)
      if (n.node_id == id) return n.status;
    throw std::runtime_error("missing node");
  };
  CHECK(status_of("extract_quantities") == NodeStatus::ok);
  CHECK(status_of("check_units") == NodeStatus::ok);  // sibling branch retained
  CHECK(status_of("build_equations") == NodeStatus::failed);
  CHECK(status_of("compute_answer") == NodeStatus::skipped);
  CHECK(status_of("verify_final_answer") == NodeStatus::skipped);
  CHECK(task_success(rec, task) == 0.0);
}

TEST_CASE("aggregate uses the single terminal verbatim") {
  OrchestrationGraph g = compile(chain_spec());
  CHECK(aggregate(g, {{"first", "x"}, {"second", " Final Answer "}}) == " Final Answer ");
}

TEST_CASE("aggregate majority vote with positional tiebreak") {
  OrchestrationSpec spec;
  std::vector<AgentEntry> layer;
  for (int j = 0; j < 3; ++j) {
    AgentEntry a;
    a.role = {"t" + std::to_string(j), "verifier", "Answer."};
    a.capacity = CapacityLevel::small;
    layer.push_back(a);
  }
  spec.steps.push_back(layer);
  OrchestrationGraph g3 = compile(spec);

  CHECK(aggregate(g3, {{"t0", "A"}, {"t1", "A"}, {"t2", "B"}}) == "A");
  CHECK(aggregate(g3, {{"t0", "B"}, {"t1", "A"}, {"t2", "a "}}) == "A");  // normalized majority

  spec.steps[0].pop_back();
  OrchestrationGraph g2 = compile(spec);
  CHECK(aggregate(g2, {{"t0", "A"}, {"t1", "B"}}) == "A");  // tie -> lowest position
}

TEST_CASE("counterfactual on a sink capacity recomputes exactly one node") {
  SyntheticEnv env;
  RolePool pool = RolePool::baseline();
  SyntheticBackend backend(env, pool);
  OrchestrationSpec spec = parse_spec(test_support::read_fixture("pipeline.yaml"));
  OrchestrationGraph g = compile(spec);
  TaskInstance task = env_task(env, "count_items");
  ExecutionCache cache;
  ExecutionRecord orig = execute(g, task, backend, &cache, 42);

  MutationSite site;
  site.kind = MutationKind::capacity_downgrade;
  site.agent = "verify_final_answer";
  site.capacity_from = CapacityLevel::medium;
  site.capacity_to = CapacityLevel::small;
  MutationResult mres = apply_mutation(spec, site, pool);
  OrchestrationGraph edited = compile(mres.edited);

  ExecutionRecord cf = execute_counterfactual(orig, edited, task, backend, cache);
  int recomputed = 0;
  for (const auto& n : cf.per_node)
    if (!n.cache_hit) {
      ++recomputed;
      CHECK(n.node_id == "verify_final_answer");
    }
  CHECK(recomputed == 1);
}

TEST_CASE("dependency deletion recomputes only the affected chain") {
  SyntheticEnv env;
  RolePool pool = RolePool::baseline();
  SyntheticBackend backend(env, pool);
  OrchestrationSpec spec = parse_spec(test_support::read_fixture("pipeline.yaml"));
  OrchestrationGraph g = compile(spec);
  TaskInstance task = env_task(env, "multi_step_word");
  ExecutionCache cache;
  ExecutionRecord orig = execute(g, task, backend, &cache, 42);

  MutationSite site;
  site.kind = MutationKind::dependency_deletion;
  site.agent = "compute_answer";
  site.deleted_ref = "build_equations";
  MutationResult mres = apply_mutation(spec, site, pool);
  OrchestrationGraph edited = compile(mres.edited);

  ExecutionRecord cf = execute_counterfactual(orig, edited, task, backend, cache);
  std::set<std::string> recomputed;
  for (const auto& n : cf.per_node)
    if (!n.cache_hit) recomputed.insert(n.node_id);
  CHECK(recomputed == std::set<std::string>{"compute_answer", "verify_final_answer"});
}

TEST_CASE("cached counterfactual equals from-scratch execution on random mutations") {
  SyntheticEnv env;
  RolePool pool = RolePool::baseline();
  SyntheticBackend backend(env, pool);
  std::mt19937_64 rng(4242);

  int checked = 0;
  while (checked < 40) {
    OrchestrationSpec spec = test_support::random_valid_spec(rng, pool);
    OrchestrationGraph g = compile(spec);
    FeasibleMutations feas = feasible_mutations(g, pool);
    if (feas.empty()) continue;
    TaskInstance task = env.tasks()[checked % env.tasks().size()];

    ExecutionCache cache;
    std::uint64_t seed = 9000 + static_cast<std::uint64_t>(checked);
    ExecutionRecord orig = execute(g, task, backend, &cache, seed);

    SamplerState uniform;
    auto [kind, site] = sample_mutation(uniform, feas, rng);
    MutationResult mres = apply_mutation(spec, site, pool);
    OrchestrationGraph edited = compile(mres.edited);

    ExecutionRecord cf = execute_counterfactual(orig, edited, task, backend, cache);
    ExecutionRecord scratch = execute(edited, task, backend, nullptr, seed);
    CHECK(same_outcome(cf, scratch));

    std::set<std::string> allowed = affected_set(g, edit_of(site));
    for (const auto& n : cf.per_node)
      if (!n.cache_hit) CHECK(allowed.count(n.node_id) == 1);
    ++checked;
  }
}

TEST_CASE("scripted backend is pure") {
  ScriptedBackend backend = chain_backend();
  WorkerCall call;
  call.task = {"t", "prompt", std::nullopt};
  call.role = {"first", "planner", "Plan it."};
  call.capacity = CapacityLevel::small;
  CHECK(backend.run(call) == backend.run(call));
  call.role.base_role = "unknown_role";
  CHECK_THROWS_AS(backend.run(call), BackendError);
}

TEST_CASE("synthetic success frequency moves with capacity") {
  SyntheticEnv env;
  RolePool pool = RolePool::baseline();
  SyntheticBackend backend(env, pool);
  TaskInstance task = env_task(env, "arithmetic_chain");  // calculator threshold: large
  const TaskArchetype* arch = env.find(task.id);
  REQUIRE(arch != nullptr);

  auto success_rate = [&](CapacityLevel cap) {
    int hits = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      WorkerCall call;
      call.task = task;
      call.role = {"calc", "calculator", "Do the arithmetic for this task, carefully."};
      call.capacity = cap;
      call.seed = static_cast<std::uint64_t>(i) * 2654435761u + static_cast<int>(cap);
      std::string out = backend.run(call).output;
      if (out.find("calculator") != std::string::npos) ++hits;
    }
    return static_cast<double>(hits) / n;
  };

  double p_small = success_rate(CapacityLevel::small);
  double p_large = success_rate(CapacityLevel::large);
  double expected_small =
      env.success_probability(*arch, "calculator", CapacityLevel::small, true);
  double expected_large =
      env.success_probability(*arch, "calculator", CapacityLevel::large, true);
  CHECK(p_large > p_small);
  CHECK(std::abs(p_small - expected_small) < 0.02);
  CHECK(std::abs(p_large - expected_large) < 0.02);
}

TEST_CASE("synthetic token cost is fixed per capacity") {
  SyntheticEnv env;
  RolePool pool = RolePool::baseline();
  SyntheticBackend backend(env, pool);
  WorkerCall call;
  call.task = env_task(env, "count_items");
  call.role = {"c", "calculator", "Compute."};
  for (int c = 0; c < 3; ++c) {
    call.capacity = static_cast<CapacityLevel>(c);
    WorkerResult r = backend.run(call);
    CHECK(r.tokens_in + r.tokens_out == env.config().tokens_per_call[static_cast<std::size_t>(c)]);
  }
  CHECK(env.config().tokens_per_call == std::array<int, 3>{120, 260, 520});
}

TEST_CASE("synthetic backend rejects unknown tasks") {
  SyntheticEnv env;
  RolePool pool = RolePool::baseline();
  SyntheticBackend backend(env, pool);
  WorkerCall call;
  call.task = {"no_such_task", "p", std::nullopt};
  call.role = {"c", "calculator", "Compute."};
  CHECK_THROWS_AS(backend.run(call), BackendError);
}

TEST_CASE("record exports as JSONL") {
  OrchestrationGraph g = compile(chain_spec());
  ScriptedBackend backend = chain_backend();
  TaskInstance task{"t1", "what is 2+2", "b:a:what is 2+2"};
  ExecutionRecord rec = execute(g, task, backend, nullptr, 7);
  CHECK(rec.correct);  // normalization: case-insensitive match

  nlohmann::json j = nlohmann::json::parse(record_to_jsonl(rec));
  CHECK(j["agent_count"] == 2);
  CHECK(j["per_node"].size() == 2);
  CHECK(j["failed_node"].is_null());
}
