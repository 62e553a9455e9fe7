// Command-line surface: validate / compile / run / mutate / train-sim.
// Exit codes: 0 success, 1 domain failure (invalid spec, infeasible
// mutation), 2 environment failure (IO, flags, network).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "maestro/maestro.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

maestro::AppConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return {};
  return maestro::load_config(path);
}

int cmd_validate(const std::string& spec_path, const maestro::AppConfig&) {
  maestro::RolePool pool = maestro::RolePool::baseline();
  maestro::ValidationReport report = maestro::validate_text(read_file(spec_path), pool);
  std::cout << report.to_json().dump(2) << "\n";
  return report.valid ? 0 : 1;
}

int cmd_compile(const std::string& spec_path, const std::string& format,
                const maestro::AppConfig&) {
  maestro::RolePool pool = maestro::RolePool::baseline();
  maestro::OrchestrationSpec spec;
  maestro::ValidationReport report = maestro::validate_text(read_file(spec_path), pool, &spec);
  if (!report.valid) {
    std::cerr << report.to_json().dump(2) << "\n";
    return 1;
  }
  maestro::OrchestrationGraph g = maestro::compile(spec);
  if (format == "json")
    std::cout << maestro::graph_to_json(g).dump(2) << "\n";
  else
    std::cout << maestro::to_dot(g);
  return 0;
}

int cmd_run(const std::string& spec_path, const std::string& tasks_path,
            const std::string& backend_name, bool use_cache, std::uint64_t seed,
            const std::string& out_path, const maestro::AppConfig& cfg) {
  maestro::RolePool pool = maestro::RolePool::baseline();
  maestro::OrchestrationSpec spec;
  maestro::ValidationReport report = maestro::validate_text(read_file(spec_path), pool, &spec);
  if (!report.valid) {
    std::cerr << report.to_json().dump(2) << "\n";
    return 1;
  }
  maestro::OrchestrationGraph g = maestro::compile(spec);
  std::vector<maestro::TaskInstance> tasks = maestro::parse_tasks_jsonl(read_file(tasks_path));

  maestro::SyntheticEnv env(cfg.env);
  std::unique_ptr<maestro::WorkerBackend> backend;
  maestro::ScriptedBackend scripted = maestro::ScriptedBackend::demo(pool);
  if (backend_name == "scripted")
    backend = std::make_unique<maestro::ScriptedBackend>(scripted);
  else if (backend_name == "synthetic")
    backend = std::make_unique<maestro::SyntheticBackend>(env, pool);
  else if (backend_name == "http")
    backend = std::make_unique<maestro::HttpBackend>(cfg.http);
  else
    throw CLI::ValidationError("--backend must be one of scripted, synthetic, http");

  maestro::ExecutionCache cache;
  std::ostringstream lines;
  for (const maestro::TaskInstance& task : tasks) {
    maestro::ExecutionRecord rec =
        maestro::execute(g, task, *backend, use_cache ? &cache : nullptr, seed);
    nlohmann::json j = maestro::record_to_json(rec);
    if (task.answer_key) {
      maestro::RewardBreakdown rb = maestro::orchestration_reward(rec, task, &g, cfg.reward);
      j["reward"] = maestro::reward_to_json(rb);
    }
    lines << j.dump() << "\n";
  }
  if (out_path.empty())
    std::cout << lines.str();
  else
    maestro::write_file(out_path, lines.str());
  return 0;
}

int cmd_mutate(const std::string& spec_path, const std::string& kind_flag, std::uint64_t seed,
               const std::string& out_dir, const maestro::AppConfig&) {
  maestro::RolePool pool = maestro::RolePool::baseline();
  maestro::OrchestrationSpec spec;
  maestro::ValidationReport report = maestro::validate_text(read_file(spec_path), pool, &spec);
  if (!report.valid) {
    std::cerr << report.to_json().dump(2) << "\n";
    return 1;
  }
  maestro::OrchestrationGraph g = maestro::compile(spec);
  maestro::FeasibleMutations feasible = maestro::feasible_mutations(g, pool);

  if (!kind_flag.empty()) {
    maestro::MutationKind want;
    if (kind_flag == "dep")
      want = maestro::MutationKind::dependency_deletion;
    else if (kind_flag == "role")
      want = maestro::MutationKind::role_rollback;
    else if (kind_flag == "cap")
      want = maestro::MutationKind::capacity_downgrade;
    else
      throw CLI::ValidationError("--kind must be one of dep, role, cap");
    for (std::size_t i = 0; i < maestro::kMutationKinds; ++i)
      if (static_cast<maestro::MutationKind>(i) != want) feasible.sites[i].clear();
  }
  if (feasible.empty()) {
    std::cerr << "infeasible mutation\n";
    return 1;
  }

  maestro::SamplerState uniform_state;
  auto [kind, site] = maestro::sample_mutation(uniform_state, feasible, seed);
  maestro::MutationResult mres = maestro::apply_mutation(spec, site, pool);

  maestro::CounterfactualPair pair;
  pair.original = maestro::serialize(spec);
  pair.edited = maestro::serialize(mres.edited);
  pair.site = site;
  pair.span_original = mres.span_original;
  pair.span_edited = mres.span_edited;

  std::filesystem::path out =
      std::filesystem::path(out_dir) /
      (std::filesystem::path(spec_path).stem().string() + ".edited.yaml");
  std::filesystem::create_directories(out.parent_path().empty() ? "." : out.parent_path());
  maestro::write_file(out.string(), pair.edited.text);

  nlohmann::json j = maestro::pair_to_json(pair, /*include_rewards=*/false);
  j["edited_file"] = out.string();
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_train_sim(const std::string& config_path, std::uint64_t seed, const std::string& cf_flag,
                  const std::string& out_dir) {
  maestro::AppConfig cfg = load_config_or_default(config_path);
  if (cf_flag == "on")
    cfg.cf.enabled = true;
  else if (cf_flag == "off")
    cfg.cf.enabled = false;
  else if (!cf_flag.empty())
    throw CLI::ValidationError("--cf must be on or off");

  maestro::SyntheticEnv env(cfg.env);
  maestro::TrainReport report = maestro::train(env, cfg, seed);

  std::filesystem::create_directories(out_dir);
  std::string suffix = cfg.cf.enabled ? "cf_on" : "cf_off";
  std::filesystem::path csv = std::filesystem::path(out_dir) / ("report_" + suffix + ".csv");
  std::filesystem::path jsonl = std::filesystem::path(out_dir) / ("report_" + suffix + ".jsonl");
  maestro::write_file(csv.string(), report.to_csv());
  maestro::write_file(jsonl.string(), report.to_jsonl());

  const maestro::TrainRow& last = report.rows.back();
  std::cout << "iterations=" << report.rows.size() << " final_mean_reward=" << last.mean_reward
            << " final_mean_tokens=" << last.mean_total_tokens
            << " cumulative_fresh_tokens=" << last.cumulative_fresh_tokens << "\n"
            << "wrote " << csv.string() << " and " << jsonl.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orchestration-spec toolkit: validate, compile, execute, mutate, train"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 42;
  app.add_option("--config", config_path, "YAML config file");
  app.add_option("--seed", seed, "random seed (default 42)");

  auto* validate_cmd = app.add_subcommand("validate", "validate a spec file");
  std::string v_spec;
  validate_cmd->add_option("spec", v_spec, "spec YAML path")->required();

  auto* compile_cmd = app.add_subcommand("compile", "compile a spec to a graph");
  std::string c_spec, c_format = "dot";
  compile_cmd->add_option("spec", c_spec, "spec YAML path")->required();
  compile_cmd->add_option("--format", c_format, "dot or json");

  auto* run_cmd = app.add_subcommand("run", "execute a spec over tasks");
  std::string r_spec, r_tasks, r_backend = "scripted", r_out;
  bool r_cache = false;
  run_cmd->add_option("spec", r_spec, "spec YAML path")->required();
  run_cmd->add_option("--tasks", r_tasks, "tasks JSONL path")->required();
  run_cmd->add_option("--backend", r_backend, "scripted, synthetic, or http");
  run_cmd->add_flag("--cache", r_cache, "enable node-level execution cache");
  run_cmd->add_option("--out", r_out, "write JSONL records here instead of stdout");

  auto* mutate_cmd = app.add_subcommand("mutate", "apply one counterfactual edit");
  std::string m_spec, m_kind, m_out = ".";
  mutate_cmd->add_option("spec", m_spec, "spec YAML path")->required();
  mutate_cmd->add_option("--kind", m_kind, "dep, role, or cap (default: sampled)");
  mutate_cmd->add_option("--out", m_out, "directory for the edited spec file");

  auto* train_cmd = app.add_subcommand("train-sim", "run the toy training loop");
  std::string t_cf, t_out = "train_out";
  train_cmd->add_option("--cf", t_cf, "on or off (default: config value)");
  train_cmd->add_option("--out", t_out, "output directory");

  // --config/--seed are global; let them appear after the subcommand too.
  for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    maestro::AppConfig cfg = load_config_or_default(config_path);
    if (app.count("--seed") == 0) seed = cfg.seed;
    if (validate_cmd->parsed()) return cmd_validate(v_spec, cfg);
    if (compile_cmd->parsed()) return cmd_compile(c_spec, c_format, cfg);
    if (run_cmd->parsed()) return cmd_run(r_spec, r_tasks, r_backend, r_cache, seed, r_out, cfg);
    if (mutate_cmd->parsed()) return cmd_mutate(m_spec, m_kind, seed, m_out, cfg);
    if (train_cmd->parsed()) return cmd_train_sim(config_path, seed, t_cf, t_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const maestro::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
