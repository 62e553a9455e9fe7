#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <yaml-cpp/yaml.h>
#include <json.hpp>

#include "maestro/common.hpp"

namespace maestro {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct TaskInstance {
  std::string id;
  std::string prompt;
  std::optional<std::string> answer_key;

  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

enum class CapacityLevel : int { small = 0, medium = 1, large = 2 };

inline const char* capacity_name(CapacityLevel c) {
  switch (c) {
    case CapacityLevel::small: return "small";
    case CapacityLevel::medium: return "medium";
    case CapacityLevel::large: return "large";
  }
  return "?";
}

inline std::optional<CapacityLevel> capacity_from_string(std::string_view s) {
  if (s == "small") return CapacityLevel::small;
  if (s == "medium") return CapacityLevel::medium;
  if (s == "large") return CapacityLevel::large;
  return std::nullopt;
}

struct RoleSpec {
  std::string agent_type;
  std::string base_role;
  std::string duty;

  friend bool operator==(const RoleSpec&, const RoleSpec&) = default;
};

struct AgentEntry {
  RoleSpec role;
  std::vector<std::string> refs;
  CapacityLevel capacity = CapacityLevel::medium;

  friend bool operator==(const AgentEntry&, const AgentEntry&) = default;
};

struct OrchestrationSpec {
  std::optional<CapacityLevel> default_capacity;
  std::vector<std::vector<AgentEntry>> steps;

  friend bool operator==(const OrchestrationSpec&, const OrchestrationSpec&) = default;

  const AgentEntry* find_agent(std::string_view agent_type) const {
    for (const auto& step : steps)
      for (const auto& a : step)
        if (a.role.agent_type == agent_type) return &a;
    return nullptr;
  }

  std::size_t agent_count() const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.size();
    return n;
  }

  std::size_t ref_count() const {
    std::size_t n = 0;
    for (const auto& s : steps)
      for (const auto& a : s) n += a.refs.size();
    return n;
  }
};

// Base-role registry: canonical duty text per role plus a variant tag.
class RolePool {
 public:
  RolePool() = default;
  RolePool(std::string variant, std::map<std::string, std::string> duties)
      : variant_(std::move(variant)), duties_(std::move(duties)) {}

  static RolePool baseline() {
    return RolePool("baseline",
                    {{"quantity_extractor", "Identify the known and unknown quantities stated in the task."},
                     {"equation_builder", "Formulate the relations that connect the known quantities to the target."},
                     {"unit_checker", "Check that every quantity carries a consistent unit or entity."},
                     {"calculator", "Carry out the arithmetic required by the task."},
                     {"verifier", "Check the candidate answer against the task statement."},
                     {"planner", "Break the task into ordered sub-goals."},
                     {"researcher", "Collect the facts the task depends on."},
                     {"summarizer", "Condense intermediate findings into a final answer."}});
  }

  const std::string& variant() const { return variant_; }
  bool contains(const std::string& base_role) const { return duties_.count(base_role) > 0; }

  const std::string& canonical_duty(const std::string& base_role) const {
    auto it = duties_.find(base_role);
    if (it == duties_.end()) throw std::out_of_range("unknown base role: " + base_role);
    return it->second;
  }

  // Deterministic role order (lexicographic, from the sorted map).
  std::vector<std::string> role_names() const {
    std::vector<std::string> names;
    names.reserve(duties_.size());
    for (const auto& [k, _] : duties_) names.push_back(k);
    return names;
  }

  std::size_t size() const { return duties_.size(); }

 private:
  std::string variant_;
  std::map<std::string, std::string> duties_;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationIssue {
  std::string rule;
  std::string location;
  std::string message;

  friend bool operator==(const ValidationIssue&, const ValidationIssue&) = default;
};

struct ValidationReport {
  bool valid = true;
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;

  bool has_rule(std::string_view rule) const {
    for (const auto& e : errors)
      if (e.rule == rule) return true;
    return false;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["valid"] = valid;
    j["errors"] = nlohmann::json::array();
    j["warnings"] = nlohmann::json::array();
    for (const auto& e : errors)
      j["errors"].push_back({{"rule", e.rule}, {"location", e.location}, {"message", e.message}});
    for (const auto& w : warnings)
      j["warnings"].push_back({{"rule", w.rule}, {"location", w.location}, {"message", w.message}});
    return j;
  }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string rule, std::string msg, int line = -1, int column = -1)
      : std::runtime_error(msg), rule_(std::move(rule)), line_(line), column_(column) {}

  const std::string& rule() const { return rule_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  std::string rule_;
  int line_;
  int column_;
};

namespace detail {

inline int mark_line(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : -1; }
inline int mark_col(const YAML::Node& n) { return n.Mark().column >= 0 ? n.Mark().column + 1 : -1; }

[[noreturn]] inline void fail(const std::string& rule, const std::string& msg, const YAML::Node& at) {
  throw ParseError(rule, msg, mark_line(at), mark_col(at));
}

inline std::string agent_loc(std::size_t step, std::size_t pos) {
  return "steps[" + std::to_string(step + 1) + "].agents[" + std::to_string(pos + 1) + "]";
}

inline std::string require_scalar(const YAML::Node& map, const char* key, const std::string& loc) {
  const YAML::Node n = map[key];
  if (!n || n.IsNull()) fail("missing-field", loc + ": missing required field `" + key + "`", map);
  if (!n.IsScalar()) fail("missing-field", loc + ": field `" + key + "` must be a scalar", n);
  std::string v = n.as<std::string>();
  if (trim(v).empty()) fail("missing-field", loc + ": field `" + key + "` is empty", n);
  return v;
}

}  // namespace detail

// Parses raw YAML text into a structured spec with defaults applied.
// Schema-shape problems (missing field, unknown capacity, malformed YAML)
// throw ParseError; cross-reference rules are the validator's job.
inline OrchestrationSpec parse_spec(const std::string& text,
                                    std::vector<ValidationIssue>* warnings = nullptr) {
  if (text.size() > (4u << 20))
    throw ParseError("parse-error", "input exceeds 4 MiB limit");

  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError("parse-error", e.msg, e.mark.line + 1, e.mark.column + 1);
  } catch (const YAML::Exception& e) {
    throw ParseError("parse-error", e.msg);
  }

  if (!root.IsMap()) throw ParseError("missing-field", "top level must be a mapping with a `steps` key");

  OrchestrationSpec spec;

  if (const YAML::Node defaults = root["defaults"]) {
    if (!defaults.IsMap()) detail::fail("missing-field", "`defaults` must be a mapping", defaults);
    for (const auto& kv : defaults) {
      const std::string key = kv.first.as<std::string>();
      if (key == "capacity") {
        if (!kv.second.IsScalar())
          detail::fail("unknown-capacity", "defaults.capacity must be a scalar", kv.second);
        const std::string tok = kv.second.as<std::string>();
        auto cap = capacity_from_string(tok);
        if (!cap)
          detail::fail("unknown-capacity",
                       "unknown capacity token `" + tok + "` (must be one of small, medium, large)",
                       kv.second);
        spec.default_capacity = *cap;
      } else if (warnings) {
        warnings->push_back({"unknown-key", "defaults", "ignored unknown defaults key `" + key + "`"});
      }
    }
  }

  const YAML::Node steps = root["steps"];
  if (!steps || steps.IsNull()) throw ParseError("missing-field", "missing required field `steps`");
  if (!steps.IsSequence() || steps.size() == 0)
    detail::fail("missing-field", "`steps` must be a non-empty sequence", steps ? steps : root);

  for (std::size_t k = 0; k < steps.size(); ++k) {
    const YAML::Node step = steps[k];
    const std::string step_loc = "steps[" + std::to_string(k + 1) + "]";
    if (!step.IsMap()) detail::fail("missing-field", step_loc + " must be a mapping with an `agents` key", step);
    const YAML::Node agents = step["agents"];
    if (!agents || !agents.IsSequence() || agents.size() == 0)
      detail::fail("missing-field", step_loc + ": `agents` must be a non-empty sequence", step);

    std::vector<AgentEntry> parsed_step;
    for (std::size_t j = 0; j < agents.size(); ++j) {
      const YAML::Node a = agents[j];
      const std::string loc = detail::agent_loc(k, j);
      if (!a.IsMap()) detail::fail("missing-field", loc + " must be a mapping", a);

      AgentEntry entry;
      entry.role.agent_type = detail::require_scalar(a, "type", loc);
      entry.role.base_role = detail::require_scalar(a, "base_role", loc);
      entry.role.duty = detail::require_scalar(a, "duty", loc);

      const YAML::Node ref = a["ref"];
      if (!ref) detail::fail("missing-field", loc + ": missing required field `ref`", a);
      if (ref.IsNull()) {
        // `ref:` with no value reads as an empty list.
      } else if (ref.IsSequence()) {
        for (const auto& r : ref) {
          if (!r.IsScalar()) detail::fail("missing-field", loc + ": `ref` entries must be scalars", r);
          entry.refs.push_back(r.as<std::string>());
        }
      } else {
        detail::fail("missing-field", loc + ": `ref` must be a sequence", ref);
      }

      const YAML::Node cap = a["capacity"];
      if (cap && !cap.IsNull()) {
        if (!cap.IsScalar()) detail::fail("unknown-capacity", loc + ": `capacity` must be a scalar", cap);
        const std::string tok = cap.as<std::string>();
        auto c = capacity_from_string(tok);
        if (!c)
          detail::fail("unknown-capacity",
                       loc + ": unknown capacity token `" + tok + "` (must be one of small, medium, large)",
                       cap);
        entry.capacity = *c;
      } else if (spec.default_capacity) {
        entry.capacity = *spec.default_capacity;
      } else {
        detail::fail("missing-field", loc + ": missing `capacity` and no defaults.capacity set", a);
      }

      if (warnings) {
        static const std::set<std::string> known = {"type", "base_role", "duty", "ref", "capacity"};
        for (const auto& kv : a) {
          const std::string key = kv.first.as<std::string>();
          if (!known.count(key))
            warnings->push_back({"unknown-key", loc, "ignored unknown agent key `" + key + "`"});
        }
      }

      parsed_step.push_back(std::move(entry));
    }
    spec.steps.push_back(std::move(parsed_step));
  }

  return spec;
}

// Cross-reference rules. `pool` backs the base-role check; everything else is
// derivable from the spec alone. Returns the full error list, not the first.
inline ValidationReport validate(const OrchestrationSpec& spec, const RolePool& pool) {
  ValidationReport report;
  auto err = [&](std::string rule, std::string loc, std::string msg) {
    report.errors.push_back({std::move(rule), std::move(loc), std::move(msg)});
  };

  if (spec.steps.empty()) err("missing-field", "steps", "spec has no steps");

  // agent_type -> step index of its declaration (first wins).
  std::map<std::string, std::size_t> declared;

  for (std::size_t k = 0; k < spec.steps.size(); ++k) {
    if (spec.steps[k].empty())
      err("missing-field", "steps[" + std::to_string(k + 1) + "]", "step has no agents");
    for (std::size_t j = 0; j < spec.steps[k].size(); ++j) {
      const AgentEntry& a = spec.steps[k][j];
      const std::string loc = detail::agent_loc(k, j);
      if (trim(a.role.agent_type).empty()) err("missing-field", loc, "empty `type`");
      if (trim(a.role.base_role).empty()) err("missing-field", loc, "empty `base_role`");
      if (trim(a.role.duty).empty()) err("missing-field", loc, "empty `duty`");

      auto [it, inserted] = declared.emplace(a.role.agent_type, k);
      if (!inserted)
        err("duplicate-type", loc, "agent type `" + a.role.agent_type + "` already declared");

      if (!a.role.base_role.empty() && !pool.contains(a.role.base_role))
        err("unknown-base-role", loc,
            "base role `" + a.role.base_role + "` is not in the `" + pool.variant() + "` role pool");
    }
  }

  for (std::size_t k = 0; k < spec.steps.size(); ++k) {
    for (std::size_t j = 0; j < spec.steps[k].size(); ++j) {
      const AgentEntry& a = spec.steps[k][j];
      const std::string loc = detail::agent_loc(k, j);
      std::set<std::string> seen;
      for (const std::string& target : a.refs) {
        if (target == a.role.agent_type) {
          err("self-ref", loc, "agent references itself");
          continue;
        }
        if (!seen.insert(target).second) {
          err("duplicate-ref", loc, "duplicate reference to `" + target + "`");
          continue;
        }
        if (k == 0) {
          err("first-step-ref", loc, "first-step agents must have empty `ref`");
          continue;
        }
        auto it = declared.find(target);
        if (it == declared.end()) {
          err("forward-ref", loc, "reference to unknown agent `" + target + "`");
        } else if (it->second >= k) {
          err("forward-ref", loc,
              "reference to `" + target + "` which is not declared in an earlier step");
        }
      }
    }
  }

  report.valid = report.errors.empty();
  return report;
}

// Parse + validate in one pass, folding parse failures into the report so
// callers always get structured diagnostics.
inline ValidationReport validate_text(const std::string& text, const RolePool& pool,
                                      OrchestrationSpec* out_spec = nullptr) {
  std::vector<ValidationIssue> warnings;
  OrchestrationSpec spec;
  try {
    spec = parse_spec(text, &warnings);
  } catch (const ParseError& e) {
    ValidationReport report;
    report.valid = false;
    std::string loc = e.line() >= 0 ? "line " + std::to_string(e.line()) + ":" + std::to_string(e.column())
                                    : std::string("input");
    report.errors.push_back({e.rule(), loc, e.what()});
    return report;
  }
  ValidationReport report = validate(spec, pool);
  for (auto& w : warnings) report.warnings.push_back(std::move(w));
  if (out_spec) *out_spec = std::move(spec);
  return report;
}

// ---------------------------------------------------------------------------
// Canonical serialization with span tracking
// ---------------------------------------------------------------------------

enum class SpecField { duty, refs, capacity };

inline const char* field_name(SpecField f) {
  switch (f) {
    case SpecField::duty: return "duty";
    case SpecField::refs: return "ref";
    case SpecField::capacity: return "capacity";
  }
  return "?";
}

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - begin; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct SerializedSpec {
  std::string text;
  std::map<std::pair<std::string, SpecField>, Span> span_index;

  Span span(const std::string& agent_type, SpecField field) const {
    auto it = span_index.find({agent_type, field});
    if (it == span_index.end())
      throw std::out_of_range("no span for (" + agent_type + ", " + field_name(field) + ")");
    return it->second;
  }

  std::string span_text(const std::string& agent_type, SpecField field) const {
    Span s = span(agent_type, field);
    return text.substr(s.begin, s.length());
  }
};

namespace detail {

// Double-quoted single-line scalar escaping; the only non-plain scalars the
// canonical form emits are duties.
inline std::string yaml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string yaml_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    switch (s[++i]) {
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case 't': out += '\t'; break;
      default: out += s[i];
    }
  }
  return out;
}

}  // namespace detail

// Deterministic canonical form: two-space indentation, fixed key order
// (type, base_role, duty, ref, capacity), duties as single-line quoted
// scalars, refs as flow sequences. Byte-identical for equal specs.
inline SerializedSpec serialize(const OrchestrationSpec& spec) {
  SerializedSpec out;
  std::string& t = out.text;

  if (spec.default_capacity) {
    t += "defaults:\n  capacity: ";
    t += capacity_name(*spec.default_capacity);
    t += "\n";
  }
  t += "steps:\n";
  for (const auto& step : spec.steps) {
    t += "  - agents:\n";
    for (const AgentEntry& a : step) {
      const std::string& id = a.role.agent_type;
      t += "      - type: " + id + "\n";
      t += "        base_role: " + a.role.base_role + "\n";
      t += "        duty: \"";
      Span duty_span{t.size(), 0};
      t += detail::yaml_escape(a.role.duty);
      duty_span.end = t.size();
      t += "\"\n";
      t += "        ref: ";
      Span ref_span{t.size(), 0};
      t += "[" + join(a.refs, ", ") + "]";
      ref_span.end = t.size();
      t += "\n";
      t += "        capacity: ";
      Span cap_span{t.size(), 0};
      t += capacity_name(a.capacity);
      cap_span.end = t.size();
      t += "\n";
      out.span_index[{id, SpecField::duty}] = duty_span;
      out.span_index[{id, SpecField::refs}] = ref_span;
      out.span_index[{id, SpecField::capacity}] = cap_span;
    }
  }
  return out;
}

inline std::string spec_digest(const OrchestrationSpec& spec) {
  return hex64(fnv1a64(serialize(spec).text));
}

// ---------------------------------------------------------------------------
// Task I/O
// ---------------------------------------------------------------------------

inline TaskInstance task_from_json(const nlohmann::json& j) {
  TaskInstance t;
  t.id = j.at("id").get<std::string>();
  t.prompt = j.at("prompt").get<std::string>();
  if (j.contains("answer_key") && !j["answer_key"].is_null())
    t.answer_key = j["answer_key"].get<std::string>();
  if (t.id.empty()) throw std::invalid_argument("task id must be non-empty");
  if (t.prompt.empty()) throw std::invalid_argument("task prompt must be non-empty");
  return t;
}

inline std::vector<TaskInstance> parse_tasks_jsonl(const std::string& text) {
  std::vector<TaskInstance> tasks;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    tasks.push_back(task_from_json(nlohmann::json::parse(line)));
  }
  return tasks;
}

}  // namespace maestro
