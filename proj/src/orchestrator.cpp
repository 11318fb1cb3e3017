#include "craft/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "craft/collision.hpp"
#include "craft/errors.hpp"
#include "craft/plan.hpp"

namespace craft {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kMaxCalls = 3;

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

// A prompt field may be one string or a list of lines.
std::string text_field(const ordered_json& doc, const char* key) {
  const ordered_json& v = doc.at(key);
  if (v.is_string()) return v.get<std::string>();
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += '\n';
    out += v[i].get<std::string>();
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- prompt

Heuristics Heuristics::parse(const ordered_json& doc) {
  Heuristics h;
  try {
    for (const auto& [name, parts] : doc.at("minimal_parts").items()) {
      CategoryHeuristics c;
      for (const auto& [part, count] : parts.items()) c.minimal_parts.emplace_back(part, count.get<int>());
      if (auto it = doc.find("constraints"); it != doc.end() && it->contains(name)) {
        c.constraint = it->at(name).get<std::string>();
      }
      if (auto it = doc.find("functions"); it != doc.end() && it->contains(name)) {
        c.function = parse_function(it->at(name).get<std::string>());
      }
      h.entries_.emplace_back(lower(name), std::move(c));
    }
  } catch (const ordered_json::exception& e) {
    throw ParseError(std::string("malformed heuristics: ") + e.what());
  }
  return h;
}

Heuristics Heuristics::load(const std::filesystem::path& path) {
  try {
    return parse(ordered_json::parse(read_file(path)));
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

const CategoryHeuristics& Heuristics::at(std::string_view category) const {
  const std::string key = lower(category);
  for (const auto& [name, h] : entries_) {
    if (name == key) return h;
  }
  throw Error("no heuristics for category '" + std::string(category) + "'");
}

std::vector<std::string> Heuristics::categories() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

PromptText PromptText::load(const std::filesystem::path& path) {
  try {
    const ordered_json doc = ordered_json::parse(read_file(path));
    return {text_field(doc, "system"), text_field(doc, "user"), text_field(doc, "feedback")};
  } catch (const ordered_json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

PromptBundle make_bundle(std::string_view category, SimFunction function, const Catalog& catalog,
                         const std::filesystem::path& templates_dir, const Heuristics& heuristics,
                         const PromptText& text, std::optional<std::filesystem::path> image) {
  PromptBundle b;
  b.image = std::move(image);
  b.category = lower(category);
  b.function = function;
  b.catalog_text = render_catalog(catalog);
  b.template_json = read_file(templates_dir / (b.category + ".json"));
  const ParseOutcome parsed = parse_plan_text(b.template_json, catalog);
  if (!parsed.plan) {
    throw Error("template for '" + b.category + "' is not a valid plan: " + to_json(parsed.report).dump());
  }
  b.heuristics = heuristics.at(b.category);
  b.text = text;
  return b;
}

std::string render_minimal_parts(const CategoryHeuristics& h) {
  std::string out = "{";
  for (std::size_t i = 0; i < h.minimal_parts.size(); ++i) {
    if (i) out += ", ";
    out += json(h.minimal_parts[i].first).dump() + ": " + std::to_string(h.minimal_parts[i].second);
  }
  return out + "}";
}

std::vector<Message> build_prompt(const PromptBundle& bundle, bool attach_image) {
  std::string user = bundle.text.user;
  std::string category = bundle.category;
  if (!category.empty()) category[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(category[0])));
  std::string catalog = bundle.catalog_text;
  while (!catalog.empty() && catalog.back() == '\n') catalog.pop_back();
  std::string tmpl = bundle.template_json;
  while (!tmpl.empty() && tmpl.back() == '\n') tmpl.pop_back();
  // Substituted values are never rescanned, so a template containing a
  // placeholder name stays intact.
  const std::vector<std::pair<std::string_view, std::string>> fields{
      {"{category}", category},
      {"{function}", std::string(to_string(bundle.function))},
      {"{catalog}", catalog},
      {"{template}", tmpl},
      {"{minimal_parts}", render_minimal_parts(bundle.heuristics)},
      {"{constraint}", bundle.heuristics.constraint},
  };
  std::string out;
  for (std::size_t pos = 0; pos < user.size();) {
    bool matched = false;
    for (const auto& [key, value] : fields) {
      if (user.compare(pos, key.size(), key) == 0) {
        out += value;
        pos += key.size();
        matched = true;
        break;
      }
    }
    if (!matched) out += user[pos++];
  }
  Message u{"user", out, std::nullopt};
  if (attach_image && bundle.image) u.image = bundle.image;
  return {{"system", bundle.text.system, std::nullopt}, std::move(u)};
}

// ---------------------------------------------------------------- scripted client

ScriptedClient::ScriptedClient(std::vector<std::string> responses, bool images)
    : responses_(std::move(responses)), images_(images) {}

std::vector<std::string> ScriptedClient::read_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::pair<long, std::filesystem::path>> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string stem = entry.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](char c) { return std::isdigit(c); })) continue;
    files.emplace_back(std::stol(stem), entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::string> responses;
  for (const auto& [n, path] : files) responses.push_back(read_file(path));
  return responses;
}

ScriptedClient ScriptedClient::from_directory(const std::filesystem::path& dir) {
  return ScriptedClient(read_directory(dir));
}

std::string ScriptedClient::send(const std::vector<Message>& messages) {
  std::lock_guard lock(mutex_);
  if (requests_.size() >= responses_.size()) {
    throw ClientError("scripted client has no response left (" + std::to_string(responses_.size()) + " scripted)");
  }
  requests_.push_back(messages);
  return responses_[requests_.size() - 1];
}

std::size_t ScriptedClient::calls() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

std::vector<std::vector<Message>> ScriptedClient::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

// ---------------------------------------------------------------- pipeline

std::string_view to_string(PolicyMode mode) {
  switch (mode) {
    case PolicyMode::None: return "NONE";
    case PolicyMode::Fresh: return "FRESH";
    case PolicyMode::Feedback: return "FEEDBACK";
  }
  return "NONE";
}

std::optional<PolicyMode> parse_policy(std::string_view text) {
  const std::string t = lower(text);
  if (t == "none") return PolicyMode::None;
  if (t == "fresh") return PolicyMode::Fresh;
  if (t == "feedback") return PolicyMode::Feedback;
  return std::nullopt;
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Format: return "FORMAT";
    case Stage::Collision: return "COLLISION";
    case Stage::Connectivity: return "CONNECTIVITY";
    case Stage::Physics: return "PHYSICS";
    case Stage::None: return "NONE";
  }
  return "NONE";
}

Attempt evaluate_response(std::string response, const Catalog& catalog, SimFunction function, const SimConfig& sim,
                          std::optional<Assembly>* assembly_out, std::optional<SimOutcome>* outcome_out) {
  Attempt a;
  a.response = std::move(response);
  auto record = [&](Stage stage, bool ok, json report) {
    a.stages.push_back({stage, ok, std::move(report)});
    if (!ok) a.failure_stage = stage;
    return ok;
  };

  const ParseOutcome parsed = parse_plan_text(a.response, catalog);
  if (!record(Stage::Format, parsed.report.ok(), to_json(parsed.report))) return a;

  Assembly assembly;
  try {
    assembly = build_assembly(*parsed.plan, catalog);
  } catch (const PlacementError& e) {
    // A part with no placed neighbour is a connectivity failure; inconsistent
    // or oversized geometry is a position (collision) failure.
    const bool unreachable = e.code() == placement_codes::kUnplaceable;
    json report = e.to_json();
    if (unreachable) report["components"] = to_json(plan_connectivity(*parsed.plan)).at("components");
    record(unreachable ? Stage::Connectivity : Stage::Collision, false, std::move(report));
    return a;
  }
  const CollisionReport collisions = validate_collisions(assembly);
  if (!record(Stage::Collision, collisions.ok(), to_json(collisions))) return a;
  const ConnectivityReport connectivity = connectivity_check(assembly);
  if (!record(Stage::Connectivity, connectivity.ok(), to_json(connectivity))) return a;

  SimOutcome outcome = run_function_test(assembly, function, sim);
  record(Stage::Physics, outcome.success, to_json(outcome));
  if (assembly_out) *assembly_out = std::move(assembly);
  if (outcome_out) *outcome_out = std::move(outcome);
  return a;
}

PipelineResult run_pipeline(const PromptBundle& bundle, LlmClient& client, const RepromptPolicy& policy,
                            const Catalog& catalog, const SimConfig& sim) {
  const std::vector<Message> initial = build_prompt(bundle, client.supports_images());
  std::vector<Message> history = initial;
  int fresh_left = policy.fresh_retries;
  int presim_left = policy.presim_retries;
  int sim_left = policy.sim_retries;

  PipelineResult result;
  while (true) {
    const std::vector<Message>& request = policy.mode == PolicyMode::Feedback ? history : initial;
    std::optional<Assembly> assembly;
    std::optional<SimOutcome> outcome;
    Attempt attempt = evaluate_response(client.send(request), catalog, bundle.function, sim, &assembly, &outcome);
    result.attempts.push_back(attempt);
    result.failure_stage = attempt.failure_stage;
    if (attempt.failure_stage == Stage::None) {
      result.success = true;
      result.assembly = std::move(assembly);
      result.outcome = std::move(outcome);
      return result;
    }
    if (result.attempts.size() >= kMaxCalls) return result;

    if (policy.mode == PolicyMode::None) return result;
    if (policy.mode == PolicyMode::Fresh) {
      if (fresh_left-- <= 0) return result;
      continue;
    }
    int& budget = attempt.failure_stage == Stage::Physics ? sim_left : presim_left;
    if (budget-- <= 0) return result;
    std::string feedback = replace_all(bundle.text.feedback, "{report}", attempt.stages.back().report.dump(2));
    feedback = replace_all(std::move(feedback), "{stage}", to_string(attempt.failure_stage));
    history.push_back({"assistant", attempt.response, std::nullopt});
    history.push_back({"user", std::move(feedback), std::nullopt});
  }
}

json to_json(const PipelineResult& r) {
  json attempts = json::array();
  for (const Attempt& a : r.attempts) {
    json stages = json::array();
    for (const StageReport& s : a.stages) {
      stages.push_back({{"stage", to_string(s.stage)}, {"ok", s.ok}, {"report", s.report}});
    }
    attempts.push_back({{"response", a.response}, {"failure_stage", to_string(a.failure_stage)}, {"stages", stages}});
  }
  json out{
      {"status", r.success ? "SUCCESS" : "FAILED"},
      {"failure_stage", to_string(r.failure_stage)},
      {"llm_calls", r.llm_calls()},
      {"attempts", attempts},
  };
  if (r.assembly) out["assembly"] = assembly_to_json(*r.assembly);
  if (r.outcome) out["outcome"] = to_json(*r.outcome);
  return out;
}

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig c;
  c.catalog = default_catalog_path();
  c.templates = data_dir() / "templates";
  c.heuristics = data_dir() / "heuristics.json";
  c.prompt = data_dir() / "prompt.json";
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  PipelineConfig c = defaults();
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const char* key, std::filesystem::path& field) {
    if (auto it = doc.find(key); it != doc.end()) {
      const std::filesystem::path p = it->get<std::string>();
      field = p.is_absolute() ? p : base / p;
    }
  };
  try {
    if (auto it = doc.find("policy"); it != doc.end()) {
      const auto mode = parse_policy(it->is_object() ? it->at("mode").get<std::string>() : it->get<std::string>());
      if (!mode) throw ParseError("unknown policy mode in " + path.string());
      c.policy.mode = *mode;
      if (it->is_object()) {
        c.policy.fresh_retries = it->value("fresh_retries", c.policy.fresh_retries);
        c.policy.presim_retries = it->value("presim_retries", c.policy.presim_retries);
        c.policy.sim_retries = it->value("sim_retries", c.policy.sim_retries);
      }
    }
    if (auto it = doc.find("sim"); it != doc.end()) update_from_json(c.sim, *it);
    resolve("catalog", c.catalog);
    resolve("templates", c.templates);
    resolve("heuristics", c.heuristics);
    resolve("prompt", c.prompt);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return c;
}

StageTally tally(Stage stage) {
  StageTally t;
  switch (stage) {
    case Stage::Format: t.format = 1; break;
    case Stage::Collision:
    case Stage::Connectivity: t.position = 1; break;
    case Stage::Physics: t.physics = 1; break;
    case Stage::None: break;
  }
  return t;
}

StageTally classify_failure(const PipelineResult& result) {
  return result.success ? StageTally{} : tally(result.failure_stage);
}

StageTally classify_initial(const PipelineResult& result) {
  return result.attempts.empty() ? StageTally{} : tally(result.attempts.front().failure_stage);
}

// ---------------------------------------------------------------- batch

std::vector<BatchRun> load_batch_manifest(const std::filesystem::path& path, const Heuristics& heuristics) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp = p;
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<BatchRun> runs;
  try {
    for (const json& r : doc.at("runs")) {
      BatchRun run;
      run.category = lower(r.at("category").get<std::string>());
      run.id = r.value("id", run.category + "_" + std::to_string(runs.size() + 1));
      if (auto it = r.find("function"); it != r.end()) {
        const auto f = parse_function(it->get<std::string>());
        if (!f) throw ParseError("run " + run.id + ": unknown function");
        run.function = *f;
      } else if (const auto& f = heuristics.at(run.category).function) {
        run.function = *f;
      } else {
        throw ParseError("run " + run.id + ": no function given and none known for the category");
      }
      const auto policy = parse_policy(r.at("policy").get<std::string>());
      if (!policy) throw ParseError("run " + run.id + ": unknown policy");
      run.policy = *policy;
      run.script = resolve(r.at("script").get<std::string>());
      if (auto it = r.find("image"); it != r.end()) run.image = resolve(it->get<std::string>());
      runs.push_back(std::move(run));
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return runs;
}

std::vector<BatchRecord> run_batch(const std::vector<BatchRun>& runs, const PipelineConfig& config, int jobs) {
  const Catalog catalog = load_catalog(config.catalog);
  const Heuristics heuristics = Heuristics::load(config.heuristics);
  const PromptText text = PromptText::load(config.prompt);

  std::vector<std::optional<BatchRecord>> slots(runs.size());
  std::vector<std::exception_ptr> errors(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        const BatchRun& run = runs[i];
        const PromptBundle bundle =
            make_bundle(run.category, run.function, catalog, config.templates, heuristics, text, run.image);
        ScriptedClient client = ScriptedClient::from_directory(run.script);
        RepromptPolicy policy = config.policy;
        policy.mode = run.policy;
        slots[i] = BatchRecord{run, run_pipeline(bundle, client, policy, catalog, config.sim)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(runs.size(), 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<BatchRecord> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::string runs_csv(const std::vector<BatchRecord>& records) {
  std::ostringstream out;
  out << "category,attempts,status,failure_stage\n";
  for (const BatchRecord& r : records) {
    out << r.run.category << ',' << r.result.llm_calls() << ',' << (r.result.success ? "SUCCESS" : "FAILED") << ','
        << to_string(r.result.success ? Stage::None : r.result.failure_stage) << '\n';
  }
  return out.str();
}

namespace {

std::vector<std::string> categories_in_order(const std::vector<BatchRecord>& records) {
  std::vector<std::string> out;
  for (const BatchRecord& r : records) {
    if (std::find(out.begin(), out.end(), r.run.category) == out.end()) out.push_back(r.run.category);
  }
  return out;
}

std::string percent(int num, int den) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * num / den);
  return buf;
}

}  // namespace

std::string success_table_csv(const std::vector<BatchRecord>& records) {
  std::vector<PolicyMode> policies;
  for (PolicyMode m : {PolicyMode::None, PolicyMode::Fresh, PolicyMode::Feedback}) {
    if (std::any_of(records.begin(), records.end(), [&](const BatchRecord& r) { return r.run.policy == m; })) {
      policies.push_back(m);
    }
  }
  std::ostringstream out;
  out << "class";
  for (PolicyMode m : policies) out << ',' << lower(to_string(m));
  out << '\n';
  auto row = [&](const std::string& label, const std::function<bool(const BatchRecord&)>& in_row) {
    out << label;
    for (PolicyMode m : policies) {
      int total = 0;
      int ok = 0;
      for (const BatchRecord& r : records) {
        if (r.run.policy != m || !in_row(r)) continue;
        ++total;
        ok += r.result.success;
      }
      out << ',' << (total ? percent(ok, total) : "");
    }
    out << '\n';
  };
  for (const std::string& c : categories_in_order(records)) {
    row(c, [&](const BatchRecord& r) { return r.run.category == c; });
  }
  row("overall", [](const BatchRecord&) { return true; });
  return out.str();
}

std::string failure_table_csv(const std::vector<BatchRecord>& records) {
  std::ostringstream out;
  out << "class,initial_format,initial_position,initial_physics,final_format,final_position,final_physics\n";
  auto emit = [&](const std::string& label, const StageTally& first, const StageTally& last) {
    out << label << ',' << first.format << ',' << first.position << ',' << first.physics << ',' << last.format << ','
        << last.position << ',' << last.physics << '\n';
  };
  StageTally all_first;
  StageTally all_last;
  for (const std::string& c : categories_in_order(records)) {
    StageTally first;
    StageTally last;
    for (const BatchRecord& r : records) {
      if (r.run.category != c) continue;
      first += classify_initial(r.result);
      last += classify_failure(r.result);
    }
    emit(c, first, last);
    all_first += first;
    all_last += last;
  }
  emit("total", all_first, all_last);
  return out.str();
}

}  // namespace craft
