// craft: command-line front end for the assembly pipeline.
//
// Every command prints one JSON document on stdout; diagnostics go to stderr.
// Exit codes: 0 stage success, 1 validation failure, 2 usage or I/O error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "craft/assembler.hpp"
#include "craft/catalog.hpp"
#include "craft/collision.hpp"
#include "craft/errors.hpp"
#include "craft/mesh.hpp"
#include "craft/metrics.hpp"
#include "craft/orchestrator.hpp"
#include "craft/plan.hpp"
#include "craft/simulation.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace craft;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

// Thrown for bad flag combinations found after CLI11 parsing.
struct UsageError : Error {
  using Error::Error;
};

void emit(const json& doc) { std::cout << doc.dump(2) << '\n'; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

Catalog catalog_from(const std::string& path) {
  if (path.empty()) return load_default_catalog();
  std::vector<std::string> warnings;
  Catalog c = load_catalog(path, CatalogKind::User, &warnings);
  for (const std::string& w : warnings) std::cerr << "catalog: " << w << '\n';
  return c;
}

SimFunction function_from(const std::string& text) {
  const auto f = parse_function(text);
  if (!f) throw UsageError("unknown function '" + text + "' (hit, support, rolling)");
  return *f;
}

// Parses and places a plan; on failure prints the report and returns nullopt.
std::optional<Assembly> place(const fs::path& plan_path, const Catalog& catalog) {
  const ParseOutcome parsed = parse_plan_text(read_file(plan_path), catalog);
  if (!parsed.plan) {
    emit({{"ok", false}, {"stage", "FORMAT"}, {"report", to_json(parsed.report)}});
    return std::nullopt;
  }
  try {
    return build_assembly(*parsed.plan, catalog);
  } catch (const PlacementError& e) {
    emit({{"ok", false}, {"stage", "PLACEMENT"}, {"report", e.to_json()}});
    return std::nullopt;
  }
}

// ---------------------------------------------------------------- commands

struct ValidateArgs {
  std::string plan;
  std::string catalog;
};

int cmd_validate(const ValidateArgs& a) {
  const ParseOutcome parsed = parse_plan_text(read_file(a.plan), catalog_from(a.catalog));
  json out = to_json(parsed.report);
  if (parsed.plan) out["plan"] = plan_to_json(*parsed.plan);
  emit(out);
  return parsed.report.ok() ? kOk : kFailed;
}

struct BuildArgs {
  std::string plan;
  std::string catalog;
  std::string out_dir;
  int segments = kCylinderSegments;
};

int cmd_build(const BuildArgs& a) {
  const std::optional<Assembly> assembly = place(a.plan, catalog_from(a.catalog));
  if (!assembly) return kFailed;
  const CollisionReport collisions = validate_collisions(*assembly);
  const ConnectivityReport connectivity = connectivity_check(*assembly);
  json out{
      {"ok", collisions.ok() && connectivity.ok()},
      {"assembly", assembly_to_json(*assembly)},
      {"collisions", to_json(collisions)},
      {"connectivity", to_json(connectivity)},
  };
  if (!a.out_dir.empty()) {
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    json files = json::array();
    write_file(dir / "assembly.json", assembly_to_json(*assembly).dump(2) + "\n");
    files.push_back((dir / "assembly.json").string());
    const std::vector<NamedMesh> meshes = assembly_meshes(*assembly, a.segments);
    for (const NamedMesh& m : meshes) {
      const fs::path p = dir / (m.name + ".obj");
      save_obj(p, {m});
      files.push_back(p.string());
    }
    save_obj(dir / "combined.obj", meshes);
    files.push_back((dir / "combined.obj").string());
    out["files"] = files;
  }
  emit(out);
  return out["ok"].get<bool>() ? kOk : kFailed;
}

struct SimulateArgs {
  std::string plan;
  std::string catalog;
  std::string function;
  std::string config;
  std::optional<double> duration;
  std::optional<double> force;
  std::string trace;
  bool trajectories = false;
};

int cmd_simulate(const SimulateArgs& a) {
  const SimFunction function = function_from(a.function);
  SimConfig sim;
  if (!a.config.empty()) update_from_json(sim, json::parse(read_file(a.config)));
  if (a.duration) sim.duration = *a.duration;
  if (a.force) {
    if (function == SimFunction::Rolling) {
      sim.rolling_force = *a.force;
    } else if (function == SimFunction::Support) {
      sim.support_force = *a.force;
    } else {
      throw UsageError("--force applies to rolling and support only");
    }
  }
  sim.validate();

  const std::optional<Assembly> assembly = place(a.plan, catalog_from(a.catalog));
  if (!assembly) return kFailed;
  std::ofstream trace;
  RunOptions options;
  if (!a.trace.empty()) {
    trace.open(a.trace);
    if (!trace) throw IoError("cannot write " + a.trace);
    options.trace = &trace;
  }
  const SimOutcome outcome = run_function_test(*assembly, function, sim, options);
  emit(to_json(outcome, a.trajectories));
  return outcome.success ? kOk : kFailed;
}

struct MetricsArgs {
  std::string ref;
  std::string gen;
  std::string out;
  MetricsOptions options;
};

int cmd_metrics(const MetricsArgs& a) {
  const MetricsReport r = compare_meshes(load_mesh(a.ref), load_mesh(a.gen), a.options);
  json doc = to_json(r);
  doc["reference"] = a.ref;
  doc["generated"] = a.gen;
  if (!a.out.empty()) write_file(a.out, doc.dump(2) + "\n");
  emit(doc);
  return kOk;
}

struct PipelineArgs {
  std::string image;
  std::string category;
  std::string function;
  std::string policy;
  std::string config;
  std::string script;
  std::string out_dir;
  HttpClientConfig http;
};

PipelineConfig config_from(const std::string& path) {
  return path.empty() ? PipelineConfig::defaults() : PipelineConfig::load(path);
}

int cmd_pipeline(const PipelineArgs& a) {
  PipelineConfig config = config_from(a.config);
  if (!a.policy.empty()) {
    const auto mode = parse_policy(a.policy);
    if (!mode) throw UsageError("unknown policy '" + a.policy + "' (none, fresh, feedback)");
    config.policy.mode = *mode;
  }
  const Catalog catalog = load_catalog(config.catalog);
  const Heuristics heuristics = Heuristics::load(config.heuristics);
  std::optional<SimFunction> function;
  if (!a.function.empty()) {
    function = function_from(a.function);
  } else {
    function = heuristics.at(a.category).function;
  }
  if (!function) throw UsageError("--function is required for category '" + a.category + "'");
  std::optional<fs::path> image;
  if (!a.image.empty()) image = fs::path(a.image);

  const PromptBundle bundle = make_bundle(a.category, *function, catalog, config.templates, heuristics,
                                          PromptText::load(config.prompt), image);
  std::unique_ptr<LlmClient> client;
  if (!a.script.empty()) {
    client = std::make_unique<ScriptedClient>(ScriptedClient::read_directory(a.script));
  } else {
    client = std::make_unique<HttpClient>(a.http);
  }
  const PipelineResult result = run_pipeline(bundle, *client, config.policy, catalog, config.sim);
  json out = to_json(result);
  if (result.success && !a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    const fs::path obj = fs::path(a.out_dir) / "assembly.obj";
    save_obj(obj, assembly_meshes(*result.assembly));
    out["files"] = {obj.string()};
  }
  emit(out);
  return result.success ? kOk : kFailed;
}

struct BatchArgs {
  std::string manifest;
  std::string out_dir;
  std::string config;
  int jobs = 1;
};

int cmd_batch(const BatchArgs& a) {
  const PipelineConfig config = config_from(a.config);
  const auto runs = load_batch_manifest(a.manifest, Heuristics::load(config.heuristics));
  const auto records = run_batch(runs, config, a.jobs);

  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  const std::string runs_text = runs_csv(records);
  const std::string table1 = success_table_csv(records);
  const std::string table3 = failure_table_csv(records);
  write_file(dir / "runs.csv", runs_text);
  write_file(dir / "table1.csv", table1);
  write_file(dir / "table3.csv", table3);

  json results = json::array();
  int ok = 0;
  for (const BatchRecord& r : records) {
    ok += r.result.success;
    results.push_back({{"id", r.run.id},
                       {"category", r.run.category},
                       {"policy", to_string(r.run.policy)},
                       {"status", r.result.success ? "SUCCESS" : "FAILED"},
                       {"failure_stage", to_string(r.result.success ? Stage::None : r.result.failure_stage)},
                       {"llm_calls", r.result.llm_calls()}});
  }
  emit({{"runs", records.size()},
        {"succeeded", ok},
        {"results", results},
        {"files", {(dir / "runs.csv").string(), (dir / "table1.csv").string(), (dir / "table3.csv").string()}}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Craft assembly planning, validation, simulation and evaluation"};
  app.require_subcommand(1);

  ValidateArgs va;
  auto* validate_cmd = app.add_subcommand("validate", "Check a plan's format; prints the FormatReport");
  validate_cmd->add_option("plan", va.plan, "Plan JSON")->required()->check(CLI::ExistingFile);
  validate_cmd->add_option("--catalog", va.catalog, "Catalog JSON (default: shipped catalog)");

  BuildArgs ba;
  auto* build_cmd = app.add_subcommand("build", "Place a plan; prints the assembly and writes OBJ meshes");
  build_cmd->add_option("plan", ba.plan, "Plan JSON")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--catalog", ba.catalog, "Catalog JSON");
  build_cmd->add_option("--out-dir", ba.out_dir, "Directory for assembly.json and the OBJ files");
  build_cmd->add_option("--segments", ba.segments, "Cylinder tessellation")->capture_default_str()->check(
      CLI::Range(3, 4096));

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the function test; prints the SimOutcome");
  sim_cmd->add_option("plan", sa.plan, "Plan JSON")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--function", sa.function, "hit | support | rolling")->required();
  sim_cmd->add_option("--catalog", sa.catalog, "Catalog JSON");
  sim_cmd->add_option("--config", sa.config, "JSON object of simulation parameters");
  sim_cmd->add_option("--duration", sa.duration, "Simulated seconds");
  sim_cmd->add_option("--force", sa.force, "Rolling push or per-part support load, N");
  sim_cmd->add_option("--trace", sa.trace, "Write per-step body poses as JSON lines");
  sim_cmd->add_flag("--trajectories", sa.trajectories, "Include sampled trajectories in the output");

  MetricsArgs ma;
  auto* metrics_cmd = app.add_subcommand("metrics", "Compare two OBJ meshes");
  metrics_cmd->add_option("--ref", ma.ref, "Reference OBJ")->required()->check(CLI::ExistingFile);
  metrics_cmd->add_option("--gen", ma.gen, "Generated OBJ")->required()->check(CLI::ExistingFile);
  metrics_cmd->add_option("--n", ma.options.samples, "Points per mesh")->capture_default_str()->check(
      CLI::PositiveNumber);
  metrics_cmd->add_option("--threshold", ma.options.threshold, "F-score distance")->capture_default_str();
  metrics_cmd->add_option("--seed", ma.options.seed, "Sampling seed")->capture_default_str();
  metrics_cmd->add_option("--out", ma.out, "Also write the report here");

  PipelineArgs pa;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Prompt, validate and re-prompt; prints the PipelineResult");
  pipe_cmd->add_option("--category", pa.category, "Object category")->required();
  pipe_cmd->add_option("--image", pa.image, "Reference image")->check(CLI::ExistingFile);
  pipe_cmd->add_option("--function", pa.function, "hit | support | rolling (default: the category's)");
  pipe_cmd->add_option("--policy", pa.policy, "none | fresh | feedback (default: from the config)");
  pipe_cmd->add_option("--config", pa.config, "Pipeline config JSON");
  pipe_cmd->add_option("--script", pa.script, "Replay numbered responses from this directory")->check(
      CLI::ExistingDirectory);
  pipe_cmd->add_option("--endpoint", pa.http.endpoint, "Chat-completions URL")->capture_default_str();
  pipe_cmd->add_option("--model", pa.http.model, "Model name")->capture_default_str();
  pipe_cmd->add_option("--api-key-env", pa.http.api_key_env, "Environment variable holding the API key")
      ->capture_default_str();
  pipe_cmd->add_option("--timeout", pa.http.timeout_s, "Request timeout, s")->capture_default_str();
  pipe_cmd->add_option("--out-dir", pa.out_dir, "Write the assembly OBJ here on success");

  BatchArgs bta;
  auto* batch_cmd = app.add_subcommand("batch", "Run scripted pipelines; writes runs.csv, table1.csv, table3.csv");
  batch_cmd->add_option("--manifest", bta.manifest, "Batch manifest JSON")->required()->check(CLI::ExistingFile);
  batch_cmd->add_option("--out-dir", bta.out_dir, "Directory for the CSV files")->required();
  batch_cmd->add_option("--config", bta.config, "Pipeline config JSON");
  batch_cmd->add_option("--jobs", bta.jobs, "Worker threads")->capture_default_str()->check(CLI::Range(1, 256));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*validate_cmd) return cmd_validate(va);
    if (*build_cmd) return cmd_build(ba);
    if (*sim_cmd) return cmd_simulate(sa);
    if (*metrics_cmd) return cmd_metrics(ma);
    if (*pipe_cmd) return cmd_pipeline(pa);
    if (*batch_cmd) return cmd_batch(bta);
  } catch (const UsageError& e) {
    std::cerr << "craft: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "craft: " << e.what() << '\n';
    return kUsage;
  } catch (const ClientError& e) {
    std::cerr << "craft: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    // configuration, manifest or mesh files that do not parse
    std::cerr << "craft: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "craft: " << e.what() << '\n';
    emit({{"ok", false}, {"error", e.what()}});
    return kFailed;
  } catch (const json::exception& e) {
    std::cerr << "craft: " << e.what() << '\n';
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "craft: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
