#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "craft/assembler.hpp"
#include "craft/catalog.hpp"
#include "craft/simulation.hpp"

namespace craft {

// ---------------------------------------------------------------- prompt

struct CategoryHeuristics {
  std::vector<std::pair<std::string, int>> minimal_parts;  // file order
  std::string constraint;
  std::optional<SimFunction> function;
};

class Heuristics {
 public:
  static Heuristics load(const std::filesystem::path& path);
  static Heuristics parse(const nlohmann::ordered_json& doc);

  // Case-insensitive; throws Error for an unknown category.
  const CategoryHeuristics& at(std::string_view category) const;
  std::vector<std::string> categories() const;  // lower case

 private:
  std::vector<std::pair<std::string, CategoryHeuristics>> entries_;  // lower-case keys
};

struct PromptText {
  std::string system;
  std::string user;      // {category} {function} {catalog} {template} {minimal_parts} {constraint}
  std::string feedback;  // {stage} {report}

  static PromptText load(const std::filesystem::path& path);
};

struct PromptBundle {
  std::optional<std::filesystem::path> image;  // forwarded to the client untouched
  std::string category;                        // lower case
  SimFunction function = SimFunction::Hit;
  std::string catalog_text;
  std::string template_json;
  CategoryHeuristics heuristics;
  PromptText text;
};

// Loads the category template and heuristics; throws Error when the template
// does not parse as a valid plan against `catalog`.
PromptBundle make_bundle(std::string_view category, SimFunction function, const Catalog& catalog,
                         const std::filesystem::path& templates_dir, const Heuristics& heuristics,
                         const PromptText& text, std::optional<std::filesystem::path> image = std::nullopt);

struct Message {
  std::string role;  // system | user | assistant
  std::string content;
  std::optional<std::filesystem::path> image;

  bool operator==(const Message&) const = default;
};

std::vector<Message> build_prompt(const PromptBundle& bundle, bool attach_image = true);
std::string render_minimal_parts(const CategoryHeuristics& h);  // {"Head": 1, "Handle": 1}

// ---------------------------------------------------------------- clients

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Throws ClientError on transport or protocol failure.
  virtual std::string send(const std::vector<Message>& messages) = 0;
  virtual bool supports_images() const { return true; }
};

// Replays canned responses in order and records every request.
class ScriptedClient : public LlmClient {
 public:
  explicit ScriptedClient(std::vector<std::string> responses, bool images = true);
  // Files whose stem is a number (1.json, 2.txt, ...), in numeric order.
  static ScriptedClient from_directory(const std::filesystem::path& dir);
  static std::vector<std::string> read_directory(const std::filesystem::path& dir);

  std::string send(const std::vector<Message>& messages) override;
  bool supports_images() const override { return images_; }

  std::size_t calls() const;
  std::vector<std::vector<Message>> requests() const;

 private:
  std::vector<std::string> responses_;
  bool images_ = true;
  mutable std::mutex mutex_;
  std::vector<std::vector<Message>> requests_;
};

struct HttpClientConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "o4-mini";
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_s = 300;
};

// Chat-completions JSON over HTTP(S). Images are sent inline as base64 data
// URLs.
class HttpClient : public LlmClient {
 public:
  explicit HttpClient(HttpClientConfig config);
  std::string send(const std::vector<Message>& messages) override;

  // Request body for `messages`; exposed for tests.
  nlohmann::json request_body(const std::vector<Message>& messages) const;

 private:
  HttpClientConfig config_;
  std::mutex mutex_;
};

// ---------------------------------------------------------------- pipeline

enum class PolicyMode { None, Fresh, Feedback };

std::string_view to_string(PolicyMode mode);
std::optional<PolicyMode> parse_policy(std::string_view text);  // case-insensitive

struct RepromptPolicy {
  PolicyMode mode = PolicyMode::None;
  int fresh_retries = 2;    // FRESH: any stage
  int presim_retries = 1;   // FEEDBACK: failures before the simulation
  int sim_retries = 1;      // FEEDBACK: simulation failures

  static RepromptPolicy of(PolicyMode mode) { return {mode}; }
};

enum class Stage { Format, Collision, Connectivity, Physics, None };

std::string_view to_string(Stage stage);

struct StageReport {
  Stage stage = Stage::None;
  bool ok = false;
  nlohmann::json report;
};

struct Attempt {
  std::string response;
  std::vector<StageReport> stages;  // in execution order, up to the first failure
  Stage failure_stage = Stage::None;
};

struct PipelineResult {
  bool success = false;
  Stage failure_stage = Stage::None;
  std::vector<Attempt> attempts;
  std::optional<Assembly> assembly;   // final attempt, on success
  std::optional<SimOutcome> outcome;  // final attempt, on success

  std::size_t llm_calls() const { return attempts.size(); }
};

nlohmann::json to_json(const PipelineResult& result);

struct PipelineConfig {
  RepromptPolicy policy;
  SimConfig sim;
  std::filesystem::path catalog;
  std::filesystem::path templates;
  std::filesystem::path heuristics;
  std::filesystem::path prompt;

  // Paths in the file are relative to the file; absent keys keep the shipped
  // defaults under data_dir().
  static PipelineConfig defaults();
  static PipelineConfig load(const std::filesystem::path& path);
};

// Runs one plan text through format, placement, collision, connectivity and
// the function test.
Attempt evaluate_response(std::string response, const Catalog& catalog, SimFunction function,
                          const SimConfig& sim, std::optional<Assembly>* assembly = nullptr,
                          std::optional<SimOutcome>* outcome = nullptr);

// ClientError from the client propagates to the caller.
PipelineResult run_pipeline(const PromptBundle& bundle, LlmClient& client, const RepromptPolicy& policy,
                            const Catalog& catalog, const SimConfig& sim = {});

// Failure-table buckets: position = collision or connectivity.
struct StageTally {
  int format = 0;
  int position = 0;
  int physics = 0;

  StageTally& operator+=(const StageTally& o) {
    format += o.format;
    position += o.position;
    physics += o.physics;
    return *this;
  }
  bool operator==(const StageTally&) const = default;
};

StageTally tally(Stage stage);
StageTally classify_failure(const PipelineResult& result);  // final outcome
StageTally classify_initial(const PipelineResult& result);  // first attempt

// ---------------------------------------------------------------- batch

struct BatchRun {
  std::string id;
  std::string category;
  SimFunction function = SimFunction::Hit;
  PolicyMode policy = PolicyMode::None;
  std::filesystem::path script;  // ScriptedClient directory
  std::optional<std::filesystem::path> image;
};

// {"runs": [{"id", "category", "function"?, "policy", "script", "image"?}]};
// relative paths resolve against the manifest's directory and a missing
// function defaults to the category's.
std::vector<BatchRun> load_batch_manifest(const std::filesystem::path& path, const Heuristics& heuristics);

struct BatchRecord {
  BatchRun run;
  PipelineResult result;
};

std::vector<BatchRecord> run_batch(const std::vector<BatchRun>& runs, const PipelineConfig& config, int jobs = 1);

// category,attempts,status,failure_stage
std::string runs_csv(const std::vector<BatchRecord>& records);
// Success rate per category and policy, plus an overall row.
std::string success_table_csv(const std::vector<BatchRecord>& records);
// Failures per validation step for the first attempt and the final result.
std::string failure_table_csv(const std::vector<BatchRecord>& records);

}  // namespace craft
