#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "edittrace/acoustic_loss.hpp"
#include "edittrace/answer_contract.hpp"
#include "edittrace/edit_plan.hpp"
#include "edittrace/jsonl.hpp"
#include "edittrace/llm_client.hpp"
#include "edittrace/metrics.hpp"
#include "edittrace/prior.hpp"

namespace edittrace {

std::string_view version();

struct PipelineConfig {
  int workers = 20;
  int batch_size = 50;
  int max_retries = 5;
  PromptStrategy strategy = PromptStrategy::Detailed;
  std::uint64_t seed = 0;
  Aggregation aggregation = Aggregation::Mean;
  ScoreReduction reduction = ScoreReduction::Max;
  double word_threshold = 0.5;
  double temperature = 0.7;
  LossConfig loss{};

  void validate() const;
};

/// Version plus every effective setting, as pretty-printed JSON.
std::string version_and_config_dump(const PipelineConfig& config);

struct ManifestEntry {
  std::string id;
  std::string source_text;
  Language language = Language::English;
  std::optional<EditOperation> operation;  // nullopt: bona fide passthrough ("none")
};

// Rejects empty or whitespace-only source texts and duplicate ids.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

struct SampleError {
  std::string id;
  std::string stage;
  std::string reason;
};

Json to_json(const SampleError& e);

struct PlanRecord {
  std::string id;
  TokenSequence source;
  TokenSequence edited;
  std::optional<EditPlan> plan;  // nullopt for bona fide entries
};

Json to_json(const PlanRecord& r);
PlanRecord plan_record_from_json(const Json& j);

using ClientFactory = std::function<std::shared_ptr<LlmClient>(const std::string& id)>;

/// Per-id mock replies from JSONL lines {"id", "replies": [...]} or
/// {"id", "reply": "..."}; repeated ids accumulate in file order.
std::map<std::string, std::vector<std::string>> load_mock_script(const std::filesystem::path& path);

ClientFactory mock_client_factory(std::map<std::string, std::vector<std::string>> script);
ClientFactory shared_client_factory(std::shared_ptr<LlmClient> client);

/// Runs generate_with_retries over the manifest in batches of batch_size,
/// each batch spread across `workers` threads. Output follows manifest
/// order; failed samples land in `errors` instead.
std::vector<PlanRecord> plan_corpus(const std::vector<ManifestEntry>& entries, const ClientFactory& clients,
                                    const PipelineConfig& config, std::vector<SampleError>& errors);

struct UtterancePrior {
  std::string id;
  std::vector<WordPrior> words;
  double score = 0.0;
  std::string prompt;
};

Json to_json(const UtterancePrior& p, const PipelineConfig& config);
UtterancePrior utterance_prior_from_json(const Json& j);

std::map<std::string, FrameProbSeq> load_frames(const std::filesystem::path& path);
// JSONL {"id", "words": [{"w", "start_s", "end_s"}]} or, for a ".ctm" path,
// CTM lines.
std::map<std::string, std::vector<WordBoundary>> load_alignments(const std::filesystem::path& path);

/// One prior per utterance with both frames and alignments, in `order`.
std::vector<UtterancePrior> build_priors(const std::vector<std::string>& order,
                                         const std::map<std::string, FrameProbSeq>& frames,
                                         const std::map<std::string, std::vector<WordBoundary>>& alignments,
                                         const PipelineConfig& config, std::vector<SampleError>& errors);

Json prompt_record(const std::string& id, PromptStrategy strategy, const std::optional<std::string>& prior);

struct TruthRecord {
  std::string id;
  int label = 0;
  std::optional<EditType> edit_type;
  std::string edited_words;
  std::vector<int> word_labels;  // over the words of the edited utterance
};

Json to_json(const TruthRecord& t);
TruthRecord truth_from_json(const Json& j);

/// Word labels over the edited utterance: inserted words for Add/Modify,
/// the two words flanking the cut for Delete, nothing for bona fide.
TruthRecord make_truth(const PlanRecord& plan);

struct ParsedRecord {
  std::string id;
  std::string text;
  std::optional<EditResponse> response;
  std::optional<ParseErrorKind> violation;
};

Json to_json(const ParsedRecord& r);
ParsedRecord parsed_from_json(const Json& j);

ParsedRecord parse_record(const std::string& id, const std::string& text);

MetricsReport evaluate_detection(const std::vector<ParsedRecord>& parsed, const std::vector<UtterancePrior>& priors,
                                 const std::vector<TruthRecord>& truth);
MetricsReport evaluate_localization(const std::vector<ParsedRecord>& parsed,
                                    const std::vector<UtterancePrior>& priors, const std::vector<TruthRecord>& truth,
                                    double threshold);

Json to_json(const MetricsReport& r);

struct PipelinePaths {
  std::filesystem::path manifest;
  std::filesystem::path frames;
  std::filesystem::path alignments;
  std::optional<std::filesystem::path> responses;
  std::optional<std::filesystem::path> mock_script;  // unset: HTTP client from the environment
  std::filesystem::path out_dir;
};

struct PipelineOutcome {
  int exit_code = 0;  // 0 ok, 1 finished with per-sample errors, 2 could not run
  std::vector<SampleError> errors;
  std::string summary;
};

/// plan -> prior -> prompt, then parse -> eval when responses are given.
/// Writes plans, priors, prompts, truth and errors JSONL (plus parsed,
/// violations and report.json) under out_dir.
PipelineOutcome run_pipeline(const PipelineConfig& config, const PipelinePaths& paths);

}  // namespace edittrace
