// edittrace: corpus planning, word priors, prompts, answer parsing,
// evaluation and the acoustic consistency loss, over JSONL files.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "edittrace/pipeline.hpp"

namespace fs = std::filesystem;
using namespace edittrace;

namespace {

struct Globals {
  PipelineConfig config;
  std::string log_level = "info";
  std::string strategy = "detailed";
};

void write_rows(const std::string& path, const std::vector<Json>& rows) {
  write_jsonl_atomic(path, rows);
  spdlog::info("wrote {} rows to {}", rows.size(), path);
}

void write_errors(const std::string& path, const std::vector<SampleError>& errors) {
  if (path.empty()) {
    for (const auto& e : errors) spdlog::warn("{} [{}]: {}", e.id, e.stage, e.reason);
    return;
  }
  std::vector<Json> rows;
  for (const auto& e : errors) rows.push_back(to_json(e));
  write_rows(path, rows);
}

ClientFactory make_clients(const std::string& mock_script) {
  if (!mock_script.empty()) return mock_client_factory(load_mock_script(mock_script));
  ClientConfig cc = ClientConfig::from_env();
  if (cc.endpoint_url.empty()) throw std::runtime_error("set EDITTRACE_LLM_URL or pass --mock-llm");
  return shared_client_factory(std::make_shared<HttpLlmClient>(cc));
}

template <typename T, typename F>
std::vector<T> load_rows(const std::string& path, F&& from_json) {
  std::vector<T> out;
  for (const auto& j : read_jsonl(path)) out.push_back(from_json(j));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edittrace: speech-editing corpus and evaluation toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.config.seed, "Seed recorded with every run")->capture_default_str();
  app.add_option("--workers", g.config.workers, "Concurrent samples")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--batch-size", g.config.batch_size, "Samples per internal batch")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  // plan
  auto* plan = app.add_subcommand("plan", "Generate constrained edit plans for a manifest");
  std::string plan_in, plan_out, plan_errors, plan_mock;
  plan->add_option("--in", plan_in, "Input manifest JSONL")->required()->check(CLI::ExistingFile);
  plan->add_option("--out", plan_out, "Output plans JSONL")->required();
  plan->add_option("--errors", plan_errors, "Per-sample error JSONL");
  plan->add_option("--max-retries", g.config.max_retries, "LLM attempts per sample")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  plan->add_option("--mock-llm", plan_mock, "Scripted replies JSONL instead of the HTTP service")
      ->check(CLI::ExistingFile);

  // prior
  auto* prior = app.add_subcommand("prior", "Aggregate frame probabilities into word priors");
  std::string prior_frames, prior_align, prior_out, prior_method = "mean", prior_score = "max", prior_errors;
  prior->add_option("--frames", prior_frames, "Frame probabilities JSONL")->required()->check(CLI::ExistingFile);
  prior->add_option("--align", prior_align, "Word boundaries JSONL or .ctm")->required()->check(CLI::ExistingFile);
  prior->add_option("--method", prior_method, "mean|max")->capture_default_str();
  prior->add_option("--score", prior_score, "Utterance score reduction: max|mean")->capture_default_str();
  prior->add_option("--out", prior_out, "Output priors JSONL")->required();
  prior->add_option("--errors", prior_errors, "Per-utterance error JSONL");

  // prompt
  auto* prompt = app.add_subcommand("prompt", "Build audio-LLM prompts");
  std::string prompt_priors, prompt_out;
  bool prompt_no_prior = false;
  prompt->add_option("--strategy", g.strategy, "generic|descriptive|detailed")->capture_default_str();
  prompt->add_option("--priors", prompt_priors, "Priors JSONL")->required()->check(CLI::ExistingFile);
  prompt->add_flag("--without-prior", prompt_no_prior, "Leave the prior paragraph out");
  prompt->add_option("--out", prompt_out, "Output prompts JSONL")->required();

  // parse
  auto* parse = app.add_subcommand("parse", "Parse model answers against the output templates");
  std::string parse_in, parse_out, parse_violations;
  parse->add_option("--in", parse_in, "Responses JSONL {id, text}")->required()->check(CLI::ExistingFile);
  parse->add_option("--out", parse_out, "Parsed JSONL")->required();
  parse->add_option("--violations", parse_violations, "Contract violations JSONL");

  // eval
  auto* eval = app.add_subcommand("eval", "Detection or localization metrics");
  std::string eval_parsed, eval_priors, eval_truth, eval_out, eval_granularity = "detection";
  eval->add_option("--parsed", eval_parsed)->required()->check(CLI::ExistingFile);
  eval->add_option("--priors", eval_priors)->required()->check(CLI::ExistingFile);
  eval->add_option("--truth", eval_truth)->required()->check(CLI::ExistingFile);
  eval->add_option("--granularity", eval_granularity, "detection|localization")
      ->capture_default_str()
      ->check(CLI::IsMember({"detection", "localization"}));
  eval->add_option("--threshold", g.config.word_threshold, "Word-level decision threshold")->capture_default_str();
  eval->add_option("--out", eval_out, "Report JSON")->required();

  // loss
  auto* loss = app.add_subcommand("loss", "Acoustic consistency loss, gradient check and descent demo");
  std::string loss_features, loss_label = "bonafide", loss_out;
  bool loss_gradcheck = false, loss_demo = false;
  int demo_steps = 200;
  double demo_lr = 0.1, fd_step = 1e-5;
  loss->add_option("--features", loss_features, "Feature text file ('L d' then rows)")
      ->required()
      ->check(CLI::ExistingFile);
  loss->add_option("--label", loss_label, "bonafide|edited")->capture_default_str();
  loss->add_option("--margin", g.config.loss.margin)->capture_default_str();
  loss->add_option("--topk", g.config.loss.topk_fraction)->capture_default_str();
  loss->add_option("--lambda", g.config.loss.lambda)->capture_default_str();
  loss->add_flag("--gradcheck", loss_gradcheck, "Compare against central finite differences");
  loss->add_option("--fd-step", fd_step, "Finite-difference step")->capture_default_str();
  loss->add_flag("--demo", loss_demo, "Run gradient descent on the loss");
  loss->add_option("--steps", demo_steps)->capture_default_str();
  loss->add_option("--lr", demo_lr)->capture_default_str();
  loss->add_option("--out", loss_out, "Result JSON")->required();

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "plan -> prior -> prompt [-> parse -> eval]");
  PipelinePaths paths;
  std::string pipe_mock, pipe_responses;
  pipe->add_option("--manifest", paths.manifest)->required();
  pipe->add_option("--frames", paths.frames)->required();
  pipe->add_option("--align", paths.alignments)->required();
  pipe->add_option("--responses", pipe_responses, "Model answers JSONL {id, text}");
  pipe->add_option("--mock-llm", pipe_mock, "Scripted replies JSONL");
  pipe->add_option("--out-dir", paths.out_dir)->required();
  pipe->add_option("--max-retries", g.config.max_retries)->capture_default_str()->check(CLI::PositiveNumber);
  pipe->add_option("--strategy", g.strategy, "generic|descriptive|detailed")->capture_default_str();

  auto* ver = app.add_subcommand("version", "Print the version and the effective configuration");
  ver->add_option("--max-retries", g.config.max_retries)->capture_default_str();
  ver->add_option("--strategy", g.strategy)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  spdlog::set_default_logger(spdlog::stderr_logger_mt("edittrace"));
  spdlog::set_level(spdlog::level::from_str(g.log_level));
  spdlog::set_pattern("[%l] %v");

  try {
    g.config.strategy = parse_strategy(g.strategy);
    g.config.validate();

    if (*ver) {
      std::cout << version_and_config_dump(g.config) << '\n';
      return 0;
    }

    if (*plan) {
      std::vector<SampleError> errors;
      auto records = plan_corpus(load_manifest(plan_in), make_clients(plan_mock), g.config, errors);
      std::vector<Json> rows;
      for (const auto& r : records) rows.push_back(to_json(r));
      write_rows(plan_out, rows);
      write_errors(plan_errors, errors);
      return errors.empty() ? 0 : 1;
    }

    if (*prior) {
      g.config.aggregation = parse_aggregation(prior_method);
      g.config.reduction = parse_reduction(prior_score);
      std::vector<std::string> order;
      for (const auto& j : read_jsonl(prior_frames)) order.push_back(j.at("id").get<std::string>());
      std::vector<SampleError> errors;
      auto priors = build_priors(order, load_frames(prior_frames), load_alignments(prior_align), g.config, errors);
      std::vector<Json> rows;
      for (const auto& p : priors) rows.push_back(to_json(p, g.config));
      write_rows(prior_out, rows);
      write_errors(prior_errors, errors);
      return errors.empty() ? 0 : 1;
    }

    if (*prompt) {
      std::vector<Json> rows;
      for (const auto& j : read_jsonl(prompt_priors)) {
        UtterancePrior p = utterance_prior_from_json(j);
        std::optional<std::string> q;
        if (!prompt_no_prior) q = p.prompt.empty() ? format_prior_prompt(p.words) : p.prompt;
        rows.push_back(prompt_record(p.id, g.config.strategy, q));
      }
      write_rows(prompt_out, rows);
      return 0;
    }

    if (*parse) {
      std::vector<Json> parsed, violations;
      for (const auto& j : read_jsonl(parse_in)) {
        ParsedRecord r = parse_record(j.at("id").get<std::string>(), j.at("text").get<std::string>());
        if (r.violation) violations.push_back({{"id", r.id}, {"text", r.text}, {"error", to_string(*r.violation)}});
        parsed.push_back(to_json(r));
      }
      write_rows(parse_out, parsed);
      if (!parse_violations.empty()) write_rows(parse_violations, violations);
      if (!violations.empty()) spdlog::warn("{} answers violate the output contract", violations.size());
      return 0;
    }

    if (*eval) {
      auto parsed = load_rows<ParsedRecord>(eval_parsed, parsed_from_json);
      auto priors = load_rows<UtterancePrior>(eval_priors, utterance_prior_from_json);
      auto truth = load_rows<TruthRecord>(eval_truth, truth_from_json);
      MetricsReport report = eval_granularity == "detection"
                                 ? evaluate_detection(parsed, priors, truth)
                                 : evaluate_localization(parsed, priors, truth, g.config.word_threshold);
      write_file_atomic(eval_out, to_json(report).dump(2) + "\n");
      spdlog::info("{}: acc={:.4f} f1={:.4f}", eval_granularity, report.accuracy, report.f1);
      return 0;
    }

    if (*loss) {
      std::ifstream in(loss_features);
      FeatureSequence seq{read_features(in), parse_audio_label(loss_label)};
      LossResult r = consistency_loss(seq, g.config.loss);
      Json out;
      out["label"] = loss_label;
      out["config"] = {{"margin", g.config.loss.margin},
                       {"topk", g.config.loss.topk_fraction},
                       {"lambda", g.config.loss.lambda}};
      out["value"] = r.value;
      out["weighted_value"] = total_loss(0.0, r, g.config.loss);
      out["distances"] = r.distances;
      out["topk_indices"] = r.topk_indices;
      Json grad = Json::array();
      for (std::size_t i = 0; i < r.gradient.rows(); ++i) {
        auto row = r.gradient.row(i);
        grad.push_back(std::vector<double>(row.begin(), row.end()));
      }
      out["gradient"] = grad;
      if (loss_gradcheck) {
        auto gc = gradient_check(seq, g.config.loss, fd_step);
        out["gradcheck"] = {{"h", fd_step},
                            {"max_relative_error", gc.max_relative_error},
                            {"coordinates", gc.coordinates},
                            {"shrunk_steps", gc.shrunk_steps}};
      }
      if (loss_demo) {
        auto trace = descent_demo(seq, g.config.loss, demo_steps, demo_lr);
        Json traj = Json::array();
        for (const auto& p : trace.points)
          traj.push_back({{"step", p.step},
                          {"value", p.value},
                          {"mean_distance", p.mean_distance},
                          {"topk_mean_distance", p.topk_mean_distance}});
        out["demo"] = {{"steps", demo_steps}, {"lr", demo_lr}, {"trajectory", traj}};
      }
      write_file_atomic(loss_out, out.dump(2) + "\n");
      return 0;
    }

    if (*pipe) {
      if (!pipe_responses.empty()) paths.responses = pipe_responses;
      if (!pipe_mock.empty()) paths.mock_script = pipe_mock;
      const auto t0 = std::chrono::steady_clock::now();
      PipelineOutcome outcome = run_pipeline(g.config, paths);
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      if (outcome.exit_code == 2) {
        spdlog::error("{}", outcome.summary);
      } else {
        spdlog::info("{} in {:.2f}s (seed {})", outcome.summary, dt.count(), g.config.seed);
        for (const auto& e : outcome.errors) spdlog::warn("{} [{}]: {}", e.id, e.stage, e.reason);
      }
      return outcome.exit_code;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
