#include "edittrace/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#ifndef EDITTRACE_VERSION
#define EDITTRACE_VERSION "0.0.0"
#endif

namespace edittrace {

namespace fs = std::filesystem;

std::string_view version() { return EDITTRACE_VERSION; }

void PipelineConfig::validate() const {
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (max_retries < 1) throw std::invalid_argument("max retries must be >= 1");
  if (!(word_threshold >= 0.0 && word_threshold <= 1.0)) throw std::invalid_argument("word threshold must lie in [0, 1]");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  loss.validate();
}

std::string version_and_config_dump(const PipelineConfig& c) {
  Json j;
  j["version"] = std::string(version());
  j["seed"] = c.seed;
  j["pipeline"] = {{"workers", c.workers},
                   {"batch_size", c.batch_size},
                   {"max_retries", c.max_retries},
                   {"strategy", std::string(strategy_name(c.strategy))}};
  j["llm"] = {{"temperature", c.temperature}};
  j["prior"] = {{"aggregation", std::string(aggregation_name(c.aggregation))},
                {"score_reduction", c.reduction == ScoreReduction::Max ? "max" : "mean"}};
  j["loss"] = {{"margin", c.loss.margin},
               {"topk", c.loss.topk_fraction},
               {"lambda", c.loss.lambda},
               {"epsilon", c.loss.epsilon}};
  j["eval"] = {{"word_threshold", c.word_threshold}};
  return j.dump(2);
}

namespace {

const Json& field(const Json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw std::runtime_error(where + ": missing field '" + key + "'");
  return *it;
}

std::string string_field(const Json& j, const char* key, const std::string& where) {
  const Json& v = field(j, key, where);
  if (!v.is_string()) throw std::runtime_error(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

double number_field(const Json& j, const char* key, const std::string& where) {
  const Json& v = field(j, key, where);
  if (!v.is_number()) throw std::runtime_error(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

std::string where(const fs::path& path, std::size_t row) { return path.string() + " row " + std::to_string(row + 1); }

Json tokens_json(const std::vector<std::string>& tokens) { return Json(tokens); }

EditType parse_edit_type(const std::string& s) {
  if (s == "added") return EditType::Added;
  if (s == "deleted") return EditType::Deleted;
  if (s == "modified") return EditType::Modified;
  throw std::runtime_error("unknown edit type '" + s + "'");
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  auto rows = read_jsonl(path);
  std::vector<ManifestEntry> out;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto w = where(path, r);
    ManifestEntry e;
    e.id = string_field(rows[r], "id", w);
    e.source_text = string_field(rows[r], "source_text", w);
    e.language = parse_language(string_field(rows[r], "language", w));
    const std::string op = string_field(rows[r], "operation", w);
    if (op != "none") e.operation = parse_operation(op);
    if (TokenSequence::tokenize(e.source_text, e.language).empty())
      throw std::runtime_error(w + ": source_text is empty");
    if (!seen.insert(e.id).second) throw std::runtime_error(w + ": duplicate id '" + e.id + "'");
    out.push_back(std::move(e));
  }
  return out;
}

Json to_json(const SampleError& e) { return {{"id", e.id}, {"stage", e.stage}, {"reason", e.reason}}; }

Json to_json(const PlanRecord& r) {
  Json j;
  j["id"] = r.id;
  j["language"] = std::string(language_code(r.source.language()));
  j["source_text"] = r.source.join();
  j["edited_text"] = r.edited.join();
  if (r.plan) {
    j["operation"] = std::string(operation_name(r.plan->operation));
    j["region_start"] = r.plan->region_start;
    j["removed"] = tokens_json(r.plan->removed);
    j["inserted"] = tokens_json(r.plan->inserted);
    j["available"] = r.plan->available;
  } else {
    j["operation"] = "none";
    j["region_start"] = nullptr;
    j["removed"] = Json::array();
    j["inserted"] = Json::array();
    j["available"] = true;
  }
  return j;
}

PlanRecord plan_record_from_json(const Json& j) {
  const std::string w = "plan record";
  PlanRecord r;
  r.id = string_field(j, "id", w);
  Language lang = Language::English;
  if (j.contains("language")) lang = parse_language(string_field(j, "language", w));
  r.source = TokenSequence::tokenize(string_field(j, "source_text", w), lang);
  r.edited = TokenSequence::tokenize(string_field(j, "edited_text", w), lang);
  const std::string op = string_field(j, "operation", w);
  if (op != "none") {
    EditPlan p;
    p.operation = parse_operation(op);
    p.region_start = field(j, "region_start", w).get<std::size_t>();
    p.removed = field(j, "removed", w).get<std::vector<std::string>>();
    p.inserted = field(j, "inserted", w).get<std::vector<std::string>>();
    p.available = field(j, "available", w).get<bool>();
    r.plan = std::move(p);
  }
  return r;
}

std::map<std::string, std::vector<std::string>> load_mock_script(const fs::path& path) {
  std::map<std::string, std::vector<std::string>> script;
  auto rows = read_jsonl(path);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto w = where(path, r);
    auto& replies = script[string_field(rows[r], "id", w)];
    if (rows[r].contains("replies")) {
      for (const auto& s : rows[r]["replies"]) replies.push_back(s.get<std::string>());
    } else {
      replies.push_back(string_field(rows[r], "reply", w));
    }
  }
  return script;
}

ClientFactory mock_client_factory(std::map<std::string, std::vector<std::string>> script) {
  auto shared = std::make_shared<const std::map<std::string, std::vector<std::string>>>(std::move(script));
  return [shared](const std::string& id) -> std::shared_ptr<LlmClient> {
    auto it = shared->find(id);
    return std::make_shared<MockLlmClient>(it == shared->end() ? std::vector<std::string>{} : it->second);
  };
}

ClientFactory shared_client_factory(std::shared_ptr<LlmClient> client) {
  return [client](const std::string&) { return client; };
}

std::vector<PlanRecord> plan_corpus(const std::vector<ManifestEntry>& entries, const ClientFactory& clients,
                                    const PipelineConfig& config, std::vector<SampleError>& errors) {
  config.validate();
  RetryOptions opts;
  opts.max_retries = config.max_retries;
  opts.temperature = config.temperature;

  struct Slot {
    std::optional<PlanRecord> record;
    std::optional<SampleError> error;
  };
  std::vector<Slot> slots(entries.size());
  const auto n = static_cast<std::ptrdiff_t>(entries.size());
  const auto batch = static_cast<std::ptrdiff_t>(config.batch_size);

  for (std::ptrdiff_t begin = 0; begin < n; begin += batch) {
    const std::ptrdiff_t end = std::min(n, begin + batch);
#pragma omp parallel for num_threads(config.workers) schedule(dynamic, 1)
    for (std::ptrdiff_t i = begin; i < end; ++i) {
      const ManifestEntry& e = entries[i];
      Slot& slot = slots[i];
      try {
        PlanRecord rec;
        rec.id = e.id;
        rec.source = TokenSequence::tokenize(e.source_text, e.language);
        if (e.operation) {
          auto client = clients(e.id);
          rec.plan = generate_with_retries(*client, rec.source, *e.operation, opts);
          rec.edited = apply_plan(*rec.plan, rec.source);
        } else {
          rec.edited = rec.source;
        }
        slot.record = std::move(rec);
      } catch (const std::exception& ex) {
        slot.error = SampleError{e.id, "plan", ex.what()};
      }
    }
  }

  std::vector<PlanRecord> out;
  for (auto& s : slots) {
    if (s.record) out.push_back(std::move(*s.record));
    if (s.error) errors.push_back(std::move(*s.error));
  }
  return out;
}

Json to_json(const UtterancePrior& p, const PipelineConfig& config) {
  Json words = Json::array();
  for (const auto& w : p.words) words.push_back({{"w", w.word}, {"p", w.probability}, {"frames", w.frame_count}});
  return {{"id", p.id},
          {"method", std::string(aggregation_name(config.aggregation))},
          {"words", words},
          {"score", p.score},
          {"prompt", p.prompt}};
}

UtterancePrior utterance_prior_from_json(const Json& j) {
  const std::string w = "prior record";
  UtterancePrior p;
  p.id = string_field(j, "id", w);
  for (const auto& word : field(j, "words", w))
    p.words.push_back({string_field(word, "w", w), number_field(word, "p", w), word.value("frames", std::size_t{1})});
  p.score = number_field(j, "score", w);
  p.prompt = j.value("prompt", std::string{});
  return p;
}

std::map<std::string, FrameProbSeq> load_frames(const fs::path& path) {
  std::map<std::string, FrameProbSeq> out;
  auto rows = read_jsonl(path);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto w = where(path, r);
    FrameProbSeq f;
    f.utterance_id = string_field(rows[r], "id", w);
    f.frame_shift_ms = number_field(rows[r], "frame_shift_ms", w);
    for (const auto& p : field(rows[r], "probs", w)) f.probs.push_back(p.get<double>());
    std::string id = f.utterance_id;
    out[id] = std::move(f);
  }
  return out;
}

std::map<std::string, std::vector<WordBoundary>> load_alignments(const fs::path& path) {
  std::map<std::string, std::vector<WordBoundary>> out;
  if (path.extension() == ".ctm") {
    for (auto& [id, words] : parse_ctm(read_text(path))) out[id] = std::move(words);
    return out;
  }
  auto rows = read_jsonl(path);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto w = where(path, r);
    std::vector<WordBoundary> words;
    for (const auto& word : field(rows[r], "words", w))
      words.push_back({string_field(word, "w", w), number_field(word, "start_s", w), number_field(word, "end_s", w)});
    out[string_field(rows[r], "id", w)] = std::move(words);
  }
  return out;
}

std::vector<UtterancePrior> build_priors(const std::vector<std::string>& order,
                                         const std::map<std::string, FrameProbSeq>& frames,
                                         const std::map<std::string, std::vector<WordBoundary>>& alignments,
                                         const PipelineConfig& config, std::vector<SampleError>& errors) {
  std::vector<UtterancePrior> out;
  for (const auto& id : order) {
    auto f = frames.find(id);
    auto a = alignments.find(id);
    if (f == frames.end()) {
      errors.push_back({id, "prior", "no frame probabilities for this id"});
      continue;
    }
    if (a == alignments.end()) {
      errors.push_back({id, "prior", "no word alignment for this id"});
      continue;
    }
    try {
      UtterancePrior p;
      p.id = id;
      p.words = aggregate(f->second, a->second, config.aggregation);
      p.score = utterance_score(p.words, config.reduction);
      p.prompt = format_prior_prompt(p.words);
      out.push_back(std::move(p));
    } catch (const std::exception& ex) {
      errors.push_back({id, "prior", ex.what()});
    }
  }
  return out;
}

Json prompt_record(const std::string& id, PromptStrategy strategy, const std::optional<std::string>& prior) {
  PromptBundle b = build_prompt(strategy, prior);
  return {{"id", id}, {"strategy", std::string(strategy_name(strategy))}, {"system", b.system}, {"user", b.user}};
}

Json to_json(const TruthRecord& t) {
  Json j;
  j["id"] = t.id;
  j["label"] = t.label;
  j["edit_type"] = t.edit_type ? Json(std::string(edit_type_name(*t.edit_type))) : Json(nullptr);
  j["edited_words"] = t.edited_words;
  j["word_labels"] = t.word_labels;
  return j;
}

TruthRecord truth_from_json(const Json& j) {
  const std::string w = "truth record";
  TruthRecord t;
  t.id = string_field(j, "id", w);
  t.label = field(j, "label", w).get<int>() ? 1 : 0;
  if (j.contains("edit_type") && j["edit_type"].is_string()) t.edit_type = parse_edit_type(j["edit_type"]);
  t.edited_words = j.value("edited_words", std::string{});
  if (j.contains("word_labels")) t.word_labels = j["word_labels"].get<std::vector<int>>();
  return t;
}

TruthRecord make_truth(const PlanRecord& rec) {
  TruthRecord t;
  t.id = rec.id;
  t.word_labels.assign(rec.edited.size(), 0);
  if (!rec.plan) return t;
  const EditPlan& p = *rec.plan;
  t.label = 1;
  t.edit_type = edit_type_of(p.operation);
  t.edited_words = label_words(p, rec.source.language());
  if (p.operation == EditOperation::Delete) {
    if (p.region_start > 0 && p.region_start - 1 < t.word_labels.size()) t.word_labels[p.region_start - 1] = 1;
    if (p.region_start < t.word_labels.size()) t.word_labels[p.region_start] = 1;
  } else {
    for (std::size_t k = 0; k < p.inserted.size(); ++k)
      if (p.region_start + k < t.word_labels.size()) t.word_labels[p.region_start + k] = 1;
  }
  return t;
}

Json to_json(const ParsedRecord& r) {
  Json j;
  j["id"] = r.id;
  if (r.response) {
    j["verdict"] = r.response->verdict == Verdict::Edited ? "edited" : "bonafide";
    j["edited_words"] = r.response->edited_words;
    j["edit_type"] = r.response->edit_type ? Json(std::string(edit_type_name(*r.response->edit_type))) : Json(nullptr);
  } else {
    j["verdict"] = nullptr;
    j["edited_words"] = nullptr;
    j["edit_type"] = nullptr;
  }
  j["violation"] = r.violation ? Json(to_string(*r.violation)) : Json(nullptr);
  return j;
}

ParsedRecord parsed_from_json(const Json& j) {
  const std::string w = "parsed record";
  ParsedRecord r;
  r.id = string_field(j, "id", w);
  if (j.contains("violation") && j["violation"].is_string()) {
    r.violation = j["violation"] == "UnknownEditType" ? ParseErrorKind::UnknownEditType
                                                       : ParseErrorKind::UnrecognizedTemplate;
    return r;
  }
  EditResponse resp;
  resp.verdict = string_field(j, "verdict", w) == "edited" ? Verdict::Edited : Verdict::BonaFide;
  if (resp.verdict == Verdict::Edited) {
    resp.edited_words = string_field(j, "edited_words", w);
    resp.edit_type = parse_edit_type(string_field(j, "edit_type", w));
  }
  r.response = std::move(resp);
  return r;
}

ParsedRecord parse_record(const std::string& id, const std::string& text) {
  ParsedRecord r;
  r.id = id;
  r.text = text;
  try {
    r.response = parse_response(text);
  } catch (const ParseError& e) {
    r.violation = e.kind();
  }
  return r;
}

namespace {

template <typename T>
std::map<std::string, const T*> index_by_id(const std::vector<T>& v) {
  std::map<std::string, const T*> m;
  for (const auto& x : v) m.emplace(x.id, &x);
  return m;
}

}  // namespace

MetricsReport evaluate_detection(const std::vector<ParsedRecord>& parsed, const std::vector<UtterancePrior>& priors,
                                 const std::vector<TruthRecord>& truth) {
  auto by_prior = index_by_id(priors);
  auto by_truth = index_by_id(truth);
  std::vector<DetectionItem> items;
  for (const auto& p : parsed) {
    auto t = by_truth.find(p.id);
    if (t == by_truth.end()) throw MetricsError(MetricsErrorKind::MissingScore, "no truth label for '" + p.id + "'");
    DetectionItem item;
    item.id = p.id;
    item.parsed = p.response;
    item.truth = t->second->label;
    if (auto s = by_prior.find(p.id); s != by_prior.end()) item.score = s->second->score;
    items.push_back(std::move(item));
  }
  return detection_eval(items);
}

MetricsReport evaluate_localization(const std::vector<ParsedRecord>& parsed,
                                    const std::vector<UtterancePrior>& priors, const std::vector<TruthRecord>& truth,
                                    double threshold) {
  auto by_prior = index_by_id(priors);
  auto by_truth = index_by_id(truth);
  std::vector<LocalizationRecord> records;
  for (const auto& p : parsed) {
    auto t = by_truth.find(p.id);
    auto s = by_prior.find(p.id);
    if (t == by_truth.end()) throw MetricsError(MetricsErrorKind::MissingScore, "no truth label for '" + p.id + "'");
    if (s == by_prior.end()) throw MetricsError(MetricsErrorKind::MissingScore, "no word priors for '" + p.id + "'");
    LocalizationRecord rec;
    rec.id = p.id;
    for (const auto& w : s->second->words) rec.word_scores.push_back(w.probability);
    rec.word_labels = t->second->word_labels;
    if (p.response) rec.predicted_words = p.response->edited_words;
    rec.truth_words = t->second->edited_words;
    records.push_back(std::move(rec));
  }
  return localization_eval(records, threshold);
}

Json to_json(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json j;
  j["granularity"] = r.granularity;
  j["accuracy"] = r.accuracy;
  j["auc"] = opt(r.auc);
  j["f1"] = r.f1;
  j["eer"] = opt(r.eer);
  j["exact_match"] = opt(r.exact_match);
  j["counts"] = {{"positives", r.counts.positives},
                 {"negatives", r.counts.negatives},
                 {"trials", r.counts.trials},
                 {"violations", r.counts.violations}};
  j["threshold"] = r.threshold;
  j["notes"] = r.notes;
  return j;
}

PipelineOutcome run_pipeline(const PipelineConfig& config, const PipelinePaths& paths) {
  PipelineOutcome outcome;
  auto fail = [&](const std::string& msg) {
    outcome.exit_code = 2;
    outcome.summary = msg;
    return outcome;
  };

  try {
    config.validate();
  } catch (const std::exception& e) {
    return fail(std::string("invalid configuration: ") + e.what());
  }
  for (const auto* p : {&paths.manifest, &paths.frames, &paths.alignments})
    if (!fs::exists(*p)) return fail("input file not found: " + p->string());
  if (paths.responses && !fs::exists(*paths.responses))
    return fail("input file not found: " + paths.responses->string());
  if (paths.mock_script && !fs::exists(*paths.mock_script))
    return fail("input file not found: " + paths.mock_script->string());

  std::vector<ManifestEntry> manifest;
  std::map<std::string, FrameProbSeq> frames;
  std::map<std::string, std::vector<WordBoundary>> alignments;
  std::vector<Json> responses;
  ClientFactory clients;
  try {
    manifest = load_manifest(paths.manifest);
    frames = load_frames(paths.frames);
    alignments = load_alignments(paths.alignments);
    if (paths.responses) responses = read_jsonl(*paths.responses);
    if (paths.mock_script) {
      clients = mock_client_factory(load_mock_script(*paths.mock_script));
    } else {
      ClientConfig cc = ClientConfig::from_env();
      if (cc.endpoint_url.empty()) return fail("no --mock-llm script and EDITTRACE_LLM_URL is unset");
      clients = shared_client_factory(std::make_shared<HttpLlmClient>(cc));
    }
    fs::create_directories(paths.out_dir);
  } catch (const std::exception& e) {
    return fail(e.what());
  }

  auto& errors = outcome.errors;
  try {
    // plan
    auto plans = plan_corpus(manifest, clients, config, errors);
    std::vector<Json> rows;
    for (const auto& p : plans) rows.push_back(to_json(p));
    write_jsonl_atomic(paths.out_dir / "plans.jsonl", rows);

    // prior
    std::vector<std::string> order;
    for (const auto& p : plans) order.push_back(p.id);
    auto priors = build_priors(order, frames, alignments, config, errors);
    rows.clear();
    for (const auto& p : priors) rows.push_back(to_json(p, config));
    write_jsonl_atomic(paths.out_dir / "priors.jsonl", rows);

    // prompt
    rows.clear();
    for (const auto& p : priors) rows.push_back(prompt_record(p.id, config.strategy, p.prompt));
    write_jsonl_atomic(paths.out_dir / "prompts.jsonl", rows);

    // truth, kept only where the labels line up with the aligned words
    auto prior_index = index_by_id(priors);
    std::vector<TruthRecord> truth;
    rows.clear();
    for (const auto& p : plans) {
      TruthRecord t = make_truth(p);
      auto pr = prior_index.find(p.id);
      if (pr != prior_index.end() && pr->second->words.size() != t.word_labels.size()) {
        errors.push_back({p.id, "truth",
                          "alignment has " + std::to_string(pr->second->words.size()) + " words but the edited text has " +
                              std::to_string(t.word_labels.size())});
        continue;
      }
      rows.push_back(to_json(t));
      truth.push_back(std::move(t));
    }
    write_jsonl_atomic(paths.out_dir / "truth.jsonl", rows);

    if (paths.responses) {
      std::vector<ParsedRecord> parsed;
      std::vector<Json> parsed_rows, violation_rows;
      for (std::size_t r = 0; r < responses.size(); ++r) {
        const auto w = where(*paths.responses, r);
        ParsedRecord rec = parse_record(string_field(responses[r], "id", w), string_field(responses[r], "text", w));
        parsed_rows.push_back(to_json(rec));
        if (rec.violation)
          violation_rows.push_back({{"id", rec.id}, {"text", rec.text}, {"error", to_string(*rec.violation)}});
        parsed.push_back(std::move(rec));
      }
      write_jsonl_atomic(paths.out_dir / "parsed.jsonl", parsed_rows);
      write_jsonl_atomic(paths.out_dir / "violations.jsonl", violation_rows);

      // evaluate only ids that made it through every stage
      auto truth_index = index_by_id(truth);
      std::vector<ParsedRecord> usable;
      for (const auto& p : parsed) {
        if (truth_index.count(p.id) && prior_index.count(p.id))
          usable.push_back(p);
        else
          errors.push_back({p.id, "eval", "response has no matching prior or truth record"});
      }
      Json report;
      report["detection"] = to_json(evaluate_detection(usable, priors, truth));
      report["localization"] = to_json(evaluate_localization(usable, priors, truth, config.word_threshold));
      write_file_atomic(paths.out_dir / "report.json", report.dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    errors.push_back({"*", "pipeline", e.what()});
    std::vector<Json> rows;
    for (const auto& e2 : errors) rows.push_back(to_json(e2));
    write_jsonl_atomic(paths.out_dir / "errors.jsonl", rows);
    return fail(e.what());
  }

  std::vector<Json> rows;
  for (const auto& e : errors) rows.push_back(to_json(e));
  write_jsonl_atomic(paths.out_dir / "errors.jsonl", rows);

  std::ostringstream summary;
  summary << manifest.size() << " samples, " << errors.size() << " errors";
  if (!errors.empty()) {
    std::map<std::string, int> by_stage;
    for (const auto& e : errors) ++by_stage[e.stage];
    summary << " (";
    bool first = true;
    for (const auto& [stage, count] : by_stage) {
      summary << (first ? "" : ", ") << stage << ": " << count;
      first = false;
    }
    summary << ")";
  }
  outcome.summary = summary.str();
  outcome.exit_code = errors.empty() ? 0 : 1;
  return outcome;
}

}  // namespace edittrace
