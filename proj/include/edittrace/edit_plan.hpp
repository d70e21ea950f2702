#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "edittrace/llm_client.hpp"
#include "edittrace/tokens.hpp"

namespace edittrace {

enum class EditOperation { Add, Delete, Modify };

// "add" / "delete" / "modify"
EditOperation parse_operation(std::string_view name);
std::string_view operation_name(EditOperation op);

/// Half-open spans [src_start, src_end) of the source replaced by
/// [tgt_start, tgt_end) of the target.
struct DiffHunk {
  std::size_t src_start = 0;
  std::size_t src_end = 0;
  std::size_t tgt_start = 0;
  std::size_t tgt_end = 0;

  friend bool operator==(const DiffHunk&, const DiffHunk&) = default;
};

/// One atomic edit. The region is a single start index plus one removed and
/// one inserted span, so it is contiguous by construction.
struct EditPlan {
  EditOperation operation = EditOperation::Add;
  std::size_t region_start = 0;
  std::vector<std::string> removed;
  std::vector<std::string> inserted;
  // false only for plans synthesized by heuristic_fallback
  bool available = true;

  friend bool operator==(const EditPlan&, const EditPlan&) = default;
};

enum class Violation { MultiRegion, BoundaryDeletion, LengthMismatch, NoEdit, EmptyResult, OperationMismatch };

const char* to_string(Violation v);

struct ValidationReport {
  std::vector<Violation> violations;

  bool valid() const { return violations.empty(); }
};

enum class EditErrorKind { MultiRegion, NoEdit, RegionOutOfBounds, RemovedMismatch, SourceTooShort, LanguageMismatch };

class EditError : public std::runtime_error {
 public:
  EditError(EditErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  EditErrorKind kind() const { return kind_; }

 private:
  EditErrorKind kind_;
};

/// Bounds on |inserted| / |removed| for Modify. The lower bound is rounded up.
struct LengthRule {
  double min_ratio = 0.5;
  double max_ratio = 2.0;
};

/// Token-level diff. Among all alignments with a longest common subsequence
/// the one with the fewest hunks is chosen; remaining ties go to the
/// alignment whose gaps come first, so ambiguous insertions anchor to the
/// earliest index.
std::vector<DiffHunk> word_diff(const TokenSequence& source, const TokenSequence& target);

EditPlan classify_edit(const std::vector<DiffHunk>& hunks, const TokenSequence& source,
                       const TokenSequence& target);

ValidationReport validate_plan(const EditPlan& plan, const TokenSequence& source,
                               const LengthRule& rule = {});

TokenSequence apply_plan(const EditPlan& plan, const TokenSequence& source);

inline constexpr std::string_view kFallbackPlaceholder = "<unk>";

/// Rule-based edit around the middle token (index size/2): Delete drops it,
/// Add repeats it, Modify swaps it for kFallbackPlaceholder.
EditPlan heuristic_fallback(const TokenSequence& source, EditOperation operation);

struct RetryOptions {
  int max_retries = 5;
  double temperature = 0.7;
  int max_tokens = 256;
  LengthRule length_rule{};
};

// The fixed instruction sent to the text-editing model.
ChatRequest edit_request(const TokenSequence& source, EditOperation operation,
                         const std::vector<Violation>& previous_violations, const RetryOptions& opts);

/// Attempt outcome for a single LLM reply, used by generate_with_retries and
/// exposed for diagnostics.
struct AttemptResult {
  std::optional<EditPlan> plan;
  std::vector<Violation> violations;
};

AttemptResult evaluate_reply(const std::string& reply, const TokenSequence& source,
                             EditOperation operation, const LengthRule& rule = {});

/// Strict validation, then up to max_retries requests in total, then the
/// heuristic fallback. ClientError from the client propagates unchanged.
EditPlan generate_with_retries(LlmClient& client, const TokenSequence& source,
                               EditOperation operation, const RetryOptions& opts = {});

}  // namespace edittrace
