#include "edittrace/edit_plan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace edittrace {

EditOperation parse_operation(std::string_view name) {
  if (name == "add") return EditOperation::Add;
  if (name == "delete") return EditOperation::Delete;
  if (name == "modify") return EditOperation::Modify;
  throw std::invalid_argument("unknown edit operation '" + std::string(name) + "'");
}

std::string_view operation_name(EditOperation op) {
  switch (op) {
    case EditOperation::Add: return "add";
    case EditOperation::Delete: return "delete";
    case EditOperation::Modify: return "modify";
  }
  return "?";
}

const char* to_string(Violation v) {
  switch (v) {
    case Violation::MultiRegion: return "MultiRegion";
    case Violation::BoundaryDeletion: return "BoundaryDeletion";
    case Violation::LengthMismatch: return "LengthMismatch";
    case Violation::NoEdit: return "NoEdit";
    case Violation::EmptyResult: return "EmptyResult";
    case Violation::OperationMismatch: return "OperationMismatch";
  }
  return "?";
}

// Diff: two dynamic programs over the suffix grid (i, j).
//   lcs[i][j]     longest common subsequence of source[i:], target[j:]
//   hunks[g][i][j] fewest hunks needed to finish from (i, j) using only
//                  LCS-preserving moves; g = 1 when a hunk is already open.
// The forward walk then takes the first optimal move in the order
// delete < insert < match.
std::vector<DiffHunk> word_diff(const TokenSequence& source, const TokenSequence& target) {
  if (source.language() != target.language())
    throw EditError(EditErrorKind::LanguageMismatch, "source and target languages differ");
  const std::size_t n = source.size();
  const std::size_t m = target.size();
  const std::size_t w = m + 1;
  auto at = [w](std::size_t i, std::size_t j) { return i * w + j; };

  std::vector<std::uint32_t> lcs((n + 1) * w, 0);
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = m; j-- > 0;)
      lcs[at(i, j)] = source[i] == target[j] ? lcs[at(i + 1, j + 1)] + 1
                                             : std::max(lcs[at(i + 1, j)], lcs[at(i, j + 1)]);

  auto can_match = [&](std::size_t i, std::size_t j) {
    return i < n && j < m && source[i] == target[j] && lcs[at(i, j)] == lcs[at(i + 1, j + 1)] + 1;
  };
  auto can_delete = [&](std::size_t i, std::size_t j) { return i < n && lcs[at(i + 1, j)] == lcs[at(i, j)]; };
  auto can_insert = [&](std::size_t i, std::size_t j) { return j < m && lcs[at(i, j + 1)] == lcs[at(i, j)]; };

  constexpr std::uint32_t kInf = std::numeric_limits<std::uint32_t>::max() / 2;
  std::vector<std::uint32_t> cost[2] = {std::vector<std::uint32_t>((n + 1) * w, kInf),
                                        std::vector<std::uint32_t>((n + 1) * w, kInf)};
  for (std::size_t i = n + 1; i-- > 0;) {
    for (std::size_t j = m + 1; j-- > 0;) {
      for (int g = 0; g < 2; ++g) {
        if (i == n && j == m) {
          cost[g][at(i, j)] = 0;
          continue;
        }
        std::uint32_t best = kInf;
        const std::uint32_t open = g ? 0 : 1;
        if (can_delete(i, j)) best = std::min(best, open + cost[1][at(i + 1, j)]);
        if (can_insert(i, j)) best = std::min(best, open + cost[1][at(i, j + 1)]);
        if (can_match(i, j)) best = std::min(best, cost[0][at(i + 1, j + 1)]);
        cost[g][at(i, j)] = best;
      }
    }
  }

  std::vector<DiffHunk> hunks;
  std::size_t i = 0, j = 0;
  int g = 0;
  while (i < n || j < m) {
    const std::uint32_t here = cost[g][at(i, j)];
    const std::uint32_t open = g ? 0 : 1;
    bool gap = false;
    if (can_delete(i, j) && open + cost[1][at(i + 1, j)] == here) {
      if (!g) hunks.push_back({i, i, j, j});
      ++i;
      gap = true;
    } else if (can_insert(i, j) && open + cost[1][at(i, j + 1)] == here) {
      if (!g) hunks.push_back({i, i, j, j});
      ++j;
      gap = true;
    } else {
      ++i;
      ++j;
    }
    if (gap) {
      hunks.back().src_end = i;
      hunks.back().tgt_end = j;
    }
    g = gap ? 1 : 0;
  }
  return hunks;
}

EditPlan classify_edit(const std::vector<DiffHunk>& hunks, const TokenSequence& source,
                       const TokenSequence& target) {
  if (hunks.empty()) throw EditError(EditErrorKind::NoEdit, "source and target are identical");
  if (hunks.size() != 1)
    throw EditError(EditErrorKind::MultiRegion,
                    "edit spans " + std::to_string(hunks.size()) + " separate regions");
  const DiffHunk& h = hunks.front();
  if (h.src_end > source.size() || h.tgt_end > target.size() || h.src_start > h.src_end ||
      h.tgt_start > h.tgt_end)
    throw EditError(EditErrorKind::RegionOutOfBounds, "hunk does not fit the sequences");

  EditPlan plan;
  plan.region_start = h.src_start;
  plan.removed.assign(source.tokens().begin() + h.src_start, source.tokens().begin() + h.src_end);
  plan.inserted.assign(target.tokens().begin() + h.tgt_start, target.tokens().begin() + h.tgt_end);
  if (plan.removed.empty())
    plan.operation = EditOperation::Add;
  else if (plan.inserted.empty())
    plan.operation = EditOperation::Delete;
  else
    plan.operation = EditOperation::Modify;
  return plan;
}

ValidationReport validate_plan(const EditPlan& plan, const TokenSequence& source, const LengthRule& rule) {
  ValidationReport report;
  const std::size_t removed = plan.removed.size();
  const std::size_t inserted = plan.inserted.size();
  if (removed == 0 && inserted == 0) {
    report.violations.push_back(Violation::NoEdit);
    return report;
  }
  switch (plan.operation) {
    case EditOperation::Delete:
      if (plan.region_start == 0 || plan.region_start + removed >= source.size())
        report.violations.push_back(Violation::BoundaryDeletion);
      if (removed >= source.size()) report.violations.push_back(Violation::EmptyResult);
      break;
    case EditOperation::Modify: {
      const auto lo = static_cast<std::size_t>(std::ceil(rule.min_ratio * static_cast<double>(removed)));
      const auto hi = static_cast<std::size_t>(std::floor(rule.max_ratio * static_cast<double>(removed)));
      if (inserted < lo || inserted > hi) report.violations.push_back(Violation::LengthMismatch);
      break;
    }
    case EditOperation::Add:
      break;
  }
  return report;
}

TokenSequence apply_plan(const EditPlan& plan, const TokenSequence& source) {
  const auto& src = source.tokens();
  if (plan.region_start > src.size() || plan.removed.size() > src.size() - plan.region_start)
    throw EditError(EditErrorKind::RegionOutOfBounds, "plan region exceeds the source length");
  if (!std::equal(plan.removed.begin(), plan.removed.end(), src.begin() + plan.region_start))
    throw EditError(EditErrorKind::RemovedMismatch, "source tokens differ from the plan's removed span");
  std::vector<std::string> out;
  out.reserve(src.size() - plan.removed.size() + plan.inserted.size());
  out.insert(out.end(), src.begin(), src.begin() + plan.region_start);
  out.insert(out.end(), plan.inserted.begin(), plan.inserted.end());
  out.insert(out.end(), src.begin() + plan.region_start + plan.removed.size(), src.end());
  return TokenSequence(std::move(out), source.language());
}

EditPlan heuristic_fallback(const TokenSequence& source, EditOperation operation) {
  if (source.size() < 3)
    throw EditError(EditErrorKind::SourceTooShort,
                    "fallback needs at least 3 tokens, got " + std::to_string(source.size()));
  const std::size_t mid = source.size() / 2;
  EditPlan plan;
  plan.operation = operation;
  plan.available = false;
  switch (operation) {
    case EditOperation::Delete:
      plan.region_start = mid;
      plan.removed = {source[mid]};
      break;
    case EditOperation::Add:
      plan.region_start = mid + 1;
      plan.inserted = {source[mid]};
      break;
    case EditOperation::Modify:
      plan.region_start = mid;
      plan.removed = {source[mid]};
      plan.inserted = {std::string(kFallbackPlaceholder)};
      break;
  }
  return plan;
}

ChatRequest edit_request(const TokenSequence& source, EditOperation operation,
                         const std::vector<Violation>& previous_violations, const RetryOptions& opts) {
  ChatRequest req;
  req.temperature = opts.temperature;
  req.max_tokens = opts.max_tokens;
  req.system =
      "You edit single sentences for a speech editing corpus. Reply with the edited sentence only, "
      "without quotes or explanations.";
  std::string instruction;
  switch (operation) {
    case EditOperation::Add:
      instruction =
          "Insert a few new words that fit the original context at exactly one position. "
          "Do not change any other word.";
      break;
    case EditOperation::Delete:
      instruction =
          "Remove one contiguous group of words. Never remove the first or the last word. "
          "Do not change any other word.";
      break;
    case EditOperation::Modify:
      instruction =
          "Replace one contiguous group of words with new words of similar length. "
          "Do not change any other word.";
      break;
  }
  req.user = instruction + "\nSentence: " + source.join();
  if (!previous_violations.empty()) {
    req.user += "\nThe previous attempt was rejected for:";
    for (Violation v : previous_violations) req.user += std::string(" ") + to_string(v);
    req.user += ".";
  }
  return req;
}

AttemptResult evaluate_reply(const std::string& reply, const TokenSequence& source,
                             EditOperation operation, const LengthRule& rule) {
  AttemptResult result;
  TokenSequence target = TokenSequence::tokenize(reply, source.language());
  if (target.empty()) {
    result.violations.push_back(Violation::EmptyResult);
    return result;
  }
  auto hunks = word_diff(source, target);
  if (hunks.empty()) {
    result.violations.push_back(Violation::NoEdit);
    return result;
  }
  if (hunks.size() > 1) {
    result.violations.push_back(Violation::MultiRegion);
    return result;
  }
  EditPlan plan = classify_edit(hunks, source, target);
  ValidationReport report = validate_plan(plan, source, rule);
  result.violations = std::move(report.violations);
  if (plan.operation != operation) result.violations.push_back(Violation::OperationMismatch);
  if (result.violations.empty()) result.plan = std::move(plan);
  return result;
}

EditPlan generate_with_retries(LlmClient& client, const TokenSequence& source, EditOperation operation,
                               const RetryOptions& opts) {
  if (opts.max_retries < 1) throw std::invalid_argument("max_retries must be >= 1");
  std::vector<Violation> last;
  for (int attempt = 0; attempt < opts.max_retries; ++attempt) {
    std::string reply = client.complete(edit_request(source, operation, last, opts));
    AttemptResult result = evaluate_reply(reply, source, operation, opts.length_rule);
    if (result.plan) return *std::move(result.plan);
    last = std::move(result.violations);
  }
  return heuristic_fallback(source, operation);
}

}  // namespace edittrace
