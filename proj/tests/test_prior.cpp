#include <gtest/gtest.h>

#include <random>

#include "edittrace/prior.hpp"
#include "oracles.hpp"

using namespace edittrace;

namespace {

FrameProbSeq four_frames() { return {"u1", 20.0, {0.0, 0.2, 0.8, 1.0}}; }
std::vector<WordBoundary> two_words() { return {{"A", 0.0, 0.04}, {"B", 0.04, 0.08}}; }

// Random frames plus boundaries that tile every frame, words of 1..6 frames.
struct Instance {
  FrameProbSeq frames;
  std::vector<WordBoundary> words;
};

Instance random_full_coverage(std::mt19937_64& rng) {
  Instance inst;
  const double shifts[] = {10.0, 12.5, 20.0, 25.0};
  inst.frames.utterance_id = "r";
  inst.frames.frame_shift_ms = shifts[rng() % 4];
  const std::size_t L = 1 + rng() % 300;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < L; ++i) inst.frames.probs.push_back(u(rng));
  const double s = inst.frames.frame_shift_ms / 1000.0;
  std::size_t at = 0;
  while (at < L) {
    const std::size_t len = std::min<std::size_t>(L - at, 1 + rng() % 6);
    inst.words.push_back({"w" + std::to_string(inst.words.size()), static_cast<double>(at) * s,
                          static_cast<double>(at + len) * s});
    at += len;
  }
  return inst;
}

}  // namespace

TEST(Aggregate, MeanExample) {
  auto priors = aggregate(four_frames(), two_words(), Aggregation::Mean);
  ASSERT_EQ(priors.size(), 2u);
  // frame centers 10/30/50/70 ms: A takes frames 0-1, B frames 2-3
  EXPECT_NEAR(priors[0].probability, (0.0 + 0.2) / 2, 1e-15);
  EXPECT_NEAR(priors[1].probability, (0.8 + 1.0) / 2, 1e-15);
  EXPECT_EQ(priors[0].frame_count, 2u);
  EXPECT_EQ(priors[1].word, "B");
}

TEST(Aggregate, MaxExample) {
  auto priors = aggregate(four_frames(), two_words(), Aggregation::Max);
  EXPECT_EQ(priors[0].probability, 0.2);
  EXPECT_EQ(priors[1].probability, 1.0);
}

TEST(Aggregate, ConstantSequence) {
  FrameProbSeq f{"c", 20.0, std::vector<double>(50, 0.5)};
  std::vector<WordBoundary> words = {{"x", 0.1, 0.3}, {"y", 0.35, 0.5}, {"z", 0.7, 0.95}};
  for (auto method : {Aggregation::Mean, Aggregation::Max})
    for (const auto& wp : aggregate(f, words, method)) EXPECT_EQ(wp.probability, 0.5);
}

TEST(Aggregate, SilenceFramesDropped) {
  FrameProbSeq f{"s", 20.0, {0.9, 0.1, 0.9, 0.3}};
  auto priors = aggregate(f, {{"only", 0.02, 0.06}}, Aggregation::Mean);  // centers 30 and 50 ms
  EXPECT_NEAR(priors[0].probability, 0.5, 1e-15);
  EXPECT_EQ(priors[0].frame_count, 2u);
}

TEST(Aggregate, Errors) {
  auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const PriorError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no PriorError";
    return PriorErrorKind::MalformedPrompt;
  };
  EXPECT_EQ(kind_of([] { aggregate(four_frames(), {{"A", 0.04, 0.08}, {"B", 0.0, 0.04}}); }),
            PriorErrorKind::UnsortedBoundaries);
  EXPECT_EQ(kind_of([] { aggregate(four_frames(), {{"A", 0.0, 0.05}, {"B", 0.04, 0.08}}); }),
            PriorErrorKind::OverlappingBoundaries);
  EXPECT_EQ(kind_of([] { aggregate(four_frames(), {{"A", 0.03, 0.03}}); }), PriorErrorKind::InvalidBoundary);
  EXPECT_EQ(kind_of([] { aggregate(four_frames(), {{"A", 0.0, 0.005}}); }), PriorErrorKind::EmptyWord);
  EXPECT_EQ(kind_of([] { aggregate({"u", 20.0, {1.5}}, {{"A", 0.0, 0.02}}); }),
            PriorErrorKind::InvalidProbability);
  EXPECT_EQ(kind_of([] { aggregate({"u", 0.0, {0.5}}, {{"A", 0.0, 0.02}}); }), PriorErrorKind::InvalidFrameShift);
}

TEST(Aggregate, FrameWeightedMeanIsConserved) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    auto inst = random_full_coverage(rng);
    auto priors = aggregate(inst.frames, inst.words, Aggregation::Mean);
    long double weighted = 0;
    std::size_t frames = 0;
    for (const auto& wp : priors) {
      weighted += static_cast<long double>(wp.probability) * wp.frame_count;
      frames += wp.frame_count;
    }
    ASSERT_EQ(frames, inst.frames.probs.size());
    ASSERT_NEAR(static_cast<double>(weighted / frames), oracle::frame_mean(inst.frames.probs), 1e-12);
  }
}

TEST(Aggregate, OutputsStayInUnitIntervalAndKeepOrder) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = random_full_coverage(rng);
    for (auto method : {Aggregation::Mean, Aggregation::Max}) {
      auto priors = aggregate(inst.frames, inst.words, method);
      ASSERT_EQ(priors.size(), inst.words.size());
      for (std::size_t k = 0; k < priors.size(); ++k) {
        EXPECT_EQ(priors[k].word, inst.words[k].word);
        EXPECT_GE(priors[k].probability, 0.0);
        EXPECT_LE(priors[k].probability, 1.0);
      }
    }
  }
}

TEST(PriorPrompt, Formatting) {
  EXPECT_EQ(format_prior_prompt({{"A", 0.1, 2}, {"B", 0.9, 2}}),
            "Word-level editing probabilities from an acoustic detector: A(p=0.10) B(p=0.90)");
  EXPECT_EQ(format_prior_prompt({{"x", 0.0, 1}}), std::string(kPriorPromptHeader) + " x(p=0.00)");
  EXPECT_EQ(format_prior_prompt({{"x", 0.005, 1}}), std::string(kPriorPromptHeader) + " x(p=0.01)");
  EXPECT_EQ(format_prior_prompt({{"x", 1.0, 1}}), std::string(kPriorPromptHeader) + " x(p=1.00)");
  EXPECT_THROW(format_prior_prompt({}), PriorError);
}

TEST(PriorPrompt, HalfUpRoundingOnDecimalHalves) {
  for (int h = 0; h < 100; ++h) {
    // the decimal literal k.k5 as parsed from text
    const double half = std::stod("0." + std::string(h < 10 ? "0" : "") + std::to_string(h) + "5");
    EXPECT_EQ(round_hundredths(half), h + 1) << half;
    EXPECT_EQ(round_hundredths(h / 100.0), h);
  }
}

TEST(PriorPrompt, ParseRecoversWordsAndRoundedValues) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const char* words[] = {"the", "cat(", "p=x", "我", "a)b", "end."};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<WordPrior> priors;
    const std::size_t n = 1 + rng() % 8;
    for (std::size_t k = 0; k < n; ++k) priors.push_back({words[rng() % 6], u(rng), 1});
    auto parsed = parse_prior_prompt(format_prior_prompt(priors));
    ASSERT_EQ(parsed.size(), n);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_EQ(parsed[k].word, priors[k].word);
      EXPECT_EQ(parsed[k].hundredths, round_hundredths(priors[k].probability));
    }
  }
}

TEST(PriorPrompt, MalformedRejected) {
  EXPECT_THROW(parse_prior_prompt("nope A(p=0.10)"), PriorError);
  EXPECT_THROW(parse_prior_prompt(std::string(kPriorPromptHeader) + " A(p=0.1)"), PriorError);
  EXPECT_THROW(parse_prior_prompt(std::string(kPriorPromptHeader) + " A(p=0.10"), PriorError);
}

TEST(UtteranceScore, Reductions) {
  std::vector<WordPrior> p = {{"a", 0.1, 1}, {"b", 0.9, 1}};
  EXPECT_EQ(utterance_score(p, ScoreReduction::Max), 0.9);
  EXPECT_EQ(utterance_score(p, ScoreReduction::Mean), 0.5);
  for (auto r : {ScoreReduction::Max, ScoreReduction::Mean}) EXPECT_EQ(utterance_score({{"a", 0.3, 1}}, r), 0.3);
  EXPECT_THROW(utterance_score({}), PriorError);
}

TEST(Ctm, ParsesLinesGroupedById) {
  auto parsed = parse_ctm("u1 1 0.00 0.04 A\nu2 1 0.10 0.20 X\n\nu1 1 0.04 0.04 B\n");
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[0].first, "u1");
  ASSERT_EQ(parsed[0].second.size(), 2u);
  EXPECT_EQ(parsed[0].second[1].word, "B");
  EXPECT_DOUBLE_EQ(parsed[0].second[1].end, 0.08);
  EXPECT_DOUBLE_EQ(parsed[1].second[0].end, 0.30);
  EXPECT_THROW(parse_ctm("u1 1 0.0\n"), std::invalid_argument);
}
