// SPDX-License-Identifier: Apache-2.0
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "prefopt/error.hpp"
#include "prefopt/prefdata.hpp"
#include "prefopt/ranking.hpp"
#include "temp_dir.hpp"

using namespace prefopt;
using prefopt::testing::TempDir;
using prefopt::testing::write_file;

namespace {

std::string random_text(Rng& rng) {
  static const std::vector<std::string> pieces{"a", "β", " ", "\"q\"", "\\", "\n", "日本", "x,y", "{}", "\t"};
  std::uniform_int_distribution<int> len(1, 8);
  std::string s;
  for (int i = len(rng); i > 0; --i) s += prefopt::testing::pick(pieces, rng);
  return s;
}

ComparisonOutcome random_outcome(Rng& rng, std::size_t m) {
  std::uniform_int_distribution<std::size_t> idx(0, m - 1);
  ComparisonOutcome o;
  o.verdict = prefopt::testing::pick(std::vector<Verdict>{Verdict::BaselineWins, Verdict::CandidateWins, Verdict::Tie}, rng);
  o.baseline_index = idx(rng);
  do o.candidate_index = idx(rng);
  while (o.candidate_index == o.baseline_index);
  o.judge_id = "judge-" + std::to_string(idx(rng));
  if (rng() % 2) o.raw_evidence = random_text(rng);
  return o;
}

}  // namespace

TEST(ReadPrompts, MapsFields) {
  TempDir dir;
  write_file(dir / "p.jsonl", R"({"id":"p1","prompt":"hi"})" "\n");
  const auto prompts = read_prompts(dir / "p.jsonl");
  ASSERT_EQ(prompts.size(), 1u);
  EXPECT_EQ(prompts[0], (PromptRecord{"p1", "hi"}));
}

TEST(ReadPrompts, EmptyFileYieldsNothing) {
  TempDir dir;
  write_file(dir / "p.jsonl", "");
  EXPECT_TRUE(read_prompts(dir / "p.jsonl").empty());
}

TEST(ReadPrompts, MissingFieldNamesLine) {
  TempDir dir;
  write_file(dir / "p.jsonl", R"({"id":"p1"})" "\n");
  try {
    read_prompts(dir / "p.jsonl");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":1:"), std::string::npos) << e.what();
  }
}

TEST(ReadPrompts, MalformedLineNamesLine) {
  TempDir dir;
  write_file(dir / "p.jsonl", R"({"id":"p1","prompt":"a"})" "\n" "{not json\n");
  try {
    read_prompts(dir / "p.jsonl");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(ReadPrompts, DuplicateIdRejected) {
  TempDir dir;
  write_file(dir / "p.jsonl", R"({"id":"p1","prompt":"a"})" "\n" R"({"id":"p1","prompt":"b"})" "\n");
  EXPECT_THROW(read_prompts(dir / "p.jsonl"), DataError);
}

TEST(ReadPrompts, MissingFileIsIoError) {
  EXPECT_THROW(read_prompts("/nonexistent/prompts.jsonl"), IoError);
}

TEST(ReadCandidates, TwoCandidates) {
  TempDir dir;
  write_file(dir / "c.jsonl", R"({"prompt_id":"p1","candidates":["a","b"]})" "\n");
  const auto sets = read_candidates(dir / "c.jsonl");
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets[0].size(), 2u);
}

TEST(ReadCandidates, SingleCandidateRejected) {
  TempDir dir;
  write_file(dir / "c.jsonl", R"({"prompt_id":"p1","candidates":["a"]})" "\n");
  try {
    read_candidates(dir / "c.jsonl");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("need at least 2 candidates"), std::string::npos);
  }
}

TEST(ReadCandidates, FiveCandidateRoundTrip) {
  TempDir dir;
  const std::vector<CandidateSet> sets{prefopt::testing::make_set("p1", 5)};
  write_candidates(sets, dir / "c.jsonl");
  EXPECT_EQ(read_candidates(dir / "c.jsonl"), sets);
}

TEST(Pairs, ThreePairRoundTrip) {
  TempDir dir;
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 3; ++i)
    pairs.push_back(PreferencePair{"p" + std::to_string(i), "q", "good", "bad", Strategy::Scoring, std::nullopt});
  write_pairs(pairs, dir / "pairs.jsonl");
  EXPECT_EQ(read_pairs(dir / "pairs.jsonl"), pairs);
}

TEST(Pairs, IdenticalCompletionsRejectedOnWrite) {
  TempDir dir;
  const std::vector<PreferencePair> pairs{{"p", "q", "same", "same", Strategy::IPR, std::nullopt}};
  EXPECT_THROW(write_pairs(pairs, dir / "pairs.jsonl"), DataError);
}

TEST(Pairs, IprTraceWithFourOutcomesSurvivesRoundTrip) {
  TempDir dir;
  const auto set = prefopt::testing::make_set("p1", 5);
  auto table = prefopt::testing::make_table("p1", {1, 4, 2, 5, 3});
  SimulatedJudge judge(table);
  const RankingTrace trace = ipr_select(set, "q", judge);
  ASSERT_EQ(trace.outcomes.size(), 4u);
  const std::vector<PreferencePair> pairs{
      {"p1", "q", set.candidates[trace.winner_index], set.candidates[0], Strategy::IPR, trace}};
  write_pairs(pairs, dir / "pairs.jsonl");
  const auto back = read_pairs(dir / "pairs.jsonl");
  ASSERT_EQ(back.size(), 1u);
  ASSERT_TRUE(back[0].trace.has_value());
  EXPECT_EQ(back[0].trace->outcomes.size(), 4u);
  EXPECT_EQ(back[0], pairs[0]);
}

TEST(Pairs, WriteToUnwritablePathIsIoError) {
  const std::vector<PreferencePair> pairs{{"p", "q", "a", "b", Strategy::IPR, std::nullopt}};
  EXPECT_THROW(write_pairs(pairs, "/nonexistent/dir/pairs.jsonl"), IoError);
}

TEST(Verdict, StringRoundTripAndMirror) {
  for (Verdict v : {Verdict::BaselineWins, Verdict::CandidateWins, Verdict::Tie}) {
    EXPECT_EQ(verdict_from_string(to_string(v)), v);
    EXPECT_EQ(mirror(mirror(v)), v);
  }
  EXPECT_EQ(mirror(Verdict::Tie), Verdict::Tie);
  EXPECT_THROW(verdict_from_string("draw"), DataError);
}

// Randomized round trip of every record type.
TEST(RoundTripProperty, RandomInstances) {
  Rng rng(7);
  TempDir dir;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PromptRecord> prompts;
    std::vector<CandidateSet> sets;
    std::vector<RankingTrace> traces;
    std::vector<PreferencePair> pairs;
    for (int i = 0; i < 4; ++i) {
      const std::string id = "p" + std::to_string(trial) + "_" + std::to_string(i);
      prompts.push_back({id, random_text(rng)});
      const std::size_t m = 2 + rng() % 6;
      CandidateSet s{id, {}};
      for (std::size_t k = 0; k < m; ++k) s.candidates.push_back(random_text(rng) + std::to_string(k));
      sets.push_back(s);
      RankingTrace t{id, {}, rng() % m, std::nullopt, 0};
      for (std::size_t k = 0; k + 1 < m; ++k) t.outcomes.push_back(random_outcome(rng, m));
      if (rng() % 2) t.loser_index = rng() % m;
      t.judge_calls = t.outcomes.size();
      traces.push_back(t);
      pairs.push_back({id, prompts.back().prompt, s.candidates[0], s.candidates[1],
                       prefopt::testing::pick(std::vector<Strategy>{Strategy::IPR, Strategy::Scoring, Strategy::Copeland}, rng),
                       rng() % 2 ? std::optional<RankingTrace>(t) : std::nullopt});
    }
    write_prompts(prompts, dir / "p.jsonl");
    write_candidates(sets, dir / "c.jsonl");
    write_traces(traces, dir / "t.jsonl");
    write_pairs(pairs, dir / "pairs.jsonl");
    EXPECT_EQ(read_prompts(dir / "p.jsonl"), prompts);
    EXPECT_EQ(read_candidates(dir / "c.jsonl"), sets);
    EXPECT_EQ(read_traces(dir / "t.jsonl"), traces);
    EXPECT_EQ(read_pairs(dir / "pairs.jsonl"), pairs);
  }
}
