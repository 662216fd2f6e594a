// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <string>

#include "prefopt/error.hpp"
#include "prefopt/judge.hpp"

namespace prefopt {

namespace {

constexpr std::string_view kPreamble =
    "You are a helpful assistant, that ranks models by the quality of their answers.\n"
    "Act as an impartial judge and evaluate the quality of the responses provided by two AI "
    "assistants to the user question displayed below.\n"
    "The length of the response generated by each assistant is not a criterion for evaluation.\n"
    "Your evaluation should consider correctness, helpfulness, completeness, and clarity of the "
    "responses.\n"
    "Remember not to allow the length of the responses to influence your evaluation.\n"
    "You will be given the question within <question> tags,\n"
    "assistant A's answer within <assistant_a> tags,\n"
    "and assistant B's answer within <assistant_b> tags.\n"
    "Your job is to evaluate whether assistant A's answer or assistant B's answer is better.\n"
    "Avoid any position biases and ensure that the order in which the responses are presented "
    "does not\n"
    "influence your decision. Be as objective as possible.\n"
    "After providing your explanation, output your final verdict within <verdict> tags strictly "
    "following this format:\n"
    "<verdict>A</verdict> if assistant A is better, <verdict>B</verdict> if assistant B is "
    "better, and <verdict>tie</verdict> for a tie.\n"
    "You must provide your final verdict with the format <verdict>xxx</verdict> once in your "
    "response!!!\n";

constexpr std::string_view kOpenTag = "<verdict>";
constexpr std::string_view kCloseTag = "</verdict>";

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string_view to_string(JudgeVerdict v) noexcept {
  switch (v) {
    case JudgeVerdict::A: return "A";
    case JudgeVerdict::B: return "B";
    case JudgeVerdict::Tie: break;
  }
  return "tie";
}

std::string render_judge_prompt(std::string_view question, std::string_view response_a,
                                std::string_view response_b) {
  if (question.empty() || response_a.empty() || response_b.empty())
    throw DataError("judge prompt slots must be non-empty");
  std::string out;
  out.reserve(kPreamble.size() + question.size() + response_a.size() + response_b.size() + 96);
  out += kPreamble;
  out += "\n<question>\n";
  out += question;
  out += "\n</question>\n\n<assistant_a>\n";
  out += response_a;
  out += "\n</assistant_a>\n\n<assistant_b>\n";
  out += response_b;
  out += "\n</assistant_b>";
  return out;
}

JudgeVerdict parse_verdict(std::string_view raw) {
  // tolower keeps byte offsets, so positions found in `lower` index `raw`.
  const std::string lower = ascii_lower(raw);
  const auto close = lower.rfind(kCloseTag);
  if (close == std::string::npos) throw ParseError(std::string(raw));
  const auto open = lower.rfind(kOpenTag, close);
  if (open == std::string::npos) throw ParseError(std::string(raw));

  const auto start = open + kOpenTag.size();
  const std::string token = ascii_lower(trim(std::string_view(lower).substr(start, close - start)));
  if (token == "a") return JudgeVerdict::A;
  if (token == "b") return JudgeVerdict::B;
  if (token == "tie") return JudgeVerdict::Tie;
  throw ParseError(std::string(raw));
}

Verdict to_outcome_verdict(JudgeVerdict v, bool baseline_is_a) noexcept {
  switch (v) {
    case JudgeVerdict::A: return baseline_is_a ? Verdict::BaselineWins : Verdict::CandidateWins;
    case JudgeVerdict::B: return baseline_is_a ? Verdict::CandidateWins : Verdict::BaselineWins;
    case JudgeVerdict::Tie: break;
  }
  return Verdict::Tie;
}

}  // namespace prefopt
