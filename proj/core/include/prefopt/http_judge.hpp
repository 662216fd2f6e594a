// SPDX-License-Identifier: Apache-2.0
//
// LLM judge over an OpenAI-compatible chat-completions endpoint.
#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include "prefopt/judge.hpp"

namespace prefopt {

struct HttpJudgeOptions {
  /// Full URL, e.g. "http://localhost:8000/v1/chat/completions".
  std::string endpoint;
  std::string model;
  /// Sent as a bearer token when non-empty.
  std::string api_key;
  std::chrono::milliseconds timeout{60'000};
  /// Extra attempts after the first one.
  int max_retries = 3;
  /// Backoff before retry k is retry_backoff * 2^(k-1).
  std::chrono::milliseconds retry_backoff{500};
  std::size_t max_in_flight = 4;
  /// Query both orderings; disagreement yields Tie. Doubles the call count.
  bool symmetrize = false;
  /// Map an unparsable reply (after retries) to Tie instead of failing.
  bool parse_error_as_tie = false;

  void validate() const;
};

struct JudgeResponse {
  std::string raw;
  JudgeVerdict verdict = JudgeVerdict::Tie;
  int retry_count = 0;
};

struct HttpJudgeStats {
  std::size_t requests = 0;
  std::size_t retries = 0;
  std::size_t failures = 0;
};

class HttpJudge final : public Judge {
 public:
  explicit HttpJudge(HttpJudgeOptions options);
  ~HttpJudge() override;

  HttpJudge(const HttpJudge&) = delete;
  HttpJudge& operator=(const HttpJudge&) = delete;

  std::string id() const override;

  /// Baseline is presented as assistant A, candidate as assistant B.
  ComparisonOutcome compare(const CompareRequest& req) override;

  /// Sends one rendered prompt and parses the verdict, retrying transport
  /// failures, 429/5xx replies and unparsable replies. Throws JudgeError
  /// (or ParseError) once the retry budget is spent.
  JudgeResponse query(std::string_view rendered_prompt);

  HttpJudgeStats stats() const;
  const HttpJudgeOptions& options() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "scheme://host[:port]/path" into {"scheme://host[:port]", "/path"}.
std::pair<std::string, std::string> split_endpoint(std::string_view url);

}  // namespace prefopt
