// SPDX-License-Identifier: Apache-2.0
#include "prefopt/http_judge.hpp"

#include <atomic>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <json.hpp>

#include "prefopt/error.hpp"

namespace prefopt {

using json = nlohmann::json;

std::pair<std::string, std::string> split_endpoint(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos)
    throw ConfigError("endpoint \"" + std::string(url) + "\" has no scheme (http:// or https://)");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

void HttpJudgeOptions::validate() const {
  if (endpoint.empty()) throw ConfigError("judge endpoint is not set");
  split_endpoint(endpoint);
  if (model.empty()) throw ConfigError("judge model name is not set");
  if (timeout.count() <= 0) throw ConfigError("judge timeout must be positive");
  if (max_retries < 0) throw ConfigError("judge max_retries must be >= 0");
  if (retry_backoff.count() < 0) throw ConfigError("judge retry backoff must be >= 0");
  if (max_in_flight == 0) throw ConfigError("judge max_in_flight must be >= 1");
}

struct HttpJudge::Impl {
  explicit Impl(HttpJudgeOptions opts)
      : options(std::move(opts)),
        slots(static_cast<std::ptrdiff_t>(options.max_in_flight)) {
    std::tie(base_url, path) = split_endpoint(options.endpoint);
  }

  HttpJudgeOptions options;
  std::string base_url;
  std::string path;
  std::counting_semaphore<> slots;
  std::atomic<std::size_t> requests{0};
  std::atomic<std::size_t> retries{0};
  std::atomic<std::size_t> failures{0};

  std::string request_body(std::string_view prompt) const {
    json body = {{"model", options.model},
                 {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                 {"temperature", 0}};
    return body.dump();
  }

  httplib::Result post(const std::string& body) {
    httplib::Client client(base_url);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!options.api_key.empty())
      headers.emplace("Authorization", "Bearer " + options.api_key);

    slots.acquire();
    ++requests;
    auto res = client.Post(path, headers, body, "application/json");
    slots.release();
    return res;
  }

  JudgeResponse query(std::string_view prompt) {
    const std::string body = request_body(prompt);
    std::string last_error;
    std::optional<std::string> unparsable;

    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
      if (attempt > 0) {
        ++retries;
        std::this_thread::sleep_for(options.retry_backoff * (1 << std::min(attempt - 1, 16)));
      }
      unparsable.reset();

      auto res = post(body);
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        spdlog::warn("judge request failed (attempt {}): {}", attempt + 1, last_error);
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        spdlog::warn("judge request failed (attempt {}): {}", attempt + 1, last_error);
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        ++failures;
        throw JudgeError("judge endpoint returned HTTP " + std::to_string(res->status) + ": " +
                         res->body.substr(0, 512));
      }

      std::string content;
      try {
        const json reply = json::parse(res->body);
        content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const json::exception& e) {
        last_error = std::string("malformed chat-completions reply: ") + e.what();
        spdlog::warn("judge request failed (attempt {}): {}", attempt + 1, last_error);
        continue;
      }

      try {
        return JudgeResponse{content, parse_verdict(content), attempt};
      } catch (const ParseError&) {
        last_error = "unparsable verdict";
        unparsable = std::move(content);
        spdlog::warn("judge reply had no verdict tag (attempt {})", attempt + 1);
      }
    }

    ++failures;
    if (unparsable) throw ParseError(std::move(*unparsable));
    throw JudgeError(last_error + " after " + std::to_string(options.max_retries + 1) +
                     " attempt(s) to " + options.endpoint);
  }

  ComparisonOutcome compare_once(const CompareRequest& req) {
    ComparisonOutcome out;
    out.baseline_index = req.baseline_index;
    out.candidate_index = req.candidate_index;
    out.judge_id = "http:" + options.model;
    const std::string prompt = render_judge_prompt(req.prompt, req.baseline, req.candidate);
    try {
      JudgeResponse r = query(prompt);
      out.verdict = to_outcome_verdict(r.verdict, /*baseline_is_a=*/true);
      out.raw_evidence = std::move(r.raw);
    } catch (const ParseError& e) {
      if (!options.parse_error_as_tie) throw;
      out.verdict = Verdict::Tie;
      out.raw_evidence = e.raw();
    }
    return out;
  }
};

namespace {

// Presents one HttpJudge call per duel to symmetrized_compare.
class SingleCallJudge final : public Judge {
 public:
  using Fn = std::function<ComparisonOutcome(const CompareRequest&)>;
  SingleCallJudge(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  ComparisonOutcome compare(const CompareRequest& req) override { return fn_(req); }

 private:
  std::string id_;
  Fn fn_;
};

}  // namespace

HttpJudge::HttpJudge(HttpJudgeOptions options) {
  options.validate();
  impl_ = std::make_unique<Impl>(std::move(options));
}

HttpJudge::~HttpJudge() = default;

std::string HttpJudge::id() const {
  return "http:" + impl_->options.model + (impl_->options.symmetrize ? "+sym" : "");
}

ComparisonOutcome HttpJudge::compare(const CompareRequest& req) {
  if (!impl_->options.symmetrize) return impl_->compare_once(req);
  SingleCallJudge once(id(), [this](const CompareRequest& r) { return impl_->compare_once(r); });
  ComparisonOutcome out = symmetrized_compare(once, req);
  out.judge_id = id();
  return out;
}

JudgeResponse HttpJudge::query(std::string_view rendered_prompt) {
  return impl_->query(rendered_prompt);
}

HttpJudgeStats HttpJudge::stats() const {
  return {impl_->requests.load(), impl_->retries.load(), impl_->failures.load()};
}

const HttpJudgeOptions& HttpJudge::options() const noexcept { return impl_->options; }

}  // namespace prefopt
