#include "etcbound/caption_client.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace etcbound::remote {

using nlohmann::json;

ServiceClient::ServiceClient(std::string base_url, RetryPolicy policy) : policy_(policy) {
  if (policy_.max_attempts < 1) throw ConfigError("retry policy needs at least one attempt");
  const auto scheme = base_url.find("://");
  const auto path_start = base_url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    host_ = base_url;
  } else {
    host_ = base_url.substr(0, path_start);
    prefix_ = base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }
  if (host_.empty()) throw ConfigError("empty service URL");
}

ServiceClient::~ServiceClient() = default;

namespace {

template <typename Call>
std::string with_retries(const RetryPolicy& policy, std::size_t& attempts, const std::string& what, Call&& call) {
  auto backoff = policy.initial_backoff;
  int last_status = -1;
  std::string last_error;
  for (attempts = 1;; ++attempts) {
    httplib::Result res = call();
    if (res) {
      last_status = res->status;
      if (res->status >= 200 && res->status < 300) return res->body;
      last_error = what + " returned HTTP " + std::to_string(res->status) + ": " + res->body;
      if (res->status != 503) throw RemoteError(last_error, res->status);
    } else {
      last_status = -1;
      last_error = what + " transport failure: " + httplib::to_string(res.error());
    }
    if (attempts >= policy.max_attempts) break;
    std::this_thread::sleep_for(backoff);
    backoff = std::chrono::milliseconds(
        static_cast<long long>(std::llround(static_cast<double>(backoff.count()) * policy.multiplier)));
  }
  throw RemoteError(last_error + " (after " + std::to_string(attempts) + " attempts)", last_status);
}

httplib::Client make_client(const std::string& host, const RetryPolicy& policy) {
  httplib::Client cli(host);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(policy.timeout).count();
  cli.set_connection_timeout(static_cast<time_t>(std::max<long long>(1, secs)), 0);
  cli.set_read_timeout(static_cast<time_t>(std::max<long long>(1, secs)), 0);
  return cli;
}

}  // namespace

std::string ServiceClient::post_json(const std::string& path, const std::string& body) const {
  auto cli = make_client(host_, policy_);
  const std::string full = prefix_ + path;
  return with_retries(policy_, last_attempts_, "POST " + full,
                      [&]() { return cli.Post(full, body, "application/json"); });
}

std::string ServiceClient::get(const std::string& path) const {
  auto cli = make_client(host_, policy_);
  const std::string full = prefix_ + path;
  return with_retries(policy_, last_attempts_, "GET " + full, [&]() { return cli.Get(full); });
}

HttpCaptionProvider::HttpCaptionProvider(std::string base_url, RetryPolicy policy)
    : client_(std::move(base_url), policy) {}

std::vector<std::string> HttpCaptionProvider::describe(const expand::CaptionRequest& request) const {
  json body;
  body["video_id"] = request.video_id;
  body["frame_index"] = request.frame_index;
  body["features"] = std::vector<double>(request.frame_features.begin(), request.frame_features.end());
  body["prompts"] = request.prompts;
  body["repeats"] = 1;
  body["temperature"] = 0.0;
  const auto text = client_.post_json("/describe", body.dump());
  try {
    const auto j = json::parse(text);
    auto descriptions = j.at("descriptions").get<std::vector<std::string>>();
    if (descriptions.size() != request.prompts.size()) {
      throw RemoteError("/describe returned " + std::to_string(descriptions.size()) + " descriptions for " +
                            std::to_string(request.prompts.size()) + " prompts",
                        200);
    }
    if (j.value("model_id", std::string{}).empty()) throw RemoteError("/describe response lacks model_id", 200);
    return descriptions;
  } catch (const json::exception& e) {
    throw RemoteError(std::string("malformed /describe response: ") + e.what(), 200);
  }
}

std::string HttpCaptionProvider::model_id() const {
  try {
    return json::parse(client_.get("/healthz")).at("model_id").get<std::string>();
  } catch (const json::exception& e) {
    throw RemoteError(std::string("malformed /healthz response: ") + e.what(), 200);
  }
}

HttpSimilarityScorer::HttpSimilarityScorer(std::string base_url, RetryPolicy policy)
    : client_(std::move(base_url), policy) {}

std::vector<double> HttpSimilarityScorer::similarity(const std::string& query,
                                                     const std::vector<std::string>& candidates) const {
  if (candidates.empty()) throw ConfigError("similarity request needs at least one candidate");
  const json body = {{"query", query}, {"candidates", candidates}};
  const auto text = client_.post_json("/similarity", body.dump());
  std::vector<double> scores;
  try {
    scores = json::parse(text).at("scores").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw RemoteError(std::string("malformed /similarity response: ") + e.what(), 200);
  }
  if (scores.size() != candidates.size()) {
    throw RemoteError("/similarity returned " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(candidates.size()) + " candidates",
                      200);
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw RemoteError("/similarity returned a non-finite score", 200);
  }
  return scores;
}

FrameScoreSequence remote_qdm_scores(std::span<const std::string> query_tokens, const DescriptionDict& dict,
                                     const std::string& video_id, std::size_t num_frames,
                                     const HttpSimilarityScorer& scorer,
                                     match::DescriptionAggregation aggregation) {
  const std::string query = match::join_tokens(query_tokens);
  std::vector<double> raw(num_frames);
  for (std::size_t f = 0; f < num_frames; ++f) {
    std::vector<std::string> texts;
    for (const auto& d : dict.at(video_id, f)) texts.push_back(d.text);
    const auto scores = scorer.similarity(query, texts);
    if (aggregation == match::DescriptionAggregation::Max) {
      raw[f] = *std::max_element(scores.begin(), scores.end());
    } else {
      double s = 0.0;
      for (double x : scores) s += x;
      raw[f] = s / static_cast<double>(scores.size());
    }
  }
  return {match::minmax_normalize(raw), ScoreKind::QDM};
}

}  // namespace etcbound::remote
