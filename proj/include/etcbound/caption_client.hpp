#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "etcbound/expand.hpp"
#include "etcbound/matchers.hpp"

namespace etcbound::remote {

// Retries on 503 and transport failures; other HTTP errors fail immediately.
struct RetryPolicy {
  std::size_t max_attempts = 4;
  std::chrono::milliseconds initial_backoff{50};
  double multiplier = 2.0;
  std::chrono::milliseconds timeout{10000};
};

class RemoteError : public DataError {
 public:
  RemoteError(const std::string& message, int status) : DataError(message), status_(status) {}
  // HTTP status, or -1 for a transport failure.
  int status() const { return status_; }

 private:
  int status_;
};

// Thin JSON-over-HTTP client; one instance per base URL ("http://host:port").
class ServiceClient {
 public:
  explicit ServiceClient(std::string base_url, RetryPolicy policy = {});
  ~ServiceClient();
  ServiceClient(const ServiceClient&) = delete;
  ServiceClient& operator=(const ServiceClient&) = delete;

  // POST body as JSON text; returns the response body. Throws RemoteError.
  std::string post_json(const std::string& path, const std::string& body) const;
  std::string get(const std::string& path) const;

  // Attempts made by the most recent call (for diagnostics and tests).
  std::size_t last_attempts() const { return last_attempts_; }
  const RetryPolicy& policy() const { return policy_; }

 private:
  std::string host_;
  std::string prefix_;
  RetryPolicy policy_;
  mutable std::size_t last_attempts_ = 0;
};

// CaptionProvider backed by POST /describe.
class HttpCaptionProvider : public expand::CaptionProvider {
 public:
  explicit HttpCaptionProvider(std::string base_url, RetryPolicy policy = {});
  std::vector<std::string> describe(const expand::CaptionRequest& request) const override;
  std::string model_id() const;  // from GET /healthz

 private:
  ServiceClient client_;
};

// Raw sentence similarities from POST /similarity.
class HttpSimilarityScorer {
 public:
  explicit HttpSimilarityScorer(std::string base_url, RetryPolicy policy = {});
  std::vector<double> similarity(const std::string& query, const std::vector<std::string>& candidates) const;

 private:
  ServiceClient client_;
};

// QDM through the remote scorer: per-frame aggregation of the returned raw
// scores, then local min-max normalization.
FrameScoreSequence remote_qdm_scores(std::span<const std::string> query_tokens, const DescriptionDict& dict,
                                     const std::string& video_id, std::size_t num_frames,
                                     const HttpSimilarityScorer& scorer,
                                     match::DescriptionAggregation aggregation = match::DescriptionAggregation::Max);

}  // namespace etcbound::remote
