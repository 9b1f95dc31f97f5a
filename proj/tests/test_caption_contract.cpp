#include "doctest.h"

#include <atomic>
#include <cmath>
#include <set>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "etcbound/caption_client.hpp"
#include "helpers.hpp"

using namespace etcbound;
using namespace etcbound::remote;
using nlohmann::json;

namespace {

// In-process stand-in for the caption service: deterministic captions, token
// overlap similarity, and a switch for transient 503 responses.
class StubService {
 public:
  StubService() {
    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(json{{"status", "ok"}, {"model_id", "stub-echo-1"}}.dump(), "application/json");
    });
    server_.Post("/describe", [this](const httplib::Request& req, httplib::Response& res) {
      ++describe_calls;
      if (fail_next > 0) {
        --fail_next;
        res.status = 503;
        res.set_content(R"({"error":"model not loaded"})", "application/json");
        return;
      }
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception&) {
        res.status = 400;
        return;
      }
      if (!body.contains("prompts") || !body["prompts"].is_array() || body["prompts"].empty()) {
        res.status = 400;
        res.set_content(R"({"error":"prompts must be a non-empty list"})", "application/json");
        return;
      }
      const int repeats = body.value("repeats", 1);
      json out = json::array();
      for (int r = 0; r < repeats; ++r) {
        for (std::size_t p = 0; p < body["prompts"].size(); ++p) {
          out.push_back(body.value("video_id", std::string()) + " frame" +
                        std::to_string(body.value("frame_index", 0)) + " view" + std::to_string(p) +
                        (r > 0 ? " again" + std::to_string(r) : ""));
        }
      }
      res.set_content(json{{"descriptions", out}, {"model_id", "stub-echo-1"}, {"latency_ms", 0}}.dump(),
                      "application/json");
    });
    server_.Post("/similarity", [](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception&) {
        res.status = 400;
        return;
      }
      if (!body.contains("candidates") || body["candidates"].empty()) {
        res.status = 400;
        return;
      }
      const auto q = match::tokenize(body.value("query", std::string()));
      const std::set<std::string> qs(q.begin(), q.end());
      json scores = json::array();
      for (const auto& c : body["candidates"]) {
        const auto toks = match::tokenize(c.get<std::string>());
        const std::set<std::string> cs(toks.begin(), toks.end());
        std::size_t inter = 0;
        for (const auto& t : cs) inter += qs.count(t);
        const std::size_t uni = qs.size() + cs.size() - inter;
        scores.push_back(uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni));
      }
      res.set_content(json{{"scores", scores}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubService() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::atomic<int> fail_next{0};
  std::atomic<int> describe_calls{0};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RetryPolicy fast() {
  RetryPolicy p;
  p.initial_backoff = std::chrono::milliseconds(1);
  p.timeout = std::chrono::milliseconds(2000);
  return p;
}

expand::CaptionRequest request(std::size_t n_prompts) {
  expand::CaptionRequest r;
  r.video_id = "v0";
  r.frame_index = 2;
  for (std::size_t i = 0; i < n_prompts; ++i) r.prompts.push_back(expand::default_prompts()[i % 5]);
  return r;
}

}  // namespace

TEST_SUITE("caption_service") {
  TEST_CASE("describe returns one description per prompt") {
    StubService svc;
    HttpCaptionProvider provider(svc.url(), fast());
    auto out = provider.describe(request(5));
    CHECK(out.size() == 5);
    CHECK(out[0].find("frame2") != std::string::npos);
  }

  TEST_CASE("describe is deterministic at temperature zero") {
    StubService svc;
    HttpCaptionProvider provider(svc.url(), fast());
    CHECK(provider.describe(request(5)) == provider.describe(request(5)));
  }

  TEST_CASE("empty prompt list is rejected with 400 and not retried") {
    StubService svc;
    ServiceClient client(svc.url(), fast());
    try {
      (void)client.post_json("/describe", R"({"video_id":"v","frame_index":0,"prompts":[]})");
      FAIL("expected a RemoteError");
    } catch (const RemoteError& e) {
      CHECK(e.status() == 400);
    }
    CHECK(client.last_attempts() == 1);
  }

  TEST_CASE("health check reports the model id") {
    StubService svc;
    HttpCaptionProvider provider(svc.url(), fast());
    CHECK(provider.model_id() == "stub-echo-1");
  }

  TEST_CASE("client retries transient 503 responses") {
    StubService svc;
    HttpCaptionProvider provider(svc.url(), fast());
    svc.fail_next = 2;
    auto out = provider.describe(request(3));
    CHECK(out.size() == 3);
    CHECK(svc.describe_calls == 3);

    ServiceClient client(svc.url(), fast());
    svc.fail_next = 2;
    (void)client.post_json("/describe", json{{"prompts", {"p"}}}.dump());
    CHECK(client.last_attempts() == 3);
  }

  TEST_CASE("client gives up after the attempt budget") {
    StubService svc;
    ServiceClient client(svc.url(), fast());
    svc.fail_next = 100;
    try {
      (void)client.post_json("/describe", json{{"prompts", {"p"}}}.dump());
      FAIL("expected a RemoteError");
    } catch (const RemoteError& e) {
      CHECK(e.status() == 503);
      CHECK(std::string(e.what()).find("4 attempts") != std::string::npos);
    }
    CHECK(client.last_attempts() == 4);
  }

  TEST_CASE("unreachable service is a transport failure") {
    int port = 0;
    {
      StubService svc;
      port = std::stoi(svc.url().substr(svc.url().rfind(':') + 1));
    }
    RetryPolicy p = fast();
    p.max_attempts = 2;
    ServiceClient client("http://127.0.0.1:" + std::to_string(port), p);
    try {
      (void)client.get("/healthz");
      FAIL("expected a RemoteError");
    } catch (const RemoteError& e) {
      CHECK(e.status() == -1);
    }
    CHECK(client.last_attempts() == 2);
  }

  TEST_CASE("similarity returns one finite score per candidate") {
    StubService svc;
    HttpSimilarityScorer scorer(svc.url(), fast());
    const std::vector<std::string> cands = {"a dog runs", "the cat sleeps", "a man opens the door"};
    auto scores = scorer.similarity("a man opens the door", cands);
    REQUIRE(scores.size() == cands.size());
    CHECK(std::max_element(scores.begin(), scores.end()) - scores.begin() == 2);
    CHECK_THROWS_AS(scorer.similarity("q", {}), ConfigError);
  }

  TEST_CASE("similarity scores stay finite on random strings") {
    StubService svc;
    HttpSimilarityScorer scorer(svc.url(), fast());
    Rng rng(71);
    std::vector<std::string> cands;
    for (int i = 0; i < 1000; ++i) {
      std::string s;
      const std::size_t n = uniform_index(rng, 12);
      for (std::size_t k = 0; k < n; ++k) s.push_back(static_cast<char>('a' + uniform_index(rng, 5)) );
      if (uniform01(rng) < 0.3) s += " " + s;
      cands.push_back(s);
    }
    auto scores = scorer.similarity("ab cd e", cands);
    REQUIRE(scores.size() == 1000);
    for (double v : scores) CHECK(std::isfinite(v));
  }

  TEST_CASE("dictionary build through the HTTP provider") {
    StubService svc;
    HttpCaptionProvider provider(svc.url(), fast());
    Rng rng(72);
    Dataset ds;
    ds.instances.push_back(testutil::random_instance(rng, 4, 3, "v0"));
    ds.instances.push_back(testutil::random_instance(rng, 4, 3, "v1"));
    expand::ExpansionConfig cfg;
    cfg.max_in_flight = 4;
    auto dict = expand::build_dictionary(ds, provider, cfg);
    CHECK(dict.num_descriptions() == 40);
    CHECK(dict.at("v1", 3)[4].text == "v1 frame3 view4");
  }

  TEST_CASE("remote QDM is normalized locally") {
    StubService svc;
    HttpSimilarityScorer scorer(svc.url(), fast());
    DescriptionDict dict;
    dict.set("v", 0, {{0, "nothing here"}, {1, "still nothing"}});
    dict.set("v", 1, {{0, "open door"}, {1, "a man"}});
    dict.set("v", 2, {{0, "man opens"}, {1, "door"}});
    const std::vector<std::string> q = {"open", "door"};
    auto s = remote_qdm_scores(q, dict, "v", 3, scorer);
    CHECK(s.scores == std::vector<double>{0.0, 1.0, 0.5});
  }
}
