#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "igtkit/remote.hpp"

using namespace igt;

namespace {

// One shared mock endpoint per test binary; routes select the behavior.
struct MockServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> flaky_calls{0};
  std::atomic<int> fail_calls{0};

  MockServer() {
    server.Post("/generate", [](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      REQUIRE(body.contains("inputs"));
      REQUIRE(body["parameters"]["max_new_tokens"].is_number());
      res.set_content(R"([{"generated_text": "X Y"}])", "application/json");
    });
    server.Post("/echo", [](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      nlohmann::json out;
      out["generated_text"] = body["inputs"].get<std::string>() + "when.PAST-speak this\n";
      res.set_content(nlohmann::json::array({out}).dump(), "application/json");
    });
    server.Post("/flaky", [this](const httplib::Request&, httplib::Response& res) {
      if (flaky_calls.fetch_add(1) < 2) {
        res.status = 503;
        res.set_content("busy", "text/plain");
      } else {
        res.set_content(R"({"generated_text": "OK"})", "application/json");
      }
    });
    server.Post("/fail", [this](const httplib::Request&, httplib::Response& res) {
      fail_calls.fetch_add(1);
      res.status = 500;
      res.set_content("boom", "text/plain");
    });
    server.Post("/notfound", [](const httplib::Request&, httplib::Response& res) {
      res.status = 404;
      res.set_content("nothing here", "text/plain");
    });
    server.Post("/malformed", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"unexpected": 1})", "application/json");
    });
    server.Post("/auth", [](const httplib::Request& req, httplib::Response& res) {
      if (req.get_header_value("Authorization") != "Bearer sekret") {
        res.status = 401;
        res.set_content("who are you", "text/plain");
        return;
      }
      res.set_content(R"({"generated_text": "authorized"})", "application/json");
    });
    server.Post("/perid", [](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      std::string prompt = body["inputs"].get<std::string>();
      // prompts carry "Transcription in L: <id>"; answer with GLOSS-<id>
      std::size_t mark = prompt.find(": t");
      nlohmann::json out;
      out["generated_text"] = "GLOSS-" + prompt.substr(mark + 2, 3);
      res.set_content(out.dump(), "application/json");
    });

    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~MockServer() {
    server.stop();
    thread.join();
  }

  RemoteConfig config(const std::string& path) const {
    RemoteConfig c;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port) + path;
    c.timeout_seconds = 5;
    c.backoff_ms = 1;
    return c;
  }
};

MockServer& mock() {
  static MockServer server;
  return server;
}

}  // namespace

TEST_CASE("request_remote_gloss round-trips through a mock endpoint") {
  CHECK(request_remote_gloss(mock().config("/generate"), "any prompt") == "X Y");
}

TEST_CASE("echoed prompts are stripped from the response") {
  std::string prompt = "Provide the glosses.\n\nGlosses: ";
  CHECK(request_remote_gloss(mock().config("/echo"), prompt) == "when.PAST-speak this");
}

TEST_CASE("transient failures are retried with backoff") {
  mock().flaky_calls = 0;
  CHECK(request_remote_gloss(mock().config("/flaky"), "p") == "OK");
  CHECK(mock().flaky_calls.load() == 3);
}

TEST_CASE("persistent server errors surface after retries are exhausted") {
  mock().fail_calls = 0;
  RemoteConfig config = mock().config("/fail");
  config.retries = 2;
  try {
    request_remote_gloss(config, "p");
    FAIL("expected RemoteError");
  } catch (const RemoteError& e) {
    CHECK(e.status == 500);
    CHECK(e.body == "boom");
  }
  CHECK(mock().fail_calls.load() == 3);
}

TEST_CASE("non-transient statuses do not retry") {
  try {
    request_remote_gloss(mock().config("/notfound"), "p");
    FAIL("expected RemoteError");
  } catch (const RemoteError& e) {
    CHECK(e.status == 404);
    CHECK(e.body == "nothing here");
  }
}

TEST_CASE("unparseable responses raise MalformedResponse") {
  CHECK_THROWS_AS(request_remote_gloss(mock().config("/malformed"), "p"), MalformedResponse);
  CHECK(tgi_extract(R"([{"generated_text": "a"}])") == "a");
  CHECK(tgi_extract(R"({"generated_text": "b"})") == "b");
  CHECK_THROWS_AS(tgi_extract("not json"), MalformedResponse);
  CHECK_THROWS_AS(tgi_extract("[]"), MalformedResponse);
  CHECK_THROWS_AS(tgi_extract(R"({"generated_text": 5})"), MalformedResponse);
}

TEST_CASE("unreachable endpoints raise Timeout") {
  RemoteConfig config;
  // RFC 5737 TEST-NET-1 address: connects time out rather than refuse
  config.endpoint = "http://192.0.2.1:9/generate";
  config.timeout_seconds = 1;
  config.retries = 1;
  config.backoff_ms = 1;
  CHECK_THROWS_AS(request_remote_gloss(config, "p"), Error);
}

TEST_CASE("bearer token pass-through") {
  RemoteConfig config = mock().config("/auth");
  CHECK_THROWS_AS(request_remote_gloss(config, "p"), RemoteError);
  config.auth_token = "sekret";
  CHECK(request_remote_gloss(config, "p") == "authorized");
}

TEST_CASE("endpoint URLs must carry a scheme") {
  RemoteConfig config;
  config.endpoint = "127.0.0.1:80/x";
  CHECK_THROWS_AS(request_remote_gloss(config, "p"), Error);
}

TEST_CASE("batch prediction preserves input order under concurrency") {
  std::vector<PromptRecord> records;
  for (int i = 0; i < 24; ++i) {
    PromptRecord rec;
    rec.example_id = "id" + std::to_string(100 + i);
    rec.prompt = "Transcription in L: t" + std::to_string(100 + i).substr(1) + "\nGlosses: ";
    records.push_back(rec);
  }
  RemoteConfig config = mock().config("/perid");
  config.max_in_flight = 6;
  std::vector<Prediction> preds = remote_predict(config, records);
  REQUIRE(preds.size() == records.size());
  for (int i = 0; i < 24; ++i) {
    CHECK(preds[i].example_id == records[i].example_id);
    CHECK(preds[i].gloss == "GLOSS-t" + std::to_string(100 + i).substr(1));
  }
}

TEST_CASE("batch prediction rethrows the first failure by position") {
  std::vector<PromptRecord> records(3);
  records[0] = {"a", "p"};
  records[1] = {"b", "p"};
  records[2] = {"c", "p"};
  RemoteConfig good = mock().config("/generate");
  CHECK(remote_predict(good, records).size() == 3);

  RemoteConfig bad = mock().config("/notfound");
  CHECK_THROWS_AS(remote_predict(bad, records), RemoteError);
  CHECK(remote_predict(bad, {}).empty());
}
