#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <nlohmann/json.hpp>
#include <thread>

#include "graph_anchor/error.hpp"
#include "graph_anchor/llm_client.hpp"

using namespace graph_anchor;
using namespace std::chrono_literals;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

GenerationRequest request(std::string tag = "q:step:1") {
  GenerationRequest r;
  r.prompt = "What is the county seat?";
  r.request_tag = std::move(tag);
  return r;
}

// Minimal chat-completion server on a free local port.
class StubServer {
 public:
  explicit StubServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion(const std::string& content) {
  return Json{{"choices", Json::array({Json{{"message", Json{{"role", "assistant"}, {"content", content}}}}})}}
      .dump();
}

}  // namespace

TEST_CASE("request validation") {
  auto r = request();
  CHECK_NOTHROW(r.validate());
  r.prompt.clear();
  CHECK(code_of([&] { r.validate(); }) == ErrorCode::InvalidConfig);
  r = request();
  r.max_new_tokens = 0;
  CHECK(code_of([&] { r.validate(); }) == ErrorCode::InvalidConfig);
  r = request();
  r.temperature = -0.1;
  CHECK(code_of([&] { r.validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("retry policy delays") {
  RetryPolicy p;
  CHECK(p.delay_for(0) == 1000ms);
  CHECK(p.delay_for(1) == 2000ms);
  CHECK(p.delay_for(2) == 4000ms);
  CHECK(p.delay_for(0) + p.delay_for(1) + p.delay_for(2) <= 7000ms);
}

TEST_CASE("scripted backend") {
  const std::string fixture = "<judgement>sufficient</judgement>\n<think> keep  spacing </think>";
  SUBCASE("replays byte for byte and runs out") {
    ScriptedBackend b({{std::nullopt, fixture}, {std::nullopt, "second"}});
    CHECK(b.generate(request()).text == fixture);
    CHECK(b.generate(request()).text == "second");
    CHECK(code_of([&] { (void)b.generate(request()); }) == ErrorCode::FixtureExhausted);
    CHECK(b.calls() == 3);
    CHECK(b.remaining() == 0);
  }
  SUBCASE("tagged fixtures win and match by prefix") {
    ScriptedBackend b({{std::nullopt, "any"}, {"q:step:2", "two"}, {"q:answer", "ans"}});
    CHECK(b.generate(request("q:answer:retry:1")).text == "ans");
    CHECK(b.generate(request("q:step:2")).text == "two");
    CHECK(b.generate(request("q:step:20")).text == "any");
    CHECK(code_of([&] { (void)b.generate(request("q:step:2")); }) == ErrorCode::FixtureExhausted);
  }
  SUBCASE("deterministic") {
    const auto j = Json::parse(R"([{"text":"a"},{"tag":"x","text":"b"},{"tag":null,"text":"c"}])");
    ScriptedBackend one(ScriptedBackend::fixtures_from_json(j));
    ScriptedBackend two(ScriptedBackend::fixtures_from_json(j));
    for (const auto* tag : {"y", "x", "y"}) {
      CHECK(one.generate(request(tag)).text == two.generate(request(tag)).text);
    }
  }
  SUBCASE("bad fixture files") {
    CHECK(code_of([] { (void)ScriptedBackend::fixtures_from_json(Json::object()); }) ==
          ErrorCode::InvalidConfig);
    CHECK(code_of([] { (void)ScriptedBackend::fixtures_from_json(Json::parse(R"([{"tag":"x"}])")); }) ==
          ErrorCode::InvalidConfig);
    CHECK(code_of([] { (void)ScriptedBackend::load_fixtures("/nonexistent/fixtures.json"); }) ==
          ErrorCode::Io);
  }
}

TEST_CASE("echo backend") {
  EchoBackend echo;
  CHECK(echo.generate(request()).text == std::string(EchoBackend::kResponse));
}

TEST_CASE("http backend") {
  std::vector<std::chrono::milliseconds> slept;
  auto sleeper = [&](std::chrono::milliseconds d) { slept.push_back(d); };

  SUBCASE("extracts the message content and sends the request fields") {
    Json seen;
    std::string auth;
    StubServer server([&](const httplib::Request& req, httplib::Response& res) {
      seen = Json::parse(req.body);
      auth = req.get_header_value("Authorization");
      res.set_content(completion("<answer>Carbon County</answer>"), "application/json");
    });
    HttpChatBackend b({server.endpoint(), "stub-model", "secret", 5000ms, {}}, sleeper);
    auto r = request();
    r.stop_sequences = {"</answer>"};
    r.max_new_tokens = 64;
    const auto out = b.generate(r);
    CHECK(out.text == "<answer>Carbon County</answer>");
    CHECK(out.prompt_token_estimate == 5);
    CHECK(seen["model"] == "stub-model");
    CHECK(seen["messages"][0]["content"] == r.prompt);
    CHECK(seen["max_tokens"] == 64);
    CHECK(seen["stop"][0] == "</answer>");
    CHECK(auth == "Bearer secret");
    CHECK(slept.empty());
  }

  SUBCASE("429 is retried with exponential backoff") {
    std::atomic<int> hits{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
      if (++hits <= 2) {
        res.status = 429;
        res.set_content("slow down", "text/plain");
        return;
      }
      res.set_content(completion("ok"), "application/json");
    });
    HttpChatBackend b({server.endpoint(), "m", "", 5000ms, {}}, sleeper);
    CHECK(b.generate(request()).text == "ok");
    CHECK(hits == 3);
    CHECK(slept == std::vector<std::chrono::milliseconds>{1000ms, 2000ms});
  }

  SUBCASE("persistent 429 gives RateLimited after three retries") {
    std::atomic<int> hits{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
      ++hits;
      res.status = 429;
    });
    HttpChatBackend b({server.endpoint(), "m", "", 5000ms, {}}, sleeper);
    CHECK(code_of([&] { (void)b.generate(request()); }) == ErrorCode::RateLimited);
    CHECK(hits == 4);
    CHECK(slept == std::vector<std::chrono::milliseconds>{1000ms, 2000ms, 4000ms});
  }

  SUBCASE("other statuses and malformed bodies") {
    StubServer server([&](const httplib::Request& req, httplib::Response& res) {
      if (req.body.find("broken") != std::string::npos) {
        res.set_content("{\"choices\": []}", "application/json");
      } else {
        res.status = 500;
        res.set_content(std::string(1000, 'x'), "text/plain");
      }
    });
    HttpChatBackend b({server.endpoint(), "m", "", 5000ms, {}}, sleeper);
    try {
      (void)b.generate(request());
      FAIL("expected RemoteStatus");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RemoteStatus);
      CHECK(std::string(e.what()).size() < 400);
    }
    auto r = request();
    r.prompt = "broken";
    CHECK(code_of([&] { (void)b.generate(r); }) == ErrorCode::RemoteStatus);
    CHECK(slept.empty());
  }

  SUBCASE("transport failure") {
    int port = 0;
    {
      httplib::Server probe;
      port = probe.bind_to_any_port("127.0.0.1");
    }
    HttpChatBackend b({"http://127.0.0.1:" + std::to_string(port) + "/v1", "m", "", 2000ms, {}},
                      sleeper);
    CHECK(code_of([&] { (void)b.generate(request()); }) == ErrorCode::Transport);
  }

  SUBCASE("bad endpoint") {
    CHECK(code_of([] { HttpChatBackend({"", "m", "", 1000ms, {}}); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([] { HttpChatBackend({"ftp://host", "m", "", 1000ms, {}}); }) ==
          ErrorCode::InvalidConfig);
  }
}
