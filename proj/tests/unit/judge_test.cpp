#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <doctest.h>
#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dgeval/judge.hpp"
#include "dgeval/prompts.hpp"
#include "support/scripted_judge.hpp"

using namespace dgeval;
using nlohmann::json;
using testsupport::ScriptedBackend;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  TempDir() {
    std::mt19937_64 rng(std::random_device{}());
    dir = fs::temp_directory_path() / fmt::format("dgeval_judge_{:x}", rng());
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  fs::path dir;
};

JudgeRequest sample_request() {
  JudgeRequest req;
  req.template_name = "quality";
  req.bindings = {{"fact", "Apply urea at 60 kg/ha"}};
  req.prompt = "rendered prompt";
  req.model = "judge-1";
  req.temperature = 0.0;
  req.max_tokens = 512;
  return req;
}

}  // namespace

TEST_CASE("fixture keys hash the request identity, not the prompt text") {
  JudgeRequest req = sample_request();
  std::string key = FixtureStore::key_of(req);
  CHECK(key.size() == 16);
  CHECK(key == FixtureStore::key_of(req));

  JudgeRequest other_prompt = req;
  other_prompt.prompt = "different rendering";
  CHECK(FixtureStore::key_of(other_prompt) == key);

  JudgeRequest other_binding = req;
  other_binding.bindings["fact"] = "Apply urea at 80 kg/ha";
  CHECK(FixtureStore::key_of(other_binding) != key);

  JudgeRequest retry = req;
  retry.bindings["_attempt"] = "reformat";
  CHECK(FixtureStore::key_of(retry) != key);

  JudgeRequest other_temp = req;
  other_temp.temperature = 0.7;
  CHECK(FixtureStore::key_of(other_temp) != key);

  JudgeRequest other_template = req;
  other_template.template_name = "fact_matching";
  CHECK(FixtureStore::key_of(other_template) != key);
}

TEST_CASE("fixture store puts, gets, and digests recorded responses") {
  TempDir tmp;
  FixtureStore store(tmp.dir);
  CHECK(store.digest() == "empty");

  JudgeRequest req = sample_request();
  std::string key = FixtureStore::key_of(req);
  CHECK_FALSE(store.get("quality", key).has_value());

  store.put(req, key, "raw model text");
  auto hit = store.get("quality", key);
  REQUIRE(hit.has_value());
  CHECK(*hit == "raw model text");
  CHECK(fs::exists(tmp.dir / fmt::format("quality_{}.json", key)));

  std::string digest = store.digest();
  CHECK(digest != "empty");
  CHECK(digest.size() == 16);

  // A second fixture moves the digest; identical re-put does not.
  store.put(req, key, "raw model text");
  CHECK(store.digest() == digest);
  JudgeRequest other = sample_request();
  other.bindings["fact"] = "changed";
  store.put(other, FixtureStore::key_of(other), "other text");
  CHECK(store.digest() != digest);

  SUBCASE("corrupt fixture files are reported") {
    std::ofstream out(tmp.dir / "quality_deadbeefdeadbeef.json", std::ios::trunc);
    out << "{ not json";
    out.close();
    CHECK_THROWS_AS(store.get("quality", "deadbeefdeadbeef"), ValidationError);
  }
}

TEST_CASE("judge constructor checks mode requirements") {
  CHECK_THROWS_AS(
      [] {
        JudgeConfig c;
        c.mode = JudgeMode::Replay;  // no fixtures_dir
        Judge j(c);
      }(),
      ValidationError);

  CHECK_THROWS_AS(
      [] {
        JudgeConfig c;
        c.mode = JudgeMode::Live;  // no endpoint, no injected backend
        Judge j(c);
      }(),
      ValidationError);

  CHECK_THROWS_WITH_AS(
      [] {
        JudgeConfig c;
        c.mode = JudgeMode::Live;
        c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
        c.api_key_env = "DGEVAL_SURELY_UNSET_KEY";
        Judge j(c);
      }(),
      doctest::Contains("DGEVAL_SURELY_UNSET_KEY"), ValidationError);

  CHECK_THROWS_AS(
      [] {
        JudgeConfig c;
        c.mode = JudgeMode::Live;
        c.max_in_flight = 0;
        Judge j(c, std::make_unique<ScriptedBackend>());
      }(),
      ValidationError);

  // Live with an injected backend needs neither endpoint nor credential.
  JudgeConfig c;
  c.mode = JudgeMode::Live;
  Judge j(c, std::make_unique<ScriptedBackend>());
  CHECK(j.fixture_digest() == "live");
}

TEST_CASE("record then replay round-trips a call without a backend") {
  TempDir tmp;
  JudgeConfig config;
  config.model = "scripted-judge";
  config.mode = JudgeMode::Record;
  config.fixtures_dir = tmp.dir;

  const PromptTemplate& tpl = get_template(TemplateId::Quality);
  std::map<std::string, std::string> bindings{{"fact", testsupport::kDoseGolden}};

  JudgeResponse recorded;
  {
    Judge recorder(config, std::make_unique<ScriptedBackend>());
    recorded = recorder.complete(tpl, bindings);
    CHECK(recorder.fixture_digest() != "empty");
  }

  config.mode = JudgeMode::Replay;
  Judge replayer(config);
  JudgeResponse replayed = replayer.complete(tpl, bindings);
  CHECK(replayed.raw == recorded.raw);
  CHECK(replayed.data == recorded.data);

  // A request that was never recorded misses with its key attached.
  std::map<std::string, std::string> unseen{{"fact", "never recorded"}};
  JudgeRequest expected;
  expected.template_name = tpl.name;
  expected.bindings = unseen;
  expected.model = config.model;
  expected.temperature = config.temperature;
  expected.max_tokens = config.max_tokens;
  try {
    replayer.complete(tpl, unseen);
    FAIL("expected ReplayMissError");
  } catch (const ReplayMissError& e) {
    CHECK(e.key() == FixtureStore::key_of(expected));
  }
}

TEST_CASE("schema garbage triggers exactly one reformat retry") {
  ScriptedBackend::Options opts;
  opts.garbage_until_reformat = {"quality"};
  auto backend = std::make_unique<ScriptedBackend>(opts);
  ScriptedBackend* raw = backend.get();

  JudgeConfig config;
  config.mode = JudgeMode::Live;
  Judge judge(config, std::move(backend));

  JudgeResponse resp =
      judge.complete(get_template(TemplateId::Quality), {{"fact", "Apply urea at 60 kg/ha"}});
  CHECK(raw->calls() == 2);
  CHECK(resp.data.contains("confidence"));
}

TEST_CASE("reformat retries are recorded and replayable") {
  TempDir tmp;
  ScriptedBackend::Options opts;
  opts.garbage_until_reformat = {"quality"};

  JudgeConfig config;
  config.model = "scripted-judge";
  config.mode = JudgeMode::Record;
  config.fixtures_dir = tmp.dir;
  JudgeResponse recorded;
  {
    Judge recorder(config, std::make_unique<ScriptedBackend>(opts));
    recorded = recorder.complete(get_template(TemplateId::Quality), {{"fact", "some fact"}});
  }

  // Both the garbage first attempt and the reformat answer are on disk.
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(tmp.dir)) {
    if (e.is_regular_file()) ++files;
  }
  CHECK(files == 2);

  config.mode = JudgeMode::Replay;
  Judge replayer(config);
  JudgeResponse replayed =
      replayer.complete(get_template(TemplateId::Quality), {{"fact", "some fact"}});
  CHECK(replayed.raw == recorded.raw);
}

TEST_CASE("persistent garbage surfaces as SchemaError with the raw text") {
  ScriptedBackend::Options opts;
  opts.garbage_templates = {"quality"};
  auto backend = std::make_unique<ScriptedBackend>(opts);
  ScriptedBackend* raw = backend.get();

  JudgeConfig config;
  config.mode = JudgeMode::Live;
  Judge judge(config, std::move(backend));

  try {
    judge.complete(get_template(TemplateId::Quality), {{"fact", "x"}});
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.raw_output() == "this is not json");
  }
  CHECK(raw->calls() == 2);  // original + one reformat attempt
}

TEST_CASE("transport failures pass through without a reformat retry") {
  ScriptedBackend::Options opts;
  opts.transport_fail_templates = {"quality"};
  auto backend = std::make_unique<ScriptedBackend>(opts);
  ScriptedBackend* raw = backend.get();

  JudgeConfig config;
  config.mode = JudgeMode::Live;
  Judge judge(config, std::move(backend));

  CHECK_THROWS_AS(judge.complete(get_template(TemplateId::Quality), {{"fact", "x"}}),
                  TransportError);
  CHECK(raw->calls() == 1);
}

namespace {

// Echoes the fact binding back as the subject, tracking in-flight concurrency.
class EchoBackend final : public JudgeBackend {
 public:
  std::string complete(const JudgeRequest& request) override {
    int now = in_flight_.fetch_add(1) + 1;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    in_flight_.fetch_sub(1);

    const std::string& fact = request.bindings.at("fact");
    if (fact == "boom") throw TransportError("backend exploded");
    if (fact == "mangled") return "<<< not json >>>";
    nlohmann::json out{
        {"subject", fact}, {"attribute", "a"}, {"timing", ""}, {"method", ""}};
    return out.dump();
  }

  int peak() const { return peak_.load(); }

 private:
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
};

}  // namespace

TEST_CASE("complete_many bounds concurrency and keeps input order") {
  auto backend = std::make_unique<EchoBackend>();
  EchoBackend* raw = backend.get();

  JudgeConfig config;
  config.mode = JudgeMode::Live;
  config.max_in_flight = 3;
  Judge judge(config, std::move(backend));

  std::vector<std::map<std::string, std::string>> bindings;
  for (int i = 0; i < 24; ++i) {
    std::string fact = fmt::format("fact-{}", i);
    if (i == 5) fact = "boom";
    if (i == 11) fact = "mangled";
    bindings.push_back({{"fact", fact}});
  }

  auto results = judge.complete_many(get_template(TemplateId::Contradiction), bindings);
  REQUIRE(results.size() == bindings.size());
  CHECK(raw->peak() <= 3);
  CHECK(raw->peak() >= 2);  // the pool actually ran in parallel

  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i == 5) {
      CHECK_FALSE(results[i].response.has_value());
      CHECK(results[i].transport);
      CHECK_FALSE(results[i].error.empty());
    } else if (i == 11) {
      CHECK_FALSE(results[i].response.has_value());
      CHECK_FALSE(results[i].transport);
      CHECK_FALSE(results[i].error.empty());
    } else {
      REQUIRE(results[i].response.has_value());
      CHECK(results[i].response->data.at("subject") == fmt::format("fact-{}", i));
    }
  }

  CHECK(judge.complete_many(get_template(TemplateId::Contradiction), {}).empty());
}

TEST_CASE("parse_judge_output validates the facts_list schema") {
  const PromptTemplate& tpl = get_template(TemplateId::FactGeneration);

  json data = parse_judge_output(
      tpl, R"(Sure! {"facts":[{"text":"  Apply urea  ","confidence":0.8}]} done)", {});
  REQUIRE(data.at("facts").size() == 1);
  CHECK(data["facts"][0]["text"] == "Apply urea");
  CHECK(data["facts"][0]["confidence"] == 0.8);

  CHECK(parse_judge_output(tpl, R"({"facts":[]})", {}).at("facts").empty());

  CHECK_THROWS_AS(parse_judge_output(tpl, R"({"claims":[]})", {}), SchemaError);
  CHECK_THROWS_AS(parse_judge_output(tpl, R"({"facts":{}})", {}), SchemaError);
  CHECK_THROWS_AS(
      parse_judge_output(tpl, R"({"facts":[{"text":"   ","confidence":0.8}]})", {}),
      SchemaError);
  CHECK_THROWS_AS(
      parse_judge_output(tpl, R"({"facts":[{"text":"x","confidence":1.4}]})", {}),
      SchemaError);
  CHECK_THROWS_AS(parse_judge_output(tpl, "no braces at all", {}), SchemaError);
}

TEST_CASE("parse_judge_output verifies anchor evidence verbatim") {
  const PromptTemplate& tpl = get_template(TemplateId::Specificity);
  std::map<std::string, std::string> bindings{
      {"query", "q"}, {"response", "Apply urea at 60 kg/ha in Patna"}};

  json good{{"flags",
             {{"entity", true},
              {"location", true},
              {"time", false},
              {"quantity", true},
              {"conditional", false},
              {"mechanistic", false},
              {"actionable", true}}},
            {"evidence",
             {{"entity", json::array({"urea"})},
              {"location", json::array({"Patna"})},
              {"quantity", json::array({"60 kg/ha"})},
              {"actionable", json::array({"Apply urea"})},
              {"time", json::array({"stale evidence for a false flag"})}}}};

  json data = parse_judge_output(tpl, good.dump(), bindings);
  CHECK(data["flags"]["entity"] == true);
  CHECK(data["evidence"]["location"][0] == "Patna");
  // Evidence attached to a false flag is dropped, not rejected.
  CHECK_FALSE(data["evidence"].contains("time"));

  SUBCASE("span must be a verbatim substring") {
    json bad = good;
    bad["evidence"]["entity"] = json::array({"urea pellets"});
    CHECK_THROWS_WITH_AS(parse_judge_output(tpl, bad.dump(), bindings),
                         doctest::Contains("verbatim"), SchemaError);
  }
  SUBCASE("true flag needs at least one span") {
    json bad = good;
    bad["evidence"].erase("quantity");
    CHECK_THROWS_AS(parse_judge_output(tpl, bad.dump(), bindings), SchemaError);
  }
  SUBCASE("empty spans are rejected") {
    json bad = good;
    bad["evidence"]["entity"] = json::array({""});
    CHECK_THROWS_AS(parse_judge_output(tpl, bad.dump(), bindings), SchemaError);
  }
  SUBCASE("all seven flags are required") {
    json bad = good;
    bad["flags"].erase("mechanistic");
    CHECK_THROWS_AS(parse_judge_output(tpl, bad.dump(), bindings), SchemaError);
  }
}

TEST_CASE("parse_judge_output validates the remaining schemas") {
  SUBCASE("match") {
    const PromptTemplate& tpl = get_template(TemplateId::FactMatching);
    json data = parse_judge_output(
        tpl, R"({"match":true,"confidence":0.9,"rationale":"same dose"})", {});
    CHECK(data["match"] == true);
    CHECK(data["rationale"] == "same dose");
    CHECK_FALSE(parse_judge_output(tpl, R"({"match":false,"confidence":0.2})", {})
                    .contains("rationale"));
    CHECK_THROWS_AS(parse_judge_output(tpl, R"({"confidence":0.9})", {}), SchemaError);
    CHECK_THROWS_AS(parse_judge_output(tpl, R"({"match":"yes","confidence":0.9})", {}),
                    SchemaError);
  }

  SUBCASE("components allow empty slots but not missing ones") {
    const PromptTemplate& tpl = get_template(TemplateId::Contradiction);
    json data = parse_judge_output(
        tpl, R"({"subject":"urea","attribute":"dose","timing":"","method":""})", {});
    CHECK(data["timing"] == "");
    CHECK_THROWS_AS(
        parse_judge_output(tpl, R"({"subject":"urea","attribute":"dose","timing":""})", {}),
        SchemaError);
  }

  SUBCASE("relevance dims are bounded integers") {
    const PromptTemplate& tpl = get_template(TemplateId::Relevance);
    json good{{"dims",
               {{"direct_relevance", 9},
                {"ground_truth_consistency", 10},
                {"practical_implementation", 9},
                {"specificity", 8},
                {"agricultural_soundness", 10}}},
              {"gaps", json::array({"storage advice"})},
              {"farmer_applicability", "usable"}};
    json data = parse_judge_output(tpl, good.dump(), {});
    CHECK(data["dims"]["specificity"] == 8);
    CHECK(data["gaps"][0] == "storage advice");

    json bad = good;
    bad["dims"]["specificity"] = 11;
    CHECK_THROWS_AS(parse_judge_output(tpl, bad.dump(), {}), SchemaError);
    bad["dims"]["specificity"] = 7.5;
    CHECK_THROWS_AS(parse_judge_output(tpl, bad.dump(), {}), SchemaError);
    bad = good;
    bad["gaps"] = "not a list";
    CHECK_THROWS_AS(parse_judge_output(tpl, bad.dump(), {}), SchemaError);
    bad = good;
    bad.erase("farmer_applicability");
    CHECK(parse_judge_output(tpl, bad.dump(), {})["farmer_applicability"] == "");
  }

  SUBCASE("conversationality dims with optional rationales") {
    const PromptTemplate& tpl = get_template(TemplateId::Conversationality);
    json good{{"dims",
               {{"content_quality", 5},
                {"communication_style", 4},
                {"practical_advice", 4},
                {"safety_credibility", 5},
                {"conversation_flow", 4},
                {"response_format", 5}}},
              {"rationales", {{"content_quality", "covers the dose"}}}};
    json data = parse_judge_output(tpl, good.dump(), {});
    CHECK(data["dims"]["conversation_flow"] == 4);
    CHECK(data["rationales"]["content_quality"] == "covers the dose");

    json bad = good;
    bad["dims"].erase("response_format");
    CHECK_THROWS_AS(parse_judge_output(tpl, bad.dump(), {}), SchemaError);
    bad = good;
    bad["dims"]["content_quality"] = 6;
    CHECK_THROWS_AS(parse_judge_output(tpl, bad.dump(), {}), SchemaError);
  }

  SUBCASE("quality triple") {
    const PromptTemplate& tpl = get_template(TemplateId::Quality);
    json data = parse_judge_output(
        tpl, R"({"confidence":0.9,"completeness":0.8,"actionability":0.7})", {});
    CHECK(data["actionability"] == 0.7);
    CHECK_THROWS_AS(
        parse_judge_output(tpl, R"({"confidence":0.9,"completeness":0.8})", {}), SchemaError);
  }

  SUBCASE("stitching text is trimmed raw output") {
    const PromptTemplate& tpl = get_template(TemplateId::Stitching);
    json data = parse_judge_output(tpl, "  Namaste! Here is the advice.  \n", {});
    CHECK(data["text"] == "Namaste! Here is the advice.");
    CHECK_THROWS_AS(parse_judge_output(tpl, "   \n  ", {}), SchemaError);
  }
}

TEST_CASE("http backend retries throttling and reports the payload") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_auth;
  json seen_body;
  server.Post("/v1/chat/completions",
              [&](const httplib::Request& req, httplib::Response& res) {
                int n = ++hits;
                seen_auth = req.get_header_value("Authorization");
                seen_body = json::parse(req.body);
                if (n == 1) {
                  res.status = 429;
                  return;
                }
                json reply{{"choices",
                            json::array({json{{"message", json{{"content", "pong"}}}}})}};
                res.set_content(reply.dump(), "application/json");
              });
  server.Post("/reject", [](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
  });
  server.Post("/malformed", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "application/json");
  });

  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread serve([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  JudgeRequest req = sample_request();
  req.prompt = "ping";

  {
    HttpBackend backend(fmt::format("http://127.0.0.1:{}", port), "sekrit",
                        /*max_retries=*/2, /*base_backoff_ms=*/1);
    CHECK(backend.complete(req) == "pong");
    CHECK(hits.load() == 2);  // one throttle, one success
    CHECK(seen_auth == "Bearer sekrit");
    CHECK(seen_body.at("model") == req.model);
    CHECK(seen_body.at("max_tokens") == req.max_tokens);
    CHECK(seen_body.at("messages")[0]["content"] == "ping");
  }

  {
    HttpBackend backend(fmt::format("http://127.0.0.1:{}/reject", port), "sekrit", 2, 1);
    CHECK_THROWS_WITH_AS(backend.complete(req), doctest::Contains("400"), TransportError);
  }

  {
    HttpBackend backend(fmt::format("http://127.0.0.1:{}/malformed", port), "sekrit", 2, 1);
    CHECK_THROWS_WITH_AS(backend.complete(req), doctest::Contains("malformed"),
                         TransportError);
  }

  server.stop();
  serve.join();

  // With the server gone every attempt is a connection failure.
  HttpBackend backend(fmt::format("http://127.0.0.1:{}", port), "sekrit", 1, 1);
  CHECK_THROWS_WITH_AS(backend.complete(req), doctest::Contains("connection failure"),
                       TransportError);

  CHECK_THROWS_AS(HttpBackend("127.0.0.1:8080", "k", 1), ValidationError);
}
