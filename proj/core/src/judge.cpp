#include "dgeval/judge.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "dgeval/fact_model.hpp"

namespace dgeval {

using json = nlohmann::json;

// ===== Mode names =====

std::string_view to_string(JudgeMode m) {
  switch (m) {
    case JudgeMode::Live: return "live";
    case JudgeMode::Record: return "record";
    case JudgeMode::Replay: return "replay";
  }
  return "replay";
}

JudgeMode judge_mode_from_string(std::string_view s) {
  if (s == "live") return JudgeMode::Live;
  if (s == "record") return JudgeMode::Record;
  if (s == "replay") return JudgeMode::Replay;
  throw ValidationError(fmt::format("unknown judge mode '{}'", s));
}

// ===== Hashing =====

namespace {

std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

// ===== FixtureStore =====

FixtureStore::FixtureStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (dir_.empty()) throw ValidationError("fixture store needs a directory");
  std::filesystem::create_directories(dir_);
}

std::string FixtureStore::key_of(const JudgeRequest& request) {
  json canonical{{"template", request.template_name},
                 {"bindings", request.bindings},
                 {"model", request.model},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_tokens}};
  return fmt::format("{:016x}", fnv1a64(canonical.dump()));
}

std::filesystem::path FixtureStore::file_for(const std::string& template_name,
                                             const std::string& key) const {
  return dir_ / fmt::format("{}_{}.json", template_name, key);
}

std::optional<std::string> FixtureStore::get(const std::string& template_name,
                                             const std::string& key) const {
  std::ifstream in(file_for(template_name, key));
  if (!in) return std::nullopt;
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("response")) {
    throw ValidationError(
        fmt::format("corrupt fixture file for {} key {}", template_name, key));
  }
  return j.at("response").get<std::string>();
}

void FixtureStore::put(const JudgeRequest& request, const std::string& key,
                       const std::string& response) {
  json j{{"key",
          {{"template", request.template_name},
           {"bindings", request.bindings},
           {"model", request.model},
           {"temperature", request.temperature},
           {"max_tokens", request.max_tokens}}},
         {"response", response}};
  std::lock_guard<std::mutex> lock(write_mutex_);
  auto target = file_for(request.template_name, key);
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw ValidationError(fmt::format("cannot write fixture '{}'", tmp.string()));
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, target);
}

std::string FixtureStore::digest() const {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::exists(dir_)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
  }
  if (files.empty()) return "empty";
  std::sort(files.begin(), files.end());
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& f : files) {
    h = fnv1a64(f.filename().string(), h);
    std::ifstream in(f, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    h = fnv1a64(buf.str(), h);
  }
  return fmt::format("{:016x}", h);
}

// ===== Output schema validation =====

namespace {

json extract_json(const std::string& raw) {
  std::size_t start = raw.find_first_of("{[");
  std::size_t end = raw.find_last_of("}]");
  if (start == std::string::npos || end == std::string::npos || end <= start) {
    throw ValidationError("no JSON object in model output");
  }
  return json::parse(raw.substr(start, end - start + 1));
}

double need_number(const json& j, const char* key, double lo, double hi) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ValidationError(fmt::format("missing numeric field '{}'", key));
  }
  double v = j.at(key).get<double>();
  if (v < lo || v > hi) {
    throw ValidationError(fmt::format("field '{}' value {} outside [{}, {}]", key, v, lo, hi));
  }
  return v;
}

int need_int(const json& j, const std::string& key, int lo, int hi) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ValidationError(fmt::format("missing integer field '{}'", key));
  }
  double v = j.at(key).get<double>();
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v || i < lo || i > hi) {
    throw ValidationError(
        fmt::format("field '{}' value {} is not an integer in [{}, {}]", key, v, lo, hi));
  }
  return i;
}

std::string need_string(const json& j, const char* key, bool allow_empty) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ValidationError(fmt::format("missing string field '{}'", key));
  }
  auto s = j.at(key).get<std::string>();
  if (!allow_empty && s.empty()) {
    throw ValidationError(fmt::format("field '{}' must be non-empty", key));
  }
  return s;
}

std::string trim_copy(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

json validate_facts_list(const json& data) {
  if (!data.contains("facts") || !data.at("facts").is_array()) {
    throw ValidationError("missing 'facts' array");
  }
  json out = json{{"facts", json::array()}};
  for (const auto& f : data.at("facts")) {
    std::string text = trim_copy(need_string(f, "text", false));
    if (text.empty()) throw ValidationError("fact with empty text");
    double conf = need_number(f, "confidence", 0.0, 1.0);
    out["facts"].push_back(json{{"text", text}, {"confidence", conf}});
  }
  return out;
}

json validate_anchor_flags(const json& data,
                           const std::map<std::string, std::string>& bindings) {
  auto resp_it = bindings.find("response");
  const std::string& response = resp_it == bindings.end() ? std::string() : resp_it->second;
  if (!data.contains("flags") || !data.at("flags").is_object()) {
    throw ValidationError("missing 'flags' object");
  }
  json flags = json::object();
  json evidence = json::object();
  for (auto name_view : kAnchorNames) {
    std::string name(name_view);
    if (!data.at("flags").contains(name) || !data.at("flags").at(name).is_boolean()) {
      throw ValidationError(fmt::format("missing boolean flag '{}'", name));
    }
    bool set = data.at("flags").at(name).get<bool>();
    flags[name] = set;
    if (!set) continue;
    if (!data.contains("evidence") || !data.at("evidence").contains(name) ||
        !data.at("evidence").at(name).is_array() || data.at("evidence").at(name).empty()) {
      throw ValidationError(fmt::format("true flag '{}' without evidence spans", name));
    }
    json spans = json::array();
    for (const auto& span : data.at("evidence").at(name)) {
      if (!span.is_string()) throw ValidationError("evidence span must be a string");
      std::string s = span.get<std::string>();
      if (s.empty() || response.find(s) == std::string::npos) {
        throw ValidationError(fmt::format(
            "evidence span for '{}' is not a verbatim substring of the response", name));
      }
      spans.push_back(s);
    }
    evidence[name] = spans;
  }
  return json{{"flags", flags}, {"evidence", evidence}};
}

json validate_match(const json& data) {
  if (!data.contains("match") || !data.at("match").is_boolean()) {
    throw ValidationError("missing boolean field 'match'");
  }
  json out{{"match", data.at("match").get<bool>()},
           {"confidence", need_number(data, "confidence", 0.0, 1.0)}};
  if (data.contains("rationale") && data.at("rationale").is_string()) {
    out["rationale"] = data.at("rationale").get<std::string>();
  }
  return out;
}

json validate_components(const json& data) {
  return json{{"subject", need_string(data, "subject", true)},
              {"attribute", need_string(data, "attribute", true)},
              {"timing", need_string(data, "timing", true)},
              {"method", need_string(data, "method", true)}};
}

json validate_relevance(const json& data) {
  if (!data.contains("dims") || !data.at("dims").is_object()) {
    throw ValidationError("missing 'dims' object");
  }
  json dims = json::object();
  for (auto d : kRelevanceDims) {
    dims[std::string(d)] = need_int(data.at("dims"), std::string(d), 1, 10);
  }
  json gaps = json::array();
  if (data.contains("gaps")) {
    if (!data.at("gaps").is_array()) throw ValidationError("'gaps' must be an array");
    for (const auto& g : data.at("gaps")) {
      if (!g.is_string()) throw ValidationError("gap entries must be strings");
      gaps.push_back(g.get<std::string>());
    }
  }
  return json{{"dims", dims},
              {"gaps", gaps},
              {"farmer_applicability",
               data.contains("farmer_applicability") && data.at("farmer_applicability").is_string()
                   ? data.at("farmer_applicability").get<std::string>()
                   : std::string()}};
}

json validate_conversationality(const json& data) {
  if (!data.contains("dims") || !data.at("dims").is_object()) {
    throw ValidationError("missing 'dims' object");
  }
  json dims = json::object();
  json rationales = json::object();
  for (auto d : kConversationalityDims) {
    std::string name(d);
    dims[name] = need_int(data.at("dims"), name, 1, 5);
    if (data.contains("rationales") && data.at("rationales").is_object() &&
        data.at("rationales").contains(name) && data.at("rationales").at(name).is_string()) {
      rationales[name] = data.at("rationales").at(name).get<std::string>();
    }
  }
  return json{{"dims", dims}, {"rationales", rationales}};
}

json validate_quality(const json& data) {
  return json{{"confidence", need_number(data, "confidence", 0.0, 1.0)},
              {"completeness", need_number(data, "completeness", 0.0, 1.0)},
              {"actionability", need_number(data, "actionability", 0.0, 1.0)}};
}

}  // namespace

json parse_judge_output(const PromptTemplate& tpl, const std::string& raw,
                        const std::map<std::string, std::string>& bindings) {
  try {
    if (tpl.schema == "text") {
      std::string text = trim_copy(raw);
      if (text.empty()) throw ValidationError("empty response text");
      return json{{"text", text}};
    }
    json data = extract_json(raw);
    if (tpl.schema == "facts_list") return validate_facts_list(data);
    if (tpl.schema == "anchor_flags") return validate_anchor_flags(data, bindings);
    if (tpl.schema == "match") return validate_match(data);
    if (tpl.schema == "components") return validate_components(data);
    if (tpl.schema == "relevance") return validate_relevance(data);
    if (tpl.schema == "conversationality") return validate_conversationality(data);
    if (tpl.schema == "quality") return validate_quality(data);
    throw ValidationError(fmt::format("template '{}' has unknown schema '{}'", tpl.name,
                                      tpl.schema));
  } catch (const json::exception& e) {
    throw SchemaError(fmt::format("{} output is not valid JSON: {}", tpl.name, e.what()), raw);
  } catch (const ValidationError& e) {
    throw SchemaError(fmt::format("{} output: {}", tpl.name, e.what()), raw);
  }
}

// ===== HttpBackend =====

HttpBackend::HttpBackend(std::string endpoint, std::string api_key, int max_retries,
                         int base_backoff_ms)
    : api_key_(std::move(api_key)),
      max_retries_(max_retries),
      base_backoff_ms_(base_backoff_ms) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError(fmt::format("endpoint '{}' has no scheme", endpoint));
  }
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base_ = endpoint;
    path_ = "/v1/chat/completions";
  } else {
    base_ = endpoint.substr(0, path_start);
    path_ = endpoint.substr(path_start);
  }
}

std::string HttpBackend::complete(const JudgeRequest& request) {
  json body{{"model", request.model},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens},
            {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})}};
  std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(base_backoff_ms_ * (1 << (attempt - 1))));
    }
    httplib::Client client(base_);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = fmt::format("connection failure ({})", httplib::to_string(res.error()));
      continue;
    }
    if (res->status == 200) {
      json reply = json::parse(res->body, nullptr, false);
      if (reply.is_discarded()) {
        throw TransportError("completion endpoint returned malformed JSON");
      }
      try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const json::exception&) {
        throw TransportError("completion payload missing choices[0].message.content");
      }
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = fmt::format("status {} ({})", res->status,
                               res->status == 429 ? "throttled" : "server error");
      continue;
    }
    throw TransportError(fmt::format("completion request rejected with status {}", res->status));
  }
  throw TransportError(
      fmt::format("completion failed after {} attempts: {}", max_retries_ + 1, last_error));
}

// ===== Judge =====

struct Judge::Impl {
  explicit Impl(int slots) : sem(slots) {}

  std::unique_ptr<JudgeBackend> backend;
  std::unique_ptr<FixtureStore> store;
  std::counting_semaphore<1024> sem;
};

namespace {

struct SemGuard {
  explicit SemGuard(std::counting_semaphore<1024>& s) : sem(s) { sem.acquire(); }
  ~SemGuard() { sem.release(); }
  std::counting_semaphore<1024>& sem;
};

}  // namespace

Judge::Judge(JudgeConfig config, std::unique_ptr<JudgeBackend> backend)
    : config_(std::move(config)) {
  if (config_.max_in_flight < 1 || config_.max_in_flight > 1024) {
    throw ValidationError("max_in_flight must be in [1, 1024]");
  }
  impl_ = std::make_unique<Impl>(config_.max_in_flight);
  impl_->backend = std::move(backend);

  if (config_.mode != JudgeMode::Live) {
    if (config_.fixtures_dir.empty()) {
      throw ValidationError(
          fmt::format("{} mode needs a fixtures directory", to_string(config_.mode)));
    }
    impl_->store = std::make_unique<FixtureStore>(config_.fixtures_dir);
  }
  if (config_.mode != JudgeMode::Replay && !impl_->backend) {
    if (config_.endpoint.empty()) {
      throw ValidationError(
          fmt::format("{} mode needs an endpoint", to_string(config_.mode)));
    }
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ValidationError(fmt::format("credential environment variable '{}' is not set",
                                        config_.api_key_env));
    }
    impl_->backend =
        std::make_unique<HttpBackend>(config_.endpoint, key, config_.max_retries);
  }
}

Judge::~Judge() = default;

namespace {

constexpr const char* kReformatSuffix =
    "\n\nYour previous reply did not match the required layout. Respond again with "
    "exactly the layout requested above and nothing else.";

}  // namespace

JudgeResponse Judge::complete(const PromptTemplate& tpl,
                              const std::map<std::string, std::string>& bindings) {
  auto run_once = [&](const std::map<std::string, std::string>& effective_bindings,
                      bool reformat) {
    JudgeRequest req;
    req.template_name = tpl.name;
    req.bindings = effective_bindings;
    req.prompt = render(tpl, bindings);
    if (reformat) req.prompt += kReformatSuffix;
    req.model = config_.model;
    req.temperature = config_.temperature;
    req.max_tokens = config_.max_tokens;
    std::string key = FixtureStore::key_of(req);

    std::string raw;
    if (config_.mode == JudgeMode::Replay) {
      auto hit = impl_->store->get(tpl.name, key);
      if (!hit) {
        throw ReplayMissError(
            fmt::format("no recorded fixture for template '{}' request {}", tpl.name, key),
            key);
      }
      raw = *hit;
    } else {
      SemGuard guard(impl_->sem);
      raw = impl_->backend->complete(req);
      if (config_.mode == JudgeMode::Record) impl_->store->put(req, key, raw);
    }
    json data = parse_judge_output(tpl, raw, bindings);
    return JudgeResponse{std::move(data), std::move(raw)};
  };

  try {
    return run_once(bindings, false);
  } catch (const SchemaError&) {
    auto retry_bindings = bindings;
    retry_bindings["_attempt"] = "reformat";
    return run_once(retry_bindings, true);
  }
}

std::vector<Judge::Outcome> Judge::complete_many(
    const PromptTemplate& tpl,
    const std::vector<std::map<std::string, std::string>>& bindings_list) {
  std::vector<Outcome> results(bindings_list.size());
  if (bindings_list.empty()) return results;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= bindings_list.size()) break;
      try {
        results[i].response = complete(tpl, bindings_list[i]);
      } catch (const TransportError& e) {
        results[i].error = e.what();
        results[i].transport = true;
      } catch (const JudgeError& e) {
        results[i].error = e.what();
      }
    }
  };

  std::size_t n_workers = std::min<std::size_t>(
      static_cast<std::size_t>(config_.max_in_flight), bindings_list.size());
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return results;
}

std::string Judge::fixture_digest() const {
  if (impl_->store) return impl_->store->digest();
  return "live";
}

}  // namespace dgeval
