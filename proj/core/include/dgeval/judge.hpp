#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgeval/errors.hpp"
#include "dgeval/prompts.hpp"

namespace dgeval {

enum class JudgeMode { Live, Record, Replay };

std::string_view to_string(JudgeMode m);
JudgeMode judge_mode_from_string(std::string_view s);

struct JudgeConfig {
  std::string endpoint;  // chat-completion URL, required for live / record
  std::string model = "judge";
  double temperature = 0.0;  // pinned for reproducibility
  int max_tokens = 1024;
  JudgeMode mode = JudgeMode::Replay;
  std::filesystem::path fixtures_dir;  // required for record / replay
  int max_in_flight = 4;
  int max_retries = 3;
  std::string api_key_env = "DGEVAL_API_KEY";  // credential never lives in files
};

// Everything a backend may see about one judge call. The rendered prompt is
// what goes on the wire; template name and bindings exist for fixture keying
// and for test backends.
struct JudgeRequest {
  std::string template_name;
  std::map<std::string, std::string> bindings;
  std::string prompt;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 0;
};

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  // Returns the raw model text. Throws TransportError on failures that
  // survive the backend's own retry budget.
  virtual std::string complete(const JudgeRequest& request) = 0;
};

// Chat-completion HTTP backend with exponential backoff on throttling (429),
// server errors (5xx), and connection failures.
class HttpBackend final : public JudgeBackend {
 public:
  HttpBackend(std::string endpoint, std::string api_key, int max_retries,
              int base_backoff_ms = 250);

  std::string complete(const JudgeRequest& request) override;

 private:
  std::string base_;  // scheme://host[:port]
  std::string path_;
  std::string api_key_;
  int max_retries_;
  int base_backoff_ms_;
};

// Content-addressed request/response store. Keys hash the template name,
// bindings, and sampling parameters; files are written via temp + rename so
// concurrent recorders never interleave.
class FixtureStore {
 public:
  explicit FixtureStore(std::filesystem::path dir);

  static std::string key_of(const JudgeRequest& request);

  std::optional<std::string> get(const std::string& template_name,
                                 const std::string& key) const;
  void put(const JudgeRequest& request, const std::string& key,
           const std::string& response);

  // Stable hash of every fixture file (name + bytes), for report provenance.
  std::string digest() const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path file_for(const std::string& template_name,
                                 const std::string& key) const;

  std::filesystem::path dir_;
  std::mutex write_mutex_;
};

struct JudgeResponse {
  nlohmann::json data;  // schema-validated per template
  std::string raw;
};

class Judge {
 public:
  // Replay mode needs no backend. Live and record modes build an HttpBackend
  // from the config unless a backend is injected (tests inject fakes).
  explicit Judge(JudgeConfig config, std::unique_ptr<JudgeBackend> backend = nullptr);
  ~Judge();

  Judge(const Judge&) = delete;
  Judge& operator=(const Judge&) = delete;

  JudgeResponse complete(const PromptTemplate& tpl,
                         const std::map<std::string, std::string>& bindings);

  struct Outcome {
    std::optional<JudgeResponse> response;
    std::string error;       // empty on success
    bool transport = false;  // true when the failure was network-level
  };

  // Runs one call per binding map over a worker pool bounded by
  // max_in_flight. Results come back in input order regardless of
  // completion order; per-call judge errors become failed Outcomes.
  std::vector<Outcome> complete_many(
      const PromptTemplate& tpl,
      const std::vector<std::map<std::string, std::string>>& bindings_list);

  const JudgeConfig& config() const { return config_; }
  std::string fixture_digest() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  JudgeConfig config_;
};

// Parses raw judge text into the template's output schema; shared with test
// code that needs to sanity-check canned responses. Throws SchemaError.
nlohmann::json parse_judge_output(const PromptTemplate& tpl, const std::string& raw,
                                  const std::map<std::string, std::string>& bindings);

}  // namespace dgeval
