#pragma once

#include <stdexcept>
#include <string>

namespace dgeval {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data: schema violations, dangling
// references, values outside their documented range.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Base for failures raised while talking to the judge model.
class JudgeError : public Error {
 public:
  using Error::Error;
};

// Network-level failure that survived the retry budget.
class TransportError : public JudgeError {
 public:
  using JudgeError::JudgeError;
};

// Judge output that still failed schema validation after one reformat retry.
// Keeps the raw model text so callers can log or inspect it.
class SchemaError : public JudgeError {
 public:
  SchemaError(const std::string& what, std::string raw_output)
      : JudgeError(what), raw_output_(std::move(raw_output)) {}

  const std::string& raw_output() const { return raw_output_; }

 private:
  std::string raw_output_;
};

// Replay-mode request whose key has no recorded fixture.
class ReplayMissError : public JudgeError {
 public:
  ReplayMissError(const std::string& what, std::string key)
      : JudgeError(what), key_(std::move(key)) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace dgeval
