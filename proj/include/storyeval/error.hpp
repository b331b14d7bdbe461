// Copyright 2026 The storyeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace storyeval {

// Input violates a documented precondition or invariant. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A record could not be parsed. Carries the 1-based line number.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A metric could not be computed; names the metric that failed.
class MetricError : public ValidationError {
 public:
  MetricError(std::string metric, const std::string& what)
      : ValidationError(metric + ": " + what), metric_(std::move(metric)) {}

  const std::string& metric() const noexcept { return metric_; }

 private:
  std::string metric_;
};

// File system failure. CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transport-level or HTTP failure talking to the generation endpoint. CLI exit code 2.
class NetworkError : public std::runtime_error {
 public:
  NetworkError(const std::string& what, int status = 0, int attempts = 0)
      : std::runtime_error(what), status_(status), attempts_(attempts) {}

  int status() const noexcept { return status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int status_;
  int attempts_;
};

}  // namespace storyeval
