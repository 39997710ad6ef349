// Copyright 2026 The CapCal Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace capcal {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidTask : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Backend failures. BackendUnavailable is the only retryable one.
class BackendError : public Error {
 public:
  using Error::Error;
};

class BackendUnavailable : public BackendError {
 public:
  using BackendError::BackendError;
};

class TokenizationMismatch : public BackendError {
 public:
  using BackendError::BackendError;
};

class MalformedResponse : public BackendError {
 public:
  using BackendError::BackendError;
};

class UnrecognizedPrompt : public BackendError {
 public:
  using BackendError::BackendError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class DuplicateJudgment : public ParseError {
 public:
  using ParseError::ParseError;
};

class NonContiguousRanks : public ParseError {
 public:
  using ParseError::ParseError;
};

class QuerySetMismatch : public Error {
 public:
  using Error::Error;
};

class UnknownQuery : public Error {
 public:
  using Error::Error;
};

}  // namespace capcal
