// svsep/error.h

// Copyright 2026  The svsep Authors

// See LICENSE for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace svsep {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Audio file could not be read or decoded.
class IngestionError : public Error {
 public:
  IngestionError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Checkpoint file is missing, truncated, or does not match the model.
class CheckpointError : public Error {
 public:
  CheckpointError(const std::string& path, const std::string& what)
      : Error(path + ": " + what) {}
};

// Arguments with incompatible shapes or lengths.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value, unknown key, or bad argument range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient; the offending step was not applied.
class TrainingError : public Error {
 public:
  TrainingError(std::int64_t iteration, const std::string& what)
      : Error("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

}  // namespace svsep
