/*
 * Copyright 2026 The Faithbench Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FAITHBENCH_ERRORS_H_
#define FAITHBENCH_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace faithbench {

// Malformed input to an operation (shape mismatch, bad range, unknown name).
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what)
      : std::invalid_argument(what) {}
};

// Loss became non-finite during optimisation.
class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(const std::string& what, size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step) {}
  size_t step() const { return step_; }

 private:
  size_t step_;
};

// A score vector with zero L2 norm cannot be normalised.
class NormalizationError : public std::runtime_error {
 public:
  explicit NormalizationError(const std::string& what)
      : std::runtime_error(what) {}
};

// The weighted regression behind KernelSHAP was rank deficient.
class SingularSystem : public std::runtime_error {
 public:
  explicit SingularSystem(const std::string& what)
      : std::runtime_error(what) {}
};

// Spearman correlation is undefined when one ranking has no variance.
class UndefinedCorrelation : public std::domain_error {
 public:
  explicit UndefinedCorrelation(const std::string& what)
      : std::domain_error(what) {}
};

class CalibrationError : public std::runtime_error {
 public:
  explicit CalibrationError(const std::string& what)
      : std::runtime_error(what) {}
};

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what)
      : std::runtime_error(what) {}
};

// Dataset parsing or validation failure. `line` is 1-based, 0 if unknown.
class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, size_t line = 0)
      : std::runtime_error(line == 0 ? what
                                     : "line " + std::to_string(line) + ": " +
                                           what),
        line_(line) {}
  size_t line() const { return line_; }

 private:
  size_t line_;
};

}  // namespace faithbench

#endif  // FAITHBENCH_ERRORS_H_
