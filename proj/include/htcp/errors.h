// Copyright 2026 The HTCP Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HTCP_ERRORS_H_
#define HTCP_ERRORS_H_

#include <stdexcept>
#include <string>

namespace htcp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed model, scene, or problem data.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, int rank)
      : Error(what), rank_(rank) {}
  int rank() const { return rank_; }

 private:
  int rank_;
};

class IkError : public Error {
 public:
  IkError(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

class NullSpaceError : public Error {
 public:
  NullSpaceError(const std::string& what, double best_clearance)
      : Error(what), best_clearance_(best_clearance) {}
  double best_clearance() const { return best_clearance_; }

 private:
  double best_clearance_;
};

// Parse or validation failure; `field` is a JSON-pointer-like path.
class SpecError : public Error {
 public:
  SpecError(const std::string& field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message),
        field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace htcp

#endif  // HTCP_ERRORS_H_
