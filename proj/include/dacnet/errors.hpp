// Copyright 2026 The DACNet Toolkit Authors. All Rights Reserved.
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

namespace dacnet {

// Base of every error raised by the toolkit. Callers that only need a
// message can catch std::runtime_error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files: metadata, manifests, configs, prediction tables.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Violations of the patient-disjointness / validation-only fitting rules.
class LeakageError : public Error {
 public:
  using Error::Error;
};

// Operation not available for this configuration (e.g. Grad-CAM on a ViT).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Checkpoint does not belong to the recipe / disease ordering in use.
class FingerprintError : public Error {
 public:
  using Error::Error;
};

}  // namespace dacnet
