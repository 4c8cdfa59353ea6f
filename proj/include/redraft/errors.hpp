/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 The redraft Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace redraft {

// Base class for every error the engine raises. Each subclass maps to one
// failure category of the public contracts.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or sequence dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A sequence would exceed the model's maximum length.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent weight / dataset files.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Unsupported or inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Token id outside the vocabulary.
class VocabError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Optimisation diverged.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace redraft
