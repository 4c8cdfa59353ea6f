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

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "redraft/base_model.hpp"

namespace redraft {

inline constexpr const char* kBaseWeightsMagic = "REDRAFT-WEIGHTS v1";
inline constexpr const char* kDrafterWeightsMagic = "REDRAFT-DRAFTER v1";

// In-memory form of a `<prefix>.manifest` + `<prefix>.bin` pair.
//
// Manifest layout (UTF-8, one record per line):
//   REDRAFT-WEIGHTS v1            magic
//   @key value                    header attribute, any number
//   name f32 d0,d1 offset         one tensor per line, byte offset into .bin
//
// The blob holds the tensors as concatenated row-major little-endian f32.
struct WeightFile {
  std::string magic;
  std::map<std::string, std::string> attributes;
  std::vector<std::pair<std::string, Matrix>> tensors;

  void add(std::string name, Matrix m) { tensors.emplace_back(std::move(name), std::move(m)); }
  const std::string& attribute(const std::string& key) const;
  std::size_t size_attribute(const std::string& key) const;
  // FormatError if missing, ShapeError if the stored shape differs.
  const Matrix& tensor(const std::string& name, Eigen::Index rows, Eigen::Index cols) const;
};

std::filesystem::path manifest_path(const std::filesystem::path& prefix);
std::filesystem::path blob_path(const std::filesystem::path& prefix);

void write_weight_file(const std::filesystem::path& prefix, const WeightFile& file);
WeightFile read_weight_file(const std::filesystem::path& prefix, const std::string& expected_magic);

// Base models (transformer or synthetic markov), dispatched on @kind.
WeightFile base_model_to_file(const BaseModel& model);
std::unique_ptr<BaseModel> base_model_from_file(const WeightFile& file);
void save_base_model(const BaseModel& model, const std::filesystem::path& prefix);
std::unique_ptr<BaseModel> load_base_model(const std::filesystem::path& prefix);

}  // namespace redraft
