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

#include "redraft/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "redraft/markov_model.hpp"
#include "redraft/transformer.hpp"

namespace redraft {
namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little,
              "weight blobs are little-endian; add byte swapping for this target");

std::vector<std::size_t> parse_dims(const std::string& text, const std::string& name) {
  std::vector<std::size_t> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      dims.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw FormatError("tensor " + name + ": bad dimension list '" + text + "'");
    }
  }
  if (dims.empty() || dims.size() > 2) {
    throw FormatError("tensor " + name + ": expected 1 or 2 dimensions, got '" + text + "'");
  }
  return dims;
}

Matrix as_row(const Vector& v) { return v.transpose(); }
Vector as_vector(const Matrix& m) { return m.reshaped<Eigen::RowMajor>(); }

}  // namespace

const std::string& WeightFile::attribute(const std::string& key) const {
  const auto it = attributes.find(key);
  if (it == attributes.end()) throw FormatError("manifest missing header attribute @" + key);
  return it->second;
}

std::size_t WeightFile::size_attribute(const std::string& key) const {
  const std::string& text = attribute(key);
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw FormatError("header attribute @" + key + " is not a count: '" + text + "'");
  }
}

const Matrix& WeightFile::tensor(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
  for (const auto& [n, m] : tensors) {
    if (n != name) continue;
    if (m.rows() != rows || m.cols() != cols) {
      throw ShapeError("tensor " + name + " has shape " + std::to_string(m.rows()) + "," +
                       std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "," +
                       std::to_string(cols));
    }
    return m;
  }
  throw FormatError("missing tensor " + name);
}

fs::path manifest_path(const fs::path& prefix) {
  fs::path p = prefix;
  p += ".manifest";
  return p;
}

fs::path blob_path(const fs::path& prefix) {
  fs::path p = prefix;
  p += ".bin";
  return p;
}

void write_weight_file(const fs::path& prefix, const WeightFile& file) {
  std::ofstream manifest(manifest_path(prefix), std::ios::trunc);
  std::ofstream blob(blob_path(prefix), std::ios::binary | std::ios::trunc);
  if (!manifest || !blob) throw FormatError("cannot write weights at " + prefix.string());
  manifest << file.magic << '\n';
  for (const auto& [key, value] : file.attributes) manifest << '@' << key << ' ' << value << '\n';
  std::size_t offset = 0;
  for (const auto& [name, m] : file.tensors) {
    manifest << name << " f32 " << m.rows() << ',' << m.cols() << ' ' << offset << '\n';
    const auto bytes = static_cast<std::size_t>(m.size()) * sizeof(float);
    blob.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(bytes));
    offset += bytes;
  }
  if (!manifest || !blob) throw FormatError("failed writing weights at " + prefix.string());
}

WeightFile read_weight_file(const fs::path& prefix, const std::string& expected_magic) {
  const fs::path mpath = manifest_path(prefix);
  const fs::path bpath = blob_path(prefix);
  std::ifstream manifest(mpath);
  if (!manifest) throw FormatError("cannot open weight manifest " + mpath.string());
  std::ifstream blob(bpath, std::ios::binary);
  if (!blob) throw FormatError("cannot open weight blob " + bpath.string());
  const std::string data((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());

  WeightFile file;
  if (!std::getline(manifest, file.magic) || file.magic != expected_magic) {
    throw FormatError("bad magic in " + mpath.string() + ": expected '" + expected_magic + "'");
  }
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    if (line.front() == '@') {
      const auto space = line.find(' ');
      if (space == std::string::npos) throw FormatError("malformed header line: " + line);
      file.attributes[line.substr(1, space - 1)] = line.substr(space + 1);
      continue;
    }
    std::istringstream fields(line);
    std::string name, dtype, dims_text;
    std::size_t offset = 0;
    if (!(fields >> name >> dtype >> dims_text >> offset)) {
      throw FormatError("malformed tensor line: " + line);
    }
    if (dtype != "f32") throw FormatError("tensor " + name + ": unsupported dtype " + dtype);
    const auto dims = parse_dims(dims_text, name);
    const std::size_t rows = dims.size() == 2 ? dims[0] : 1;
    const std::size_t cols = dims.back();
    const std::size_t bytes = rows * cols * sizeof(float);
    if (offset + bytes > data.size()) {
      throw FormatError("tensor " + name + " runs past the end of " + bpath.string() + " (needs " +
                        std::to_string(offset + bytes) + " bytes, blob has " +
                        std::to_string(data.size()) + ")");
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::memcpy(m.data(), data.data() + offset, bytes);
    file.add(std::move(name), std::move(m));
  }
  return file;
}

WeightFile base_model_to_file(const BaseModel& model) {
  WeightFile file;
  file.magic = kBaseWeightsMagic;
  const ModelConfig& cfg = model.config();
  file.attributes["kind"] = model.kind();
  file.attributes["vocab_size"] = std::to_string(cfg.vocab_size);
  file.attributes["d_model"] = std::to_string(cfg.d_model);
  file.attributes["n_layers"] = std::to_string(cfg.n_layers);
  file.attributes["n_heads"] = std::to_string(cfg.n_heads);
  file.attributes["d_ff"] = std::to_string(cfg.d_ff);
  file.attributes["max_seq_len"] = std::to_string(cfg.max_seq_len);
  if (const auto* t = dynamic_cast<const TinyTransformer*>(&model)) {
    const TransformerWeights& w = t->weights();
    file.add("tok_embed", w.tok_embed);
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
      const auto& layer = w.layers[l];
      const std::string p = "layers." + std::to_string(l) + ".";
      file.add(p + "ln1_gain", as_row(layer.ln1_gain));
      file.add(p + "ln1_bias", as_row(layer.ln1_bias));
      file.add(p + "wq", layer.wq);
      file.add(p + "bq", as_row(layer.bq));
      file.add(p + "wk", layer.wk);
      file.add(p + "bk", as_row(layer.bk));
      file.add(p + "wv", layer.wv);
      file.add(p + "bv", as_row(layer.bv));
      file.add(p + "wo", layer.wo);
      file.add(p + "bo", as_row(layer.bo));
      file.add(p + "ln2_gain", as_row(layer.ln2_gain));
      file.add(p + "ln2_bias", as_row(layer.ln2_bias));
      file.add(p + "w1", layer.w1);
      file.add(p + "b1", as_row(layer.b1));
      file.add(p + "w2", layer.w2);
      file.add(p + "b2", as_row(layer.b2));
    }
    file.add("lnf_gain", as_row(w.lnf_gain));
    file.add("lnf_bias", as_row(w.lnf_bias));
    file.add("lm_head", w.lm_head);
  } else if (const auto* mk = dynamic_cast<const SyntheticMarkovModel*>(&model)) {
    file.attributes["order"] = std::to_string(mk->order());
    file.add("table", mk->table());
    file.add("tok_embed", mk->token_embeddings());
  } else {
    throw ConfigError("cannot serialise base model of kind " + model.kind());
  }
  return file;
}

std::unique_ptr<BaseModel> base_model_from_file(const WeightFile& file) {
  ModelConfig cfg;
  cfg.vocab_size = file.size_attribute("vocab_size");
  cfg.d_model = file.size_attribute("d_model");
  cfg.n_layers = file.size_attribute("n_layers");
  cfg.n_heads = file.size_attribute("n_heads");
  cfg.d_ff = file.size_attribute("d_ff");
  cfg.max_seq_len = file.size_attribute("max_seq_len");
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto ff = static_cast<Eigen::Index>(cfg.d_ff);
  const auto vocab = static_cast<Eigen::Index>(cfg.vocab_size);
  const std::string& kind = file.attribute("kind");
  if (kind == "transformer") {
    cfg.validate();
    TransformerWeights w;
    w.tok_embed = file.tensor("tok_embed", vocab, d);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
      const std::string p = "layers." + std::to_string(l) + ".";
      TransformerLayer layer;
      layer.ln1_gain = as_vector(file.tensor(p + "ln1_gain", 1, d));
      layer.ln1_bias = as_vector(file.tensor(p + "ln1_bias", 1, d));
      layer.wq = file.tensor(p + "wq", d, d);
      layer.bq = as_vector(file.tensor(p + "bq", 1, d));
      layer.wk = file.tensor(p + "wk", d, d);
      layer.bk = as_vector(file.tensor(p + "bk", 1, d));
      layer.wv = file.tensor(p + "wv", d, d);
      layer.bv = as_vector(file.tensor(p + "bv", 1, d));
      layer.wo = file.tensor(p + "wo", d, d);
      layer.bo = as_vector(file.tensor(p + "bo", 1, d));
      layer.ln2_gain = as_vector(file.tensor(p + "ln2_gain", 1, d));
      layer.ln2_bias = as_vector(file.tensor(p + "ln2_bias", 1, d));
      layer.w1 = file.tensor(p + "w1", d, ff);
      layer.b1 = as_vector(file.tensor(p + "b1", 1, ff));
      layer.w2 = file.tensor(p + "w2", ff, d);
      layer.b2 = as_vector(file.tensor(p + "b2", 1, d));
      w.layers.push_back(std::move(layer));
    }
    w.lnf_gain = as_vector(file.tensor("lnf_gain", 1, d));
    w.lnf_bias = as_vector(file.tensor("lnf_bias", 1, d));
    w.lm_head = file.tensor("lm_head", d, vocab);
    return std::make_unique<TinyTransformer>(cfg, std::move(w));
  }
  if (kind == "markov") {
    const std::size_t order = file.size_attribute("order");
    if (order != 1 && order != 2) throw ConfigError("unsupported markov order " + std::to_string(order));
    const auto rows = order == 1 ? vocab : vocab * vocab;
    return std::make_unique<SyntheticMarkovModel>(order, cfg, file.tensor("table", rows, vocab),
                                                  file.tensor("tok_embed", vocab, d));
  }
  throw FormatError("unknown base model kind '" + kind + "'");
}

void save_base_model(const BaseModel& model, const fs::path& prefix) {
  write_weight_file(prefix, base_model_to_file(model));
}

std::unique_ptr<BaseModel> load_base_model(const fs::path& prefix) {
  return base_model_from_file(read_weight_file(prefix, kBaseWeightsMagic));
}

}  // namespace redraft
