// Copyright 2026 The udadet Authors
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

#include "udadet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "udadet/error.hpp"
#include "udadet/hashing.hpp"

namespace udadet {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'U', 'D', 'A', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

void add_tensors(std::vector<ConstParamRef>& out, const std::string& prefix, std::vector<ConstParamRef> refs) {
  for (auto& r : refs) out.push_back({prefix + r.name, r.tensor});
}

void bind_tensors(std::map<std::string, Tensor*>& out, const std::string& prefix, std::vector<ParamRef> refs) {
  for (auto& r : refs) out[prefix + r.name] = r.tensor;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::vector<ConstParamRef> tensors;
  add_tensors(tensors, "", ckpt.params.named());
  if (ckpt.velocity) add_tensors(tensors, "momentum.", ckpt.velocity->named());
  if (ckpt.domain) add_tensors(tensors, "", ckpt.domain->named());
  if (ckpt.domain_velocity) add_tensors(tensors, "momentum.", ckpt.domain_velocity->named());

  json table = json::array();
  std::size_t offset = 0;
  Sha256 payload;
  for (const auto& t : tensors) {
    table.push_back({{"name", t.name}, {"shape", t.tensor->shape}, {"offset", offset}});
    offset += t.tensor->size();
    payload.update_values(std::span<const double>(t.tensor->values));
  }
  json header = {{"config_hash", ckpt.config_hash},
                 {"role", ckpt.role},
                 {"iteration", ckpt.iteration},
                 {"detector", to_json(ckpt.params.config)},
                 {"has_velocity", ckpt.velocity.has_value()},
                 {"has_domain", ckpt.domain.has_value()},
                 {"has_domain_velocity", ckpt.domain_velocity.has_value()},
                 {"params_hash", params_hash(ckpt.params)},
                 {"payload_sha256", payload.hex_digest()},
                 {"tensors", table}};
  if (ckpt.domain) {
    header["domain_channels"] = ckpt.domain->channels();
    header["domain_hidden"] = ckpt.domain->hidden_units();
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : tensors) {
    out.write(reinterpret_cast<const char*>(t.tensor->data()),
              static_cast<std::streamsize>(t.tensor->size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw DataError("not a checkpoint: " + path.string());
  if (read_pod<std::uint32_t>(in) != kVersion) throw DataError("unsupported checkpoint version in " + path.string());
  const auto length = read_pod<std::uint64_t>(in);
  if (!in || length > (1u << 26)) throw DataError("corrupt checkpoint header in " + path.string());
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw DataError("truncated checkpoint " + path.string());

  Checkpoint ckpt;
  try {
    const json header = json::parse(text);
    ckpt.config_hash = header.at("config_hash").get<std::string>();
    ckpt.role = header.at("role").get<std::string>();
    ckpt.iteration = header.at("iteration").get<int>();
    ckpt.params = DetectorParams::zeros(detector_config_from_json(header.at("detector")));
    if (header.at("has_velocity").get<bool>()) ckpt.velocity = DetectorParams::zeros(ckpt.params.config);
    if (header.at("has_domain").get<bool>()) {
      const int c = header.at("domain_channels").get<int>();
      const int h = header.at("domain_hidden").get<int>();
      ckpt.domain = DomainClassifier::zeros(c, h);
      if (header.at("has_domain_velocity").get<bool>()) ckpt.domain_velocity = DomainClassifier::zeros(c, h);
    }
    std::map<std::string, Tensor*> slots;
    bind_tensors(slots, "", ckpt.params.named());
    if (ckpt.velocity) bind_tensors(slots, "momentum.", ckpt.velocity->named());
    if (ckpt.domain) bind_tensors(slots, "", ckpt.domain->named());
    if (ckpt.domain_velocity) bind_tensors(slots, "momentum.", ckpt.domain_velocity->named());

    const auto& table = header.at("tensors");
    Sha256 payload;
    if (table.size() != slots.size()) throw DataError("checkpoint tensor table does not match its metadata");
    for (const json& entry : table) {
      auto it = slots.find(entry.at("name").get<std::string>());
      if (it == slots.end()) throw DataError("unexpected tensor " + entry.at("name").get<std::string>());
      if (entry.at("shape").get<std::vector<int>>() != it->second->shape) {
        throw DataError("shape mismatch for tensor " + it->first);
      }
      in.read(reinterpret_cast<char*>(it->second->data()),
              static_cast<std::streamsize>(it->second->size() * sizeof(double)));
      if (!in) throw DataError("truncated tensor data in " + path.string());
      payload.update_values(std::span<const double>(it->second->values));
    }
    // Catches damage to the momentum buffers, which params_hash does not cover.
    if (header.at("payload_sha256").get<std::string>() != payload.hex_digest()) {
      throw DataError("checkpoint payload checksum mismatch in " + path.string());
    }
    if (header.at("params_hash").get<std::string>() != params_hash(ckpt.params)) {
      throw DataError("checkpoint parameter hash mismatch in " + path.string());
    }
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint header in " + path.string() + ": " + e.what());
  }
  return ckpt;
}

std::string params_hash(const DetectorParams& params) {
  Sha256 h;
  for (const auto& ref : params.named()) {
    h.update(ref.name);
    h.update_values(std::span<const int>(ref.tensor->shape));
    h.update_values(std::span<const double>(ref.tensor->values));
  }
  return h.hex_digest();
}

}  // namespace udadet
