// Copyright 2026 The QECD Authors
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

#include "qecd/tensor/checkpoint.h"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace qecd {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw CheckpointError("truncated checkpoint: " + path);
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) {
      throw CheckpointError("cannot open checkpoint for writing: " + path);
    }
    os.write("QECD", 4);
    put_u32(os, kCheckpointVersion);
    const std::string meta = ckpt.metadata.dump();
    put_u32(os, static_cast<std::uint32_t>(meta.size()));
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    for (const auto& [name, rec] : ckpt.records) {
      if (shape_numel(rec.shape) != rec.values.size()) {
        throw CheckpointError("record " + name + " has shape " + shape_str(rec.shape) + " but " +
                              std::to_string(rec.values.size()) + " values");
      }
      put_u32(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_u32(os, static_cast<std::uint32_t>(rec.shape.size()));
      for (std::size_t d : rec.shape) put_u32(os, static_cast<std::uint32_t>(d));
      os.write(reinterpret_cast<const char*>(rec.values.data()),
               static_cast<std::streamsize>(rec.values.size() * sizeof(float)));
    }
    if (!os.flush()) {
      throw CheckpointError("write failed: " + path);
    }
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw CheckpointError("cannot open checkpoint: " + path);
  }
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "QECD", 4) != 0) {
    throw CheckpointError("not a checkpoint (bad magic): " + path);
  }
  const std::uint32_t version = get_u32(is, path);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  }
  const std::uint32_t meta_len = get_u32(is, path);
  std::string meta(meta_len, '\0');
  if (!is.read(meta.data(), meta_len)) {
    throw CheckpointError("truncated checkpoint metadata: " + path);
  }
  Checkpoint ckpt;
  try {
    ckpt.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("bad checkpoint metadata in " + path + ": " + e.what());
  }
  while (is.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t name_len = get_u32(is, path);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) {
      throw CheckpointError("truncated record name: " + path);
    }
    CheckpointRecord rec;
    const std::uint32_t rank = get_u32(is, path);
    for (std::uint32_t i = 0; i < rank; ++i) rec.shape.push_back(get_u32(is, path));
    rec.values.resize(shape_numel(rec.shape));
    if (!is.read(reinterpret_cast<char*>(rec.values.data()),
                 static_cast<std::streamsize>(rec.values.size() * sizeof(float)))) {
      throw CheckpointError("truncated record " + name + ": " + path);
    }
    ckpt.records.emplace(std::move(name), std::move(rec));
  }
  return ckpt;
}

}  // namespace qecd
