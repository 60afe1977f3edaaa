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

#include "qecd/noise/batch.h"

#include <fstream>

#include "qecd/util/errors.h"

namespace qecd {
namespace {

std::vector<std::uint8_t> pack_bits(const std::vector<std::uint8_t>& bits) {
  std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  return out;
}

std::vector<std::uint8_t> unpack_bits(const std::vector<std::uint8_t>& bytes, std::size_t n) {
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (bytes[i / 8] >> (i % 8)) & 1u;
  return out;
}

}  // namespace

nlohmann::json BatchMeta::to_json() const {
  return {{"format", "synb"},
          {"version", 1},
          {"d", d},
          {"cycles", cycles},
          {"basis", basis_name(basis)},
          {"p", p},
          {"idle_noise", idle_noise},
          {"p_dec", p_dec},
          {"block_cycles", block_cycles},
          {"injection_rounds", injection_rounds},
          {"seed", seed},
          {"shots", shots},
          {"source", source}};
}

BatchMeta BatchMeta::from_json(const nlohmann::json& j) {
  BatchMeta m;
  try {
    m.d = j.at("d").get<int>();
    m.cycles = j.at("cycles").get<int>();
    m.basis = parse_basis(j.at("basis").get<std::string>());
    m.p = j.at("p").get<double>();
    m.idle_noise = j.value("idle_noise", true);
    m.p_dec = j.value("p_dec", 0.0);
    m.block_cycles = j.value("block_cycles", 0);
    m.injection_rounds = j.value("injection_rounds", std::vector<int>{});
    m.seed = j.at("seed").get<std::uint64_t>();
    m.shots = j.at("shots").get<std::size_t>();
    m.source = j.value("source", std::string("circuit"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad batch header: ") + e.what());
  }
  return m;
}

void SyndromeBatch::validate() const {
  const std::size_t expect_slots = meta.d > 0 ? static_cast<std::size_t>(meta.d * meta.d - 1) : 0;
  if (slots != expect_slots || rows != static_cast<std::size_t>(meta.cycles + 1)) {
    throw DataError("batch shape [" + std::to_string(rows) + ", " + std::to_string(slots) +
                    "] disagrees with d=" + std::to_string(meta.d) +
                    ", cycles=" + std::to_string(meta.cycles));
  }
  if (labels.size() != meta.shots || events.size() != meta.shots * rows * slots) {
    throw DataError("batch arrays do not match shot count " + std::to_string(meta.shots));
  }
}

double detection_fraction(const SyndromeBatch& batch) {
  if (batch.events.empty()) {
    throw ParameterError("detection_fraction: empty batch");
  }
  std::size_t ones = 0;
  for (std::uint8_t e : batch.events) ones += e;
  return static_cast<double>(ones) / static_cast<double>(batch.events.size());
}

void write_synb(const std::string& path, const SyndromeBatch& batch) {
  batch.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw DataError("cannot write " + path);
  }
  os << batch.meta.to_json().dump() << "\n";
  auto ev = pack_bits(batch.events);
  auto lb = pack_bits(batch.labels);
  os.write(reinterpret_cast<const char*>(ev.data()), static_cast<std::streamsize>(ev.size()));
  os.write(reinterpret_cast<const char*>(lb.data()), static_cast<std::streamsize>(lb.size()));
  if (!os.flush()) {
    throw DataError("write failed: " + path);
  }
}

SyndromeBatch read_synb(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw DataError("cannot open " + path);
  }
  std::string header;
  if (!std::getline(is, header)) {
    throw DataError("missing header in " + path);
  }
  SyndromeBatch b;
  try {
    b.meta = BatchMeta::from_json(nlohmann::json::parse(header));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("bad header in " + path + ": " + e.what());
  }
  b.rows = static_cast<std::size_t>(b.meta.cycles + 1);
  b.slots = static_cast<std::size_t>(b.meta.d * b.meta.d - 1);
  const std::size_t n_ev = b.meta.shots * b.rows * b.slots;
  std::vector<std::uint8_t> ev((n_ev + 7) / 8), lb((b.meta.shots + 7) / 8);
  if (!is.read(reinterpret_cast<char*>(ev.data()), static_cast<std::streamsize>(ev.size())) ||
      !is.read(reinterpret_cast<char*>(lb.data()), static_cast<std::streamsize>(lb.size()))) {
    throw DataError("truncated batch file " + path);
  }
  b.events = unpack_bits(ev, n_ev);
  b.labels = unpack_bits(lb, b.meta.shots);
  b.validate();
  return b;
}

void write_batch_csv(const std::string& path, const SyndromeBatch& batch) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw DataError("cannot write " + path);
  }
  os << "shot,label,events\n";
  for (std::size_t s = 0; s < batch.shots(); ++s) {
    os << s << "," << int(batch.labels[s]) << ",";
    const std::uint8_t* e = batch.shot_events(s);
    for (std::size_t i = 0; i < batch.shot_stride(); ++i) os << char('0' + e[i]);
    os << "\n";
  }
}

}  // namespace qecd
