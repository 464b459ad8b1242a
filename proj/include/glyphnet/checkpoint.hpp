#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "glyphnet/errors.hpp"
#include "glyphnet/nn.hpp"

namespace glyphnet {

// Single-file archive: a manifest record plus weight arrays keyed by module
// path. JSON doubles round-trip exactly, so save -> load reproduces forward
// outputs bit for bit.
struct Checkpoint {
  nlohmann::json manifest;
  std::map<std::string, Matrix> arrays;

  static constexpr const char* kFormat = "glyphnet.checkpoint.v1";

  void save(const std::string& path) const {
    nlohmann::json j;
    j["format"] = kFormat;
    j["manifest"] = manifest;
    nlohmann::json arr = nlohmann::json::object();
    for (const auto& [name, m] : arrays) {
      std::vector<double> data(m.data(), m.data() + m.size());
      arr[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
    }
    j["arrays"] = std::move(arr);
    std::ofstream out(path);
    if (!out) throw DataError("checkpoint: cannot write " + path);
    out << j.dump();
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("checkpoint: cannot read " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("checkpoint: parse failure in " + path + ": " + e.what());
    }
    if (!j.contains("format") || j["format"] != kFormat)
      throw DataError("checkpoint: unrecognized format in " + path);
    Checkpoint ckpt;
    ckpt.manifest = j["manifest"];
    for (const auto& [name, entry] : j["arrays"].items()) {
      const int rows = entry["rows"].get<int>();
      const int cols = entry["cols"].get<int>();
      const auto& data = entry["data"];
      if (static_cast<Eigen::Index>(data.size()) != static_cast<Eigen::Index>(rows) * cols)
        throw DataError("checkpoint: array size mismatch for " + name);
      Matrix m(rows, cols);
      Eigen::Index k = 0;
      for (const auto& v : data) m.data()[k++] = v.get<double>();
      ckpt.arrays[name] = std::move(m);
    }
    return ckpt;
  }
};

inline Checkpoint snapshot_params(const std::vector<Param*>& params,
                                  nlohmann::json manifest) {
  Checkpoint ckpt;
  ckpt.manifest = std::move(manifest);
  for (const Param* p : params) ckpt.arrays[p->name] = p->value;
  return ckpt;
}

// Restores every listed param from the checkpoint. With prefix filtering only
// params whose name starts with one of `prefixes` are touched (used to seed a
// stage-2 model from a stage-1 or baseline encoder).
inline void restore_params(const std::vector<Param*>& params, const Checkpoint& ckpt,
                           const std::vector<std::string>& prefixes = {},
                           const std::map<std::string, std::string>& renames = {}) {
  const auto wanted = [&](const std::string& name) {
    if (prefixes.empty()) return true;
    for (const auto& p : prefixes)
      if (name.rfind(p, 0) == 0) return true;
    return false;
  };
  for (Param* p : params) {
    if (!wanted(p->name)) continue;
    std::string key = p->name;
    if (auto it = renames.find(key); it != renames.end()) key = it->second;
    auto it = ckpt.arrays.find(key);
    if (it == ckpt.arrays.end())
      throw DataError("checkpoint: missing array '" + key + "'");
    require(it->second.rows() == p->value.rows() && it->second.cols() == p->value.cols(),
            "checkpoint: shape mismatch for '" + key + "'");
    p->value = it->second;
  }
}

}  // namespace glyphnet
