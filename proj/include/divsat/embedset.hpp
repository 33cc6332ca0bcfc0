#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "divsat/error.hpp"

namespace divsat {

/// One embedding vector with its identity and optional annotations.
struct EmbeddingRecord {
  std::string id;
  std::vector<double> vector;
  std::optional<std::string> label;
  std::map<std::string, std::string> meta;

  bool operator==(const EmbeddingRecord&) const = default;
};

/// Non-empty ordered collection of records sharing one dimension, with
/// unique non-empty ids and finite coordinates. Immutable once built.
class EmbeddingSet {
 public:
  explicit EmbeddingSet(std::vector<EmbeddingRecord> records)
      : records_(std::move(records)) {
    if (records_.empty()) throw Error(Errc::empty_set, "embedding set is empty");
    dimension_ = records_.front().vector.size();
    std::unordered_set<std::string_view> seen;
    seen.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (r.vector.empty())
        throw Error(Errc::empty_vector, "record '" + r.id + "' has an empty vector");
      if (r.vector.size() != dimension_)
        throw Error(Errc::dimension_mismatch,
                    "record " + std::to_string(i) + " ('" + r.id + "') has dimension " +
                        std::to_string(r.vector.size()) + ", expected " +
                        std::to_string(dimension_));
      for (double v : r.vector)
        if (!std::isfinite(v))
          throw Error(Errc::non_finite_value, "record '" + r.id + "' has a non-finite value");
      if (r.id.empty())
        throw Error(Errc::invalid_argument, "record " + std::to_string(i) + " has an empty id");
      if (!seen.insert(r.id).second)
        throw Error(Errc::duplicate_id, "duplicate id '" + r.id + "'");
    }
  }

  std::size_t size() const noexcept { return records_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }

  const EmbeddingRecord& operator[](std::size_t i) const { return records_[i]; }
  std::span<const double> row(std::size_t i) const { return records_[i].vector; }
  const std::vector<EmbeddingRecord>& records() const noexcept { return records_; }

  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  bool operator==(const EmbeddingSet&) const = default;

 private:
  std::vector<EmbeddingRecord> records_;
  std::size_t dimension_ = 0;
};

namespace detail {

inline bool mentions_non_finite_literal(std::string_view line) {
  std::string lower(line);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  bool in_string = false;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    const char c = lower[i];
    if (c == '"' && (i == 0 || lower[i - 1] != '\\')) in_string = !in_string;
    if (in_string) continue;
    if (lower.compare(i, 3, "nan") == 0 || lower.compare(i, 3, "inf") == 0) return true;
  }
  return false;
}

}  // namespace detail

/// Parses one JSON Lines record. `line_index` (zero-based) supplies the
/// default id when the object has none.
inline EmbeddingRecord parse_record(std::string_view line, std::size_t line_index = 0) {
  using nlohmann::json;
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::out_of_range&) {
    throw Error(Errc::non_finite_value, "line " + std::to_string(line_index + 1) +
                                            ": number overflows a double");
  } catch (const json::parse_error& e) {
    if (detail::mentions_non_finite_literal(line))
      throw Error(Errc::non_finite_value, "line " + std::to_string(line_index + 1) +
                                              ": non-finite literal in record");
    throw Error(Errc::malformed_line,
                "line " + std::to_string(line_index + 1) + ": " + e.what());
  }
  const auto where = "line " + std::to_string(line_index + 1) + ": ";
  if (!obj.is_object()) throw Error(Errc::malformed_line, where + "record is not an object");
  const auto vit = obj.find("vector");
  if (vit == obj.end() || !vit->is_array())
    throw Error(Errc::malformed_line, where + "missing \"vector\" array");

  EmbeddingRecord rec;
  rec.vector.reserve(vit->size());
  for (const auto& v : *vit) {
    if (!v.is_number()) throw Error(Errc::malformed_line, where + "vector entry is not a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw Error(Errc::non_finite_value, where + "non-finite vector entry");
    rec.vector.push_back(x);
  }
  if (rec.vector.empty()) throw Error(Errc::empty_vector, where + "empty vector");

  if (auto it = obj.find("id"); it != obj.end() && !it->is_null()) {
    if (it->is_string())
      rec.id = it->get<std::string>();
    else if (it->is_number_integer())
      rec.id = it->dump();
    else
      throw Error(Errc::malformed_line, where + "\"id\" must be a string");
    if (rec.id.empty()) throw Error(Errc::malformed_line, where + "empty \"id\"");
  } else {
    rec.id = std::to_string(line_index);
  }
  if (auto it = obj.find("label"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw Error(Errc::malformed_line, where + "\"label\" must be a string");
    rec.label = it->get<std::string>();
  }
  if (auto it = obj.find("meta"); it != obj.end() && !it->is_null()) {
    if (!it->is_object()) throw Error(Errc::malformed_line, where + "\"meta\" must be an object");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_string())
        throw Error(Errc::malformed_line, where + "meta value for '" + k + "' is not a string");
      rec.meta.emplace(k, v.get<std::string>());
    }
  }
  return rec;
}

inline nlohmann::json to_json(const EmbeddingRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["vector"] = r.vector;
  if (r.label) j["label"] = *r.label;
  if (!r.meta.empty()) j["meta"] = r.meta;
  return j;
}

/// Reads a JSON Lines stream. Blank lines are skipped but still advance the
/// line index used for default ids.
inline EmbeddingSet read_set(std::istream& in) {
  std::vector<EmbeddingRecord> records;
  std::string line;
  std::size_t index = 0;
  std::size_t dimension = 0;
  for (; std::getline(in, line); ++index) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto rec = parse_record(line, index);
    if (records.empty()) {
      dimension = rec.vector.size();
    } else if (rec.vector.size() != dimension) {
      throw Error(Errc::dimension_mismatch,
                  "line " + std::to_string(index + 1) + ": dimension " +
                      std::to_string(rec.vector.size()) + ", expected " +
                      std::to_string(dimension));
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw Error(Errc::empty_set, "no records in input");
  return EmbeddingSet(std::move(records));
}

inline EmbeddingSet load_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open '" + path + "' for reading");
  try {
    return read_set(in);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

inline void write_set(const EmbeddingSet& set, std::ostream& out) {
  for (const auto& r : set) out << to_json(r).dump() << '\n';
}

/// Writes one record per line; doubles use shortest round-trip rendering.
inline void write_set(const EmbeddingSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot open '" + path + "' for writing");
  write_set(set, out);
  out.flush();
  if (!out) throw Error(Errc::io_error, "write to '" + path + "' failed");
}

/// Records named by `ids`, in the set's original relative order.
inline EmbeddingSet subset(const EmbeddingSet& set, std::span<const std::string> ids) {
  std::unordered_map<std::string_view, std::size_t> position;
  position.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) position.emplace(set[i].id, i);
  std::vector<bool> keep(set.size(), false);
  for (const auto& id : ids) {
    auto it = position.find(id);
    if (it == position.end()) throw Error(Errc::unknown_id, "unknown id '" + id + "'");
    keep[it->second] = true;
  }
  std::vector<EmbeddingRecord> out;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (keep[i]) out.push_back(set[i]);
  return EmbeddingSet(std::move(out));
}

/// `a` followed by `b`; ids must stay unique.
inline EmbeddingSet concat(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.dimension() != b.dimension())
    throw Error(Errc::dimension_mismatch, "cannot concatenate sets of dimension " +
                                              std::to_string(a.dimension()) + " and " +
                                              std::to_string(b.dimension()));
  std::vector<EmbeddingRecord> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return EmbeddingSet(std::move(out));
}

/// Builds a set from bare vectors with ids "<prefix>0", "<prefix>1", ...
inline EmbeddingSet make_set(const std::vector<std::vector<double>>& vectors,
                             const std::string& prefix = "") {
  std::vector<EmbeddingRecord> out;
  out.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i)
    out.push_back({prefix + std::to_string(i), vectors[i], std::nullopt, {}});
  return EmbeddingSet(std::move(out));
}

}  // namespace divsat
