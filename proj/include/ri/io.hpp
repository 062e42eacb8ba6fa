#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ri/baselines.hpp"
#include "ri/data.hpp"
#include "ri/model1.hpp"
#include "ri/model2.hpp"

namespace ri::io {

/// A "key = value" document: one pair per line, '#' starts a comment,
/// blank lines ignored, duplicate keys rejected.
struct KvFile {
  std::vector<std::pair<std::string, std::string>> items;

  const std::string* find(const std::string& key) const;
  bool has(const std::string& key) const { return find(key) != nullptr; }

  /// Typed getters; the non-_or forms throw when the key is missing, all
  /// throw on unparseable values (naming the key).
  std::string get_string(const std::string& key) const;
  std::string get_string_or(const std::string& key, const std::string& dflt) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double dflt) const;
  long get_long(const std::string& key) const;
  long get_long_or(const std::string& key, long dflt) const;
  std::uint64_t get_u64_or(const std::string& key, std::uint64_t dflt) const;
  bool get_bool_or(const std::string& key, bool dflt) const;

  /// Throws naming the first key not in the allowed list.
  void require_known(std::span<const std::string> allowed) const;

  void set(const std::string& key, const std::string& value);
};

KvFile parse_kv(const std::string& text);
KvFile load_kv(const std::string& path);
std::string kv_to_text(const KvFile& kv);
void save_kv(const std::string& path, const KvFile& kv);

/// One persisted model of any supported type, optionally carrying the
/// standardizer its inputs must pass through. Exactly one of the payload
/// members matching `type` is engaged.
struct StoredModel {
  std::string type;  // model1 | model2 | logistic | mlp | oracle
  std::optional<data::Standardizer> standardizer;
  std::optional<model1::Model1Params> m1;
  std::optional<model2::Model2Params> m2;
  std::optional<baselines::LogisticModel> logistic;
  std::optional<nn::MlpParams> mlp;
  std::optional<data::SynthOracle> oracle;
};

/// Versioned self-describing text format (first line "ri-model 1"): field
/// names, dimensions, and row-major value lists at 17 significant digits,
/// so a reload reproduces every parameter bit for bit.
void save_model(const std::string& path, const StoredModel& m);
StoredModel load_model(const std::string& path);

std::string model_to_text(const StoredModel& m);
StoredModel model_from_text(const std::string& text);

}  // namespace ri::io
