#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tsalab/matlib.hpp"

namespace tsalab {

/// Shortest-safe decimal form for exact round trips (17 significant digits).
std::string format_double(double v);
std::string format_doubles(const double* data, std::size_t n);

/// Flat "key = value" text with '#' comments, used for run configs and for
/// the system / MDP instance files. Keys keep their insertion order so that
/// serialize() is stable and diff-friendly.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::string_view text);
  static KeyValueFile load(const std::filesystem::path& path);

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  bool has(std::string_view key) const;
  const std::string& get(std::string_view key) const;
  std::string get_or(std::string_view key, std::string_view fallback) const;

  double get_double(std::string_view key) const;
  double get_double_or(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key) const;
  std::int64_t get_int_or(std::string_view key, std::int64_t fallback) const;
  std::uint64_t get_uint64_or(std::string_view key, std::uint64_t fallback) const;
  bool get_bool_or(std::string_view key, bool fallback) const;
  std::vector<double> get_doubles(std::string_view key) const;
  std::vector<std::int64_t> get_ints(std::string_view key) const;
  std::vector<std::string> get_words(std::string_view key) const;

  Matrix get_matrix(std::string_view key, Eigen::Index rows, Eigen::Index cols) const;
  Vector get_vector(std::string_view key, Eigen::Index size) const;

  void set(std::string_view key, std::string value);
  void set_double(std::string_view key, double v) { set(key, format_double(v)); }
  void set_matrix(std::string_view key, const Matrix& m);
  void set_vector(std::string_view key, const Vector& v);

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace tsalab
