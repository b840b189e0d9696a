#include "tsalab/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tsalab {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_doubles(const double* data, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += format_double(data[i]);
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view token, std::string_view key) {
  std::string tmp(token);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || tmp.empty()) {
    throw Error(ErrorCode::ParseError, "key '" + std::string(key) + "': not a number: '" + tmp + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view token, std::string_view key) {
  std::int64_t v = 0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorCode::ParseError, "key '" + std::string(key) + "': not an integer: '" + std::string(token) + "'");
  }
  return v;
}

}  // namespace

KeyValueFile KeyValueFile::parse(std::string_view text) {
  KeyValueFile kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": empty key");
    if (kv.has(key)) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
    }
    kv.entries_.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string KeyValueFile::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

void KeyValueFile::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << serialize();
}

bool KeyValueFile::has(std::string_view key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

const std::string& KeyValueFile::get(std::string_view key) const {
  for (const auto& e : entries_)
    if (e.first == key) return e.second;
  throw Error(ErrorCode::ParseError, "missing key '" + std::string(key) + "'");
}

std::string KeyValueFile::get_or(std::string_view key, std::string_view fallback) const {
  return has(key) ? get(key) : std::string(fallback);
}

double KeyValueFile::get_double(std::string_view key) const { return parse_double(get(key), key); }

double KeyValueFile::get_double_or(std::string_view key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t KeyValueFile::get_int(std::string_view key) const { return parse_int(get(key), key); }

std::int64_t KeyValueFile::get_int_or(std::string_view key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t KeyValueFile::get_uint64_or(std::string_view key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string& s = get(key);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError, "key '" + std::string(key) + "': not an unsigned integer");
  }
  return v;
}

bool KeyValueFile::get_bool_or(std::string_view key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& s = get(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw Error(ErrorCode::ParseError, "key '" + std::string(key) + "': not a boolean: '" + s + "'");
}

std::vector<std::string> KeyValueFile::get_words(std::string_view key) const {
  std::vector<std::string> out;
  std::istringstream in(get(key));
  std::string w;
  while (in >> w) {
    // Commas are accepted as separators too.
    std::size_t start = 0;
    while (start <= w.size()) {
      const auto comma = w.find(',', start);
      const auto piece = w.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!piece.empty()) out.push_back(piece);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return out;
}

std::vector<double> KeyValueFile::get_doubles(std::string_view key) const {
  std::vector<double> out;
  for (const auto& w : get_words(key)) out.push_back(parse_double(w, key));
  return out;
}

std::vector<std::int64_t> KeyValueFile::get_ints(std::string_view key) const {
  std::vector<std::int64_t> out;
  for (const auto& w : get_words(key)) out.push_back(parse_int(w, key));
  return out;
}

Matrix KeyValueFile::get_matrix(std::string_view key, Eigen::Index rows, Eigen::Index cols) const {
  const auto v = get_doubles(key);
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
    throw Error(ErrorCode::ParseError, "key '" + std::string(key) + "': expected " + std::to_string(rows * cols) +
                                           " entries, got " + std::to_string(v.size()));
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v[static_cast<std::size_t>(i * cols + j)];
  return m;
}

Vector KeyValueFile::get_vector(std::string_view key, Eigen::Index size) const {
  return get_matrix(key, size, 1).col(0);
}

void KeyValueFile::set(std::string_view key, std::string value) {
  for (auto& e : entries_) {
    if (e.first == key) {
      e.second = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::string(key), std::move(value));
}

void KeyValueFile::set_matrix(std::string_view key, const Matrix& m) {
  std::vector<double> row_major;
  row_major.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) row_major.push_back(m(i, j));
  set(key, format_doubles(row_major.data(), row_major.size()));
}

void KeyValueFile::set_vector(std::string_view key, const Vector& v) { set(key, format_doubles(v.data(), v.size())); }

}  // namespace tsalab
