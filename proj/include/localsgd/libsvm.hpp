/*
 * Copyright 2026 The localsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace localsgd {

/// Sparse labelled rows in CSR layout. Feature indices are 0-based, labels in {0, 1}.
class Dataset {
 public:
  Dataset() : row_ptr_{0} {}

  std::size_t rows() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t nonzeros() const { return cols_.size(); }

  int label(std::size_t row) const { return labels_[row]; }
  std::span<const int> labels() const { return labels_; }

  std::span<const std::uint32_t> row_indices(std::size_t row) const {
    return std::span(cols_).subspan(row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]);
  }
  std::span<const double> row_values(std::size_t row) const {
    return std::span(vals_).subspan(row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]);
  }

  double row_dot(std::size_t row, std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) s += vals_[k] * x[cols_[k]];
    return s;
  }

  /// y += alpha * A_row
  void row_axpy(std::size_t row, double alpha, std::span<double> y) const {
    for (std::size_t k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) y[cols_[k]] += alpha * vals_[k];
  }

  void add_row(int label, std::span<const std::uint32_t> cols, std::span<const double> vals) {
    labels_.push_back(label);
    cols_.insert(cols_.end(), cols.begin(), cols.end());
    vals_.insert(vals_.end(), vals.begin(), vals.end());
    row_ptr_.push_back(cols_.size());
  }

  void set_dim(std::size_t d) { dim_ = d; }

 private:
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> cols_;
  std::vector<double> vals_;
  std::vector<int> labels_;
  std::size_t dim_ = 0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::optional<double> parse_real(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> parse_index(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

}  // namespace detail

/// Parses LIBSVM text: one `<label> <idx>:<val> ...` row per non-blank line,
/// 1-based strictly increasing indices. Labels -1/+1 map to 0/1; 0/1 pass through.
/// `dim_override` fixes d; it must cover every index seen.
inline Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> dim_override = std::nullopt) {
  Dataset data;
  std::size_t max_index = 0;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;

  while (std::getline(in, line)) {
    ++lineno;
    std::string_view rest(line);
    std::vector<std::string_view> tokens;
    while (!rest.empty()) {
      std::size_t b = 0;
      while (b < rest.size() && detail::is_space(rest[b])) ++b;
      std::size_t e = b;
      while (e < rest.size() && !detail::is_space(rest[e])) ++e;
      if (e > b) tokens.push_back(rest.substr(b, e - b));
      rest.remove_prefix(e);
    }
    if (tokens.empty()) continue;

    const auto label = detail::parse_real(tokens[0]);
    if (!label) throw ParseError(lineno, "malformed label '" + std::string(tokens[0]) + "'");
    int mapped = 0;
    if (*label == 1.0) {
      mapped = 1;
    } else if (*label == -1.0 || *label == 0.0) {
      mapped = 0;
    } else {
      throw ParseError(lineno, "label must be one of -1, 0, +1; got '" + std::string(tokens[0]) + "'");
    }

    cols.clear();
    vals.clear();
    std::uint64_t prev = 0;
    for (std::size_t k = 1; k < tokens.size(); ++k) {
      const auto tok = tokens[k];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(lineno, "malformed feature token '" + std::string(tok) + "'");
      }
      const auto idx = detail::parse_index(tok.substr(0, colon));
      const auto val = detail::parse_real(tok.substr(colon + 1));
      if (!idx || !val) throw ParseError(lineno, "malformed feature token '" + std::string(tok) + "'");
      if (*idx < 1) throw ParseError(lineno, "feature index must be >= 1");
      if (*idx <= prev) {
        throw ParseError(lineno, "feature indices must be strictly increasing (" +
                                     std::to_string(*idx) + " after " + std::to_string(prev) + ")");
      }
      if (*idx > UINT32_MAX) throw ParseError(lineno, "feature index too large");
      prev = *idx;
      cols.push_back(static_cast<std::uint32_t>(*idx - 1));
      vals.push_back(*val);
    }
    if (prev > max_index) max_index = prev;
    data.add_row(mapped, cols, vals);
  }

  if (dim_override) {
    if (*dim_override < max_index) {
      throw ParseError(lineno, "dimension override " + std::to_string(*dim_override) +
                                   " is below max feature index " + std::to_string(max_index));
    }
    data.set_dim(*dim_override);
  } else {
    data.set_dim(max_index);
  }
  return data;
}

inline Dataset parse_libsvm(std::string_view text, std::optional<std::size_t> dim_override = std::nullopt) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in, dim_override);
}

inline Dataset load_libsvm(const std::string& path, std::optional<std::size_t> dim_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return parse_libsvm(in, dim_override);
}

}  // namespace localsgd
