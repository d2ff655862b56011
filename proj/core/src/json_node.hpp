#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopbench/errors.hpp"
#include "loopbench/scenario_io.hpp"

namespace loopbench::detail {

using json = nlohmann::json;

// Parses a document; syntax errors become ParseError with "line L, column C".
inline json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // nlohmann reports the offset one past the offending character and
    // prefixes its own id and position; keep only the reason.
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    const std::string what = e.what();
    const auto col_at = what.find("column ");
    const auto reason = col_at == std::string::npos ? std::string::npos : what.find(": ", col_at);
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                     (reason == std::string::npos ? what : what.substr(reason + 2)));
  } catch (const json::exception& e) {
    // Number overflow and similar lexer failures carry no position.
    const std::string what = e.what();
    const auto bracket = what.find("] ");
    throw ParseError(bracket == std::string::npos ? what : what.substr(bracket + 2));
  }
}

// Read-only view of a JSON value that remembers where it came from.
class Node {
 public:
  Node(const json& value, std::string path, const LoadOptions& options, LoadReport* report)
      : value_(value), path_(std::move(path)), options_(options), report_(report) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return value_; }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_ + ": " + what); }

  void expect_object(std::initializer_list<std::string_view> allowed) const {
    if (!value_.is_object()) fail("expected an object");
    for (const auto& [key, _] : value_.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
      const std::string msg = path_ + "." + key + ": unknown field";
      if (options_.strict) throw ParseError(msg);
      if (report_) report_->warnings.push_back(msg);
    }
  }

  bool has(std::string_view key) const { return value_.is_object() && value_.contains(key); }

  Node at(std::string_view key) const {
    if (!has(key)) fail("missing field '" + std::string(key) + "'");
    return Node(value_.at(std::string(key)), path_ + "." + std::string(key), options_, report_);
  }

  Node at(std::size_t i) const {
    return Node(value_.at(i), path_ + "[" + std::to_string(i) + "]", options_, report_);
  }

  std::size_t array_size() const {
    if (!value_.is_array()) fail("expected an array");
    return value_.size();
  }

  double number() const {
    if (!value_.is_number()) fail("expected a number");
    const double v = value_.get<double>();
    if (!std::isfinite(v)) fail("number is not finite");
    return v;
  }

  int integer() const {
    if (!value_.is_number_integer()) fail("expected an integer");
    return value_.get<int>();
  }

  std::uint64_t unsigned_integer() const {
    if (!value_.is_number_unsigned()) fail("expected a non-negative integer");
    return value_.get<std::uint64_t>();
  }

  bool boolean() const {
    if (!value_.is_boolean()) fail("expected a boolean");
    return value_.get<bool>();
  }

  std::string string() const {
    if (!value_.is_string()) fail("expected a string");
    return value_.get<std::string>();
  }

  std::vector<double> tuple(std::size_t n) const {
    if (array_size() != n) fail("expected " + std::to_string(n) + " numbers");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = at(i).number();
    return out;
  }

 private:
  const json& value_;
  std::string path_;
  const LoadOptions& options_;
  LoadReport* report_;
};

// Invariant errors raised while building a value are rethrown with its path.
template <typename F>
auto with_path(const Node& node, F&& build) {
  try {
    return build();
  } catch (const InvariantError& e) {
    throw ParseError(node.path() + ": " + e.what());
  }
}

}  // namespace loopbench::detail
