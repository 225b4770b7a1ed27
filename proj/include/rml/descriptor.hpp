#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rml {

// "name:key=value,key=value". Values may be plain numbers, fractions such as
// "1/3", or '|'-separated lists.
struct Descriptor {
  std::string name;
  std::map<std::string, std::string> params;

  static Descriptor parse(const std::string& text);

  bool has(const std::string& key) const { return params.count(key) != 0; }
  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  /// Throws if a parameter outside `allowed` is present.
  void require_only(const std::vector<std::string>& allowed) const;
};

/// Parses "0.25", "1e-3" or "1/3". Throws std::invalid_argument on garbage.
double parse_number(const std::string& text);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace rml
