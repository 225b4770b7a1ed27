#include "rml/descriptor.hpp"

#include <charconv>
#include <stdexcept>

namespace rml {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

namespace {

double parse_plain(const std::string& text) {
  const std::string t = trim(text);
  double value = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (t.empty() || ec != std::errc() || ptr != last) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return value;
}

}  // namespace

double parse_number(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_plain(text);
  const double num = parse_plain(text.substr(0, slash));
  const double den = parse_plain(text.substr(slash + 1));
  if (den == 0.0) throw std::invalid_argument("zero denominator in '" + text + "'");
  return num / den;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Descriptor Descriptor::parse(const std::string& text) {
  Descriptor d;
  const std::string t = trim(text);
  const auto colon = t.find(':');
  d.name = trim(t.substr(0, colon));
  if (d.name.empty()) throw std::invalid_argument("empty descriptor name in '" + text + "'");
  if (colon == std::string::npos) return d;
  for (const auto& item : split(t.substr(colon + 1), ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("expected key=value in descriptor '" + text + "', got '" +
                                  item + "'");
    }
    const std::string key = trim(item.substr(0, eq));
    if (d.params.count(key)) {
      throw std::invalid_argument("duplicate key '" + key + "' in descriptor '" + text + "'");
    }
    d.params[key] = trim(item.substr(eq + 1));
  }
  return d;
}

double Descriptor::number(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end()) {
    throw std::invalid_argument("descriptor '" + name + "' is missing parameter '" + key + "'");
  }
  return parse_number(it->second);
}

double Descriptor::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::vector<double> Descriptor::numbers(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end()) {
    throw std::invalid_argument("descriptor '" + name + "' is missing parameter '" + key + "'");
  }
  std::vector<double> out;
  for (const auto& item : split(it->second, '|')) out.push_back(parse_number(item));
  return out;
}

void Descriptor::require_only(const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : params) {
    bool ok = false;
    for (const auto& a : allowed) ok = ok || a == key;
    if (!ok) {
      throw std::invalid_argument("unknown parameter '" + key + "' for '" + name + "'");
    }
  }
}

}  // namespace rml
