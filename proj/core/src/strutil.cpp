#include "ia/strutil.hpp"

#include <cstdlib>

namespace ia::strutil {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

int64_t parse_int(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size()) {
    throw ConfigError(what + ": '" + s + "' is not an integer");
  }
  return static_cast<int64_t>(v);
}

double parse_double(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) {
    throw ConfigError(what + ": '" + s + "' is not a number");
  }
  return v;
}

bool parse_bool(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(what + ": '" + s + "' is not a boolean");
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const std::string& part : split(s, ',')) {
    if (trim(part).empty()) continue;
    out.push_back(static_cast<int>(parse_int(part, what)));
  }
  return out;
}

std::string int_list_str(const std::vector<int>& v) {
  std::vector<std::string> parts;
  parts.reserve(v.size());
  for (int x : v) parts.push_back(std::to_string(x));
  return join(parts, ",");
}

}  // namespace ia::strutil
