#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ia/error.hpp"

namespace ia::strutil {

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
std::string join(const std::vector<std::string>& parts, const std::string& sep);

int64_t parse_int(const std::string& s, const std::string& what);
double parse_double(const std::string& s, const std::string& what);
bool parse_bool(const std::string& s, const std::string& what);

std::vector<int> parse_int_list(const std::string& s, const std::string& what);
std::string int_list_str(const std::vector<int>& v);

}  // namespace ia::strutil
