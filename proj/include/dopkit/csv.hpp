#pragma once

// Minimal CSV reading/writing. Fields in this toolkit's formats never contain
// commas or quotes, so no quoting layer is needed.

#include <charconv>
#include <sstream>
#include <string>
#include <vector>

#include "dopkit/errors.hpp"

namespace dopkit::csv {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Rows of the document, header included. Skips blank lines and trailing \r.
inline std::vector<std::vector<std::string>> parse(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_line(line));
  }
  return rows;
}

inline double to_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw MalformedDocument("trailing characters in numeric field: " + s);
    return v;
  } catch (const std::invalid_argument&) {
    throw MalformedDocument("expected a number, got: " + s);
  } catch (const std::out_of_range&) {
    throw MalformedDocument("number out of range: " + s);
  }
}

inline long to_long(const std::string& s) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw MalformedDocument("trailing characters in integer field: " + s);
    return v;
  } catch (const std::invalid_argument&) {
    throw MalformedDocument("expected an integer, got: " + s);
  } catch (const std::out_of_range&) {
    throw MalformedDocument("integer out of range: " + s);
  }
}

// Shortest representation that round-trips the double exactly.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace dopkit::csv
