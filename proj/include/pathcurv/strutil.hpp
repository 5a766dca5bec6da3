#pragma once

#include <charconv>
#include <cstdio>
#include <string>

namespace pathcurv {

// Shortest round-trip decimal form; reruns must produce identical bytes, so
// all numeric output funnels through here.
inline std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string format_int(long long x) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace pathcurv
