#pragma once

#include <algorithm>
#include <cmath>

namespace fd {

template <typename F>
double central(F&& f, double at, double h) {
  return (f(at + h) - f(at - h)) / (2 * h);
}

// |a - b| <= max(rel * |b|, abs_floor)
inline bool close(double a, double b, double rel, double abs_floor) {
  return std::abs(a - b) <= std::max(rel * std::abs(b), abs_floor);
}

}  // namespace fd
