#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace pdmp {

inline constexpr std::size_t kMaxStateDim = 3;
inline constexpr std::size_t kMaxControlDim = 2;
inline constexpr std::size_t kMaxModes = 8;

using ModeId = std::size_t;

/// Fixed-capacity real vector with value semantics. Keeps per-substep
/// arithmetic allocation free; the dimensions in play are tiny.
template <std::size_t Capacity>
class SmallVec {
 public:
  SmallVec() = default;

  explicit SmallVec(std::size_t n, double fill = 0.0) : size_(n) {
    if (n > Capacity) throw std::length_error("SmallVec capacity exceeded");
    std::fill_n(data_.begin(), n, fill);
  }

  SmallVec(std::initializer_list<double> values) : size_(values.size()) {
    if (values.size() > Capacity) throw std::length_error("SmallVec capacity exceeded");
    std::copy(values.begin(), values.end(), data_.begin());
  }

  static SmallVec from_span(std::span<const double> values) {
    SmallVec out(values.size());
    std::copy(values.begin(), values.end(), out.data_.begin());
    return out;
  }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  static constexpr std::size_t capacity() { return Capacity; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* begin() { return data_.data(); }
  double* end() { return data_.data() + size_; }
  const double* begin() const { return data_.data(); }
  const double* end() const { return data_.data() + size_; }

  std::span<const double> span() const { return {data_.data(), size_}; }

  bool operator==(const SmallVec& other) const {
    return size_ == other.size_ && std::equal(begin(), end(), other.begin());
  }

 private:
  std::array<double, Capacity> data_{};
  std::size_t size_ = 0;
};

using StateVec = SmallVec<kMaxStateDim>;
using ControlVec = SmallVec<kMaxControlDim>;
using ModeDistribution = SmallVec<kMaxModes>;

inline StateVec operator+(StateVec a, const StateVec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline StateVec operator-(StateVec a, const StateVec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

inline StateVec operator*(double s, StateVec a) {
  for (double& x : a) x *= s;
  return a;
}

inline double dot(const StateVec& a, const StateVec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const StateVec& a) { return std::sqrt(dot(a, a)); }

inline double distance(const StateVec& a, const StateVec& b) { return norm(a - b); }

inline bool all_finite(const StateVec& a) {
  return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

/// A point (u, v) of U x V. A single-control model leaves `v` empty.
struct ControlPoint {
  ControlVec u;
  ControlVec v;

  bool operator==(const ControlPoint&) const = default;
};

/// Axis-aligned box; used both for the invariant set and the control sets.
template <std::size_t Capacity>
struct BasicBox {
  SmallVec<Capacity> lo;
  SmallVec<Capacity> hi;

  std::size_t dim() const { return lo.size(); }

  bool contains(const SmallVec<Capacity>& x, double tol = 0.0) const {
    if (x.size() != lo.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    }
    return true;
  }

  SmallVec<Capacity> clamp(SmallVec<Capacity> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
    return x;
  }

  /// Largest per-coordinate violation; zero when inside.
  double excess(const SmallVec<Capacity>& x) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      worst = std::max({worst, lo[i] - x[i], x[i] - hi[i]});
    }
    return worst;
  }
};

using Box = BasicBox<kMaxStateDim>;
using ControlBox = BasicBox<kMaxControlDim>;

std::string to_string(const StateVec& x);
std::string to_string(const ControlPoint& c);

}  // namespace pdmp
