#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "pdmp/types.hpp"

namespace pdmp {

/// Multilinear interpolation weights over the 2^N corners of one cell.
struct Stencil {
  std::array<std::size_t, 1u << kMaxStateDim> index{};
  std::array<double, 1u << kMaxStateDim> weight{};
  std::size_t count = 0;

  template <typename Values>
  double apply(const Values& values) const {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += weight[i] * values[index[i]];
    return s;
  }
};

/// Uniform tensor grid of nodes covering a box exactly (first and last node
/// on the faces). Node 0 varies slowest in the first coordinate.
class StateGrid {
 public:
  StateGrid() = default;
  StateGrid(Box box, std::vector<std::size_t> nodes_per_dim);

  /// Single-node grid on the box (every state maps to node 0).
  static StateGrid single(const Box& box);

  std::size_t dim() const { return box_.dim(); }
  const Box& box() const { return box_; }
  const std::vector<std::size_t>& nodes_per_dim() const { return nodes_; }
  std::size_t node_count() const { return total_; }
  double spacing(std::size_t d) const { return spacing_[d]; }

  StateVec node(std::size_t flat) const;
  std::size_t flat_index(std::span<const std::size_t> multi) const;
  std::array<std::size_t, kMaxStateDim> multi_index(std::size_t flat) const;
  std::size_t stride(std::size_t d) const { return stride_[d]; }

  std::size_t nearest_node(const StateVec& x) const;
  /// Corners and weights for multilinear interpolation; x is clamped to the box.
  Stencil stencil(const StateVec& x) const;

  bool operator==(const StateGrid& other) const;

 private:
  Box box_;
  std::vector<std::size_t> nodes_;
  std::array<double, kMaxStateDim> spacing_{};
  std::array<std::size_t, kMaxStateDim> stride_{};
  std::size_t total_ = 0;
};

/// Evenly spaced levels on [lo, hi]; one level means {lo}.
std::vector<double> linspace(double lo, double hi, std::size_t count);

/// Cartesian product of per-coordinate level sets for u and for v. An empty
/// level list for a zero-dimensional control set is allowed.
std::vector<ControlPoint> control_grid(const std::vector<std::vector<double>>& u_levels,
                                       const std::vector<std::vector<double>>& v_levels);

}  // namespace pdmp
