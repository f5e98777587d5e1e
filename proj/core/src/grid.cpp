#include "pdmp/grid.hpp"

#include <cmath>

#include "pdmp/errors.hpp"

namespace pdmp {

StateGrid::StateGrid(Box box, std::vector<std::size_t> nodes_per_dim)
    : box_(std::move(box)), nodes_(std::move(nodes_per_dim)) {
  if (nodes_.size() != box_.dim() || nodes_.empty()) {
    throw ArgumentError("grid needs one node count per box dimension");
  }
  total_ = 1;
  for (std::size_t d = nodes_.size(); d-- > 0;) {
    if (nodes_[d] == 0) throw ArgumentError("grid node counts must be positive");
    if (!(box_.hi[d] >= box_.lo[d])) throw ArgumentError("grid box has hi < lo");
    stride_[d] = total_;
    total_ *= nodes_[d];
    spacing_[d] = nodes_[d] > 1 ? (box_.hi[d] - box_.lo[d]) / static_cast<double>(nodes_[d] - 1) : 0.0;
  }
}

StateGrid StateGrid::single(const Box& box) { return StateGrid(box, std::vector<std::size_t>(box.dim(), 1)); }

StateVec StateGrid::node(std::size_t flat) const {
  const auto multi = multi_index(flat);
  StateVec x(dim());
  for (std::size_t d = 0; d < dim(); ++d) {
    // Last node lands exactly on the upper face.
    x[d] = multi[d] + 1 == nodes_[d] && nodes_[d] > 1 ? box_.hi[d]
                                                      : box_.lo[d] + static_cast<double>(multi[d]) * spacing_[d];
  }
  return x;
}

std::size_t StateGrid::flat_index(std::span<const std::size_t> multi) const {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < dim(); ++d) flat += multi[d] * stride_[d];
  return flat;
}

std::array<std::size_t, kMaxStateDim> StateGrid::multi_index(std::size_t flat) const {
  std::array<std::size_t, kMaxStateDim> multi{};
  for (std::size_t d = 0; d < dim(); ++d) {
    multi[d] = flat / stride_[d];
    flat %= stride_[d];
  }
  return multi;
}

std::size_t StateGrid::nearest_node(const StateVec& x) const {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < dim(); ++d) {
    if (nodes_[d] == 1) continue;
    const double r = std::round((x[d] - box_.lo[d]) / spacing_[d]);
    const auto i = static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(nodes_[d] - 1)));
    flat += i * stride_[d];
  }
  return flat;
}

Stencil StateGrid::stencil(const StateVec& x) const {
  std::array<std::size_t, kMaxStateDim> base{};
  std::array<double, kMaxStateDim> frac{};
  std::array<bool, kMaxStateDim> active{};
  std::size_t active_dims = 0;
  for (std::size_t d = 0; d < dim(); ++d) {
    if (nodes_[d] == 1) continue;
    const double s = std::clamp((x[d] - box_.lo[d]) / spacing_[d], 0.0, static_cast<double>(nodes_[d] - 1));
    std::size_t i = static_cast<std::size_t>(s);
    if (i >= nodes_[d] - 1) i = nodes_[d] - 2;
    base[d] = i;
    frac[d] = s - static_cast<double>(i);
    active[d] = true;
    ++active_dims;
  }
  Stencil st;
  st.count = std::size_t{1} << active_dims;
  for (std::size_t corner = 0; corner < st.count; ++corner) {
    std::size_t flat = 0;
    double w = 1.0;
    std::size_t bit = 0;
    for (std::size_t d = 0; d < dim(); ++d) {
      if (!active[d]) continue;
      const bool upper = (corner >> bit++) & 1u;
      flat += (base[d] + (upper ? 1 : 0)) * stride_[d];
      w *= upper ? frac[d] : 1.0 - frac[d];
    }
    st.index[corner] = flat;
    st.weight[corner] = w;
  }
  return st;
}

bool StateGrid::operator==(const StateGrid& other) const {
  return box_.lo == other.box_.lo && box_.hi == other.box_.hi && nodes_ == other.nodes_;
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (count == 0) throw ArgumentError("linspace needs at least one level");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  if (count > 1) out.back() = hi;
  return out;
}

namespace {

void product(const std::vector<std::vector<double>>& levels, std::size_t d, ControlVec& current,
             std::vector<ControlVec>& out) {
  if (d == levels.size()) {
    out.push_back(current);
    return;
  }
  for (double value : levels[d]) {
    current[d] = value;
    product(levels, d + 1, current, out);
  }
}

std::vector<ControlVec> product(const std::vector<std::vector<double>>& levels) {
  std::vector<ControlVec> out;
  ControlVec current(levels.size());
  product(levels, 0, current, out);
  return out;
}

}  // namespace

std::vector<ControlPoint> control_grid(const std::vector<std::vector<double>>& u_levels,
                                       const std::vector<std::vector<double>>& v_levels) {
  std::vector<ControlPoint> out;
  for (const ControlVec& u : product(u_levels)) {
    for (const ControlVec& v : product(v_levels)) out.push_back({u, v});
  }
  return out;
}

}  // namespace pdmp
