#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/grid.hpp"
#include "pdmp/model.hpp"
#include "pdmp/policy.hpp"

namespace pdmp {

/// Values per mode over a uniform grid on K, for the stepped policy class
/// with parameter n and the finite control set `controls`.
struct ValueTable {
  StateGrid grid;
  double delta = 0.0;
  unsigned n = 1;
  std::vector<ControlPoint> controls;
  std::vector<std::vector<double>> values;       ///< [mode][node]
  std::vector<std::vector<std::uint32_t>> argmin;  ///< [mode][node] index into controls; may be empty

  std::size_t mode_count() const { return values.size(); }
  /// Multilinear interpolation in mode `mode`.
  double value(ModeId mode, const StateVec& x) const;
  double sup_norm() const;
};

/// Zero table shaped for the model and grid.
ValueTable make_table(const Model& model, const StateGrid& grid, double delta, unsigned n,
                      std::vector<ControlPoint> controls);

double sup_distance(const ValueTable& a, const ValueTable& b);

enum class BellmanScheme {
  /// Iterate the one-cell operator: control frozen on (0, 1/n], jump or
  /// continue. Cheap per iteration; contracts with modulus
  /// 1 - delta/(lambda_max+delta) (1 - e^{-(lambda_max+delta)/n}).
  kTimeStep,
  /// Iterate over the number of jumps: each outer step solves the
  /// deterministic problem up to the first jump, with the previous iterate
  /// as the post-jump value. Contracts with modulus lambda_max/(delta+lambda_max).
  kJumpRecursion,
};

struct SolverOptions {
  BellmanScheme scheme = BellmanScheme::kTimeStep;
  double max_substep = 0.1;     ///< RK4 substep bound inside one cell of length 1/n
  double jump_tolerance = 1e-9; ///< farther outside K than this is an error
  double inner_tolerance_ratio = 1e-4;  ///< inner stop: change <= ratio * last outer change
  std::size_t max_iterations = 1'000'000;
  std::size_t threads = 1;  ///< 0 means hardware concurrency
  bool check_contraction = true;
};

/// The discrete dynamic-programming operator for one (model, grid, delta,
/// n, controls), with flows, survival weights and interpolation stencils
/// precomputed once.
class BellmanOperator {
 public:
  BellmanOperator(const Model& model, StateGrid grid, double delta, unsigned n, std::vector<ControlPoint> controls,
                  const SolverOptions& options = {});
  ~BellmanOperator();
  BellmanOperator(BellmanOperator&&) noexcept;
  BellmanOperator& operator=(BellmanOperator&&) noexcept;

  /// One application of the one-cell operator: out = B(in).
  void apply(const std::vector<std::vector<double>>& in, std::vector<std::vector<double>>& out,
             std::vector<std::vector<std::uint32_t>>* argmin = nullptr) const;

  /// One outer step of the jump recursion: out solves the deterministic
  /// problem with `previous` as post-jump value. `out` on entry is the
  /// warm start of the inner iteration. Returns inner iterations used.
  std::size_t apply_jump_recursion(const std::vector<std::vector<double>>& previous,
                                   std::vector<std::vector<double>>& out, double inner_tolerance,
                                   std::vector<std::vector<std::uint32_t>>* argmin = nullptr) const;

  /// Modulus of the scheme's iteration in sup norm.
  double contraction_bound(BellmanScheme scheme) const;

  const StateGrid& grid() const;
  std::size_t mode_count() const;
  std::size_t term_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One application of the one-cell operator to `table`.
ValueTable bellman_step(const Model& model, const ValueTable& table, const SolverOptions& options = {});

struct IterationRecord {
  std::size_t iteration = 0;
  double sup_change = 0.0;
  double ratio = 0.0;  ///< sup_change / previous sup_change (0 on the first iteration)
  std::size_t inner_iterations = 0;
};

struct SolveResult {
  ValueTable table;
  std::vector<IterationRecord> log;
  /// Modulus of the outer iteration. For the jump recursion it includes the
  /// slack 2 r e^{-delta/n} / (1 - e^{-delta/n}) of inner solves stopped at
  /// r = inner_tolerance_ratio times the last outer change; without jumps the
  /// inner problem is solved to tol and the modulus is zero.
  double contraction_bound = 0.0;
  std::size_t iteration_bound = 0;
  BellmanScheme scheme = BellmanScheme::kTimeStep;
};

/// Iterates from w = 0 (or `initial`) until the sup-norm change is <= tol.
/// Throws ConvergenceError when the ratio exceeds the scheme's modulus by
/// more than 0.05 three times in a row or the iteration bound is exceeded.
SolveResult solve_discounted(const Model& model, double delta, unsigned n, const std::vector<ControlPoint>& controls,
                             const StateGrid& grid, double tol, const SolverOptions& options = {},
                             const ValueTable* initial = nullptr);

/// Largest |v(gamma, x) - v(gamma, y)| / |x - y| over axis neighbours.
double discrete_lipschitz(const ValueTable& table);

/// Stepped feedback policy taking at each cell start the table's argmin
/// control at the nearest node.
Policy greedy_policy(const ValueTable& table);

struct StepStudyRow {
  unsigned n = 0;
  double sup_difference = 0.0;  ///< sup |v^{delta,n} - v^{delta,n_max}|
  std::size_t iterations = 0;
  double value_sup = 0.0;
  double error_bound = 0.0;  ///< tol * alpha / (1 - alpha): distance of the stopped iterate to the fixed point
};

/// Solves for each n (increasing list) on one grid and compares with the
/// finest; coarser solves start from the finer solution.
std::vector<StepStudyRow> step_convergence_study(const Model& model, double delta, const std::vector<unsigned>& n_list,
                                                 const std::vector<ControlPoint>& controls, const StateGrid& grid,
                                                 double tol, const SolverOptions& options = {});

struct HjbResidual {
  std::vector<std::vector<double>> residual;  ///< [mode][node]
  std::vector<bool> interior;                 ///< per node
  double sup_interior = 0.0;
};

/// delta v + H(gamma, x, D v, v) with central differences at interior
/// nodes (one-sided on faces, which are excluded from the sup).
HjbResidual hjb_residual(const Model& model, const ValueTable& table);

/// Columns mode_id, i_1.., x_1.., value.
void write_table_csv(std::ostream& out, const ValueTable& table);
/// delta, n, grid box and node counts, controls.
std::string table_header_json(const ValueTable& table);

}  // namespace pdmp
