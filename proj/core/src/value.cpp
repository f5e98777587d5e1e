#include "pdmp/value.hpp"

#include <array>
#include <cmath>

#include "pdmp/errors.hpp"
#include "pdmp/parallel.hpp"

namespace pdmp {

double abel_horizon(double h_max, double delta, double bias) {
  if (!(delta > 0.0)) throw ArgumentError("discount delta must be positive");
  if (!(bias > 0.0)) throw ArgumentError("truncation bias must be positive");
  if (h_max <= bias) return 0.0;
  return std::log(h_max / bias) / delta;
}

ValueEstimate summarize(const std::vector<double>& samples) {
  ValueEstimate est;
  est.n_paths = samples.size();
  if (samples.empty()) return est;
  // Shifted by the first sample so that equal samples give an exact zero spread.
  const double shift = samples.front();
  const double n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (double s : samples) sum += s - shift;
  const double offset = sum / n;
  est.mean = shift + offset;
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double s : samples) ss += (s - shift - offset) * (s - shift - offset);
    est.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return est;
}

namespace {

using SubstepWeights = std::function<std::array<double, 3>(double, double)>;

/// Simpson accumulation of int h(mode, x, c) against the weights over
/// substeps, plus tail * h at the end of the path.
class CostIntegrator final : public PathObserver {
 public:
  CostIntegrator(const Model& model, SubstepWeights weights, double tail)
      : model_(model), weights_(std::move(weights)), tail_(tail) {}

  void on_substep(const Substep& s) override {
    const auto w = weights_(s.t0, s.t1);
    total_ += w[0] * model_.cost_unchecked(s.mode, s.x0, s.control) +
              w[1] * model_.cost_unchecked(s.mode, s.xm, s.control) +
              w[2] * model_.cost_unchecked(s.mode, s.x1, s.control);
    last_control_ = s.control;
  }

  void on_end(double, ModeId mode, const StateVec& x) override {
    if (tail_ != 0.0) total_ += tail_ * model_.cost_unchecked(mode, x, last_control_);
  }

  double total() const { return total_; }

 private:
  const Model& model_;
  SubstepWeights weights_;
  double tail_;
  ControlPoint last_control_;
  double total_ = 0.0;
};

std::vector<double> integrate_paths(const Model& model, const Policy& policy, ModeId mode0, const StateVec& x0,
                                    double horizon, std::size_t n_paths, std::uint64_t seed,
                                    const EstimatorOptions& options, const SubstepWeights& weights,
                                    double tail) {
  if (n_paths == 0) throw ArgumentError("need at least one path");
  check_start(model, mode0, x0);
  policy.check_against(model);
  std::vector<double> samples(n_paths);
  parallel_for(n_paths, options.threads, [&](std::size_t i) {
    Rng rng({seed, i});
    CostIntegrator integ(model, weights, tail);
    simulate_path(model, mode0, x0, policy, horizon, rng, options.simulation, integ);
    samples[i] = integ.total();
  });
  return samples;
}

double resolve_abel_horizon(const Model& model, double delta, const EstimatorOptions& options) {
  const double h_max = model.bounds().h_max;
  const double needed = abel_horizon(2.0 * h_max, delta, options.bias);
  if (options.horizon_cap > 0.0) {
    if (options.horizon_cap + 1e-12 < needed) {
      throw ArgumentError("horizon cap " + std::to_string(options.horizon_cap) + " leaves a truncation bias above " +
                          std::to_string(options.bias) + "; use a cap of at least " + std::to_string(needed));
    }
    return options.horizon_cap;
  }
  if (needed > options.max_horizon) {
    throw ArgumentError("truncation bias " + std::to_string(options.bias) + " needs horizon " +
                        std::to_string(needed) + " beyond the limit " + std::to_string(options.max_horizon) +
                        "; raise the bias or pass an explicit cap");
  }
  // A positive horizon keeps the simulator's preconditions simple when h_max <= bias.
  return std::max(needed, options.simulation.ode_step);
}

}  // namespace

std::vector<double> abel_samples(const Model& model, const Policy& policy, ModeId mode0, const StateVec& x0,
                                 double delta, double horizon, std::size_t n_paths, std::uint64_t seed,
                                 const EstimatorOptions& options) {
  if (!(delta > 0.0)) throw ArgumentError("discount delta must be positive");
  return integrate_paths(model, policy, mode0, x0, horizon, n_paths, seed, options,
                         [delta](double t0, double t1) { return discounted_simpson_weights(delta, t0, t1); },
                         std::exp(-delta * horizon));
}

ValueEstimate estimate_abel(const Model& model, const Policy& policy, ModeId mode0, const StateVec& x0,
                            double delta, std::size_t n_paths, std::uint64_t seed, const EstimatorOptions& options) {
  if (!(delta > 0.0)) throw ArgumentError("discount delta must be positive");
  const double horizon = resolve_abel_horizon(model, delta, options);
  ValueEstimate est = summarize(abel_samples(model, policy, mode0, x0, delta, horizon, n_paths, seed, options));
  est.truncation_horizon = horizon;
  est.truncation_bias_bound = 2.0 * model.bounds().h_max * std::exp(-delta * horizon);
  return est;
}

ValueEstimate estimate_cesaro(const Model& model, const Policy& policy, ModeId mode0, const StateVec& x0, double T,
                              std::size_t n_paths, std::uint64_t seed, const EstimatorOptions& options) {
  if (!(T > 0.0)) throw ArgumentError("Cesaro horizon T must be positive");
  ValueEstimate est = summarize(integrate_paths(model, policy, mode0, x0, T, n_paths, seed, options,
                                                [T](double t0, double t1) {
                                                  const double w = (t1 - t0) / (6.0 * T);
                                                  return std::array<double, 3>{w, 4.0 * w, w};
                                                },
                                                0.0));
  est.truncation_horizon = T;
  est.truncation_bias_bound = 0.0;
  return est;
}

OptimizationResult optimize_value(const Model& model, const FamilySpec& spec, ModeId mode0, const StateVec& x0,
                                  Objective objective, std::size_t n_paths, std::uint64_t seed,
                                  const EstimatorOptions& options) {
  const PolicyFamily family = enumerate_policy_family(spec, model);
  OptimizationResult result;
  result.table.reserve(family.size());
  for (std::size_t i = 0; i < family.size(); ++i) {
    const Policy p = family.at(i);
    // Same seed for every member: common random numbers.
    const ValueEstimate est = objective.kind == Objective::Kind::kAbel
                                  ? estimate_abel(model, p, mode0, x0, objective.parameter, n_paths, seed, options)
                                  : estimate_cesaro(model, p, mode0, x0, objective.parameter, n_paths, seed, options);
    result.table.push_back(est);
    if (i == 0 || est.mean < result.best.mean) {
      result.best_index = i;
      result.best = est;
    }
  }
  result.best_policy = family.at(result.best_index);
  return result;
}

std::vector<TauberianRow> tauberian_experiment(const Model& model, const FamilySpec& family,
                                               const std::vector<Probe>& probes, const std::vector<double>& deltas,
                                               std::size_t n_paths, std::uint64_t seed,
                                               const EstimatorOptions& options) {
  if (probes.empty()) throw ArgumentError("Tauberian experiment needs at least one probe");
  if (deltas.empty()) throw ArgumentError("Tauberian experiment needs a nonempty delta grid");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw ArgumentError("discount values must be positive");
    if (i > 0 && !(deltas[i] < deltas[i - 1])) throw ArgumentError("delta grid must be strictly decreasing");
  }
  std::vector<TauberianRow> rows;
  for (double delta : deltas) {
    TauberianRow row;
    row.delta = delta;
    row.T = 1.0 / delta;
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const Probe& probe = probes[p];
      // Shared streams per probe across delta and objective sharpen the differences.
      const std::uint64_t probe_seed = derive_seed(seed, p);
      TauberianProbeResult r;
      r.probe = probe;
      r.abel = optimize_value(model, family, probe.mode, probe.x, Objective::abel(delta), n_paths, probe_seed, options);
      r.cesaro =
          optimize_value(model, family, probe.mode, probe.x, Objective::cesaro(row.T), n_paths, probe_seed, options);
      r.gap = std::abs(r.abel.best.mean - r.cesaro.best.mean);
      r.gap_std_error = std::hypot(r.abel.best.std_error, r.cesaro.best.std_error);
      if (p == 0 || r.gap > row.d) {
        row.d = r.gap;
        row.d_std_error = r.gap_std_error;
        row.argmax_probe = p;
      }
      row.probes.push_back(std::move(r));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pdmp
