#pragma once

#include <string>

#include "pdmp/model.hpp"

namespace pdmp {

/// Rate constants of the five-mode phage-lambda applet. The defaults are
/// O(1) choices giving visible switching on horizons of a few tens of time
/// units; they are not measured biology.
struct PhageParams {
  double alpha = 10.0;  ///< maximal concentration of repressor and dimer
  double u0 = 0.2;      ///< slowest host reaction speed
  double k2 = 1.0;
  double k3 = 1.0;
  double k4 = 1.0;
  double kt = 1.0;
  double k_m2 = 0.5;  ///< k_{-2}
  double k_m3 = 0.5;  ///< k_{-3}
  double k_m4 = 0.5;  ///< k_{-4}
  double n_burst = 5.0;

  void validate() const;
};

/// Linear running cost h(gamma, x) = (w1 x1 + w2 x2) / alpha. The default
/// (1, 0) is the normalized repressor level.
struct PhageCost {
  double w1 = 1.0;
  double w2 = 0.0;
};

/// Mode ids of the phage model, in the fixed mode ordering used by the
/// kernel and by inverse-CDF sampling:
///   0 D_free      (1,0,0,0,0)  free DNA
///   1 OR2_active  (0,1,0,0,0)  dimer on OR2, transcription allowed
///   2 OR2_spent   (0,1,0,0,1)  dimer on OR2, burst just happened
///   3 OR3         (0,0,1,0,0)  dimer on OR3
///   4 BOTH        (0,0,0,1,0)  both operator sites occupied
namespace phage {
inline constexpr ModeId kDFree = 0;
inline constexpr ModeId kOR2Active = 1;
inline constexpr ModeId kOR2Spent = 2;
inline constexpr ModeId kOR3 = 3;
inline constexpr ModeId kBoth = 4;
}  // namespace phage

/// Switch PDMP on K = [0, alpha]^2 with U = V = [0, 1]; rates and mode
/// kernel depend on (gamma, u) only.
class PhageLambdaModel final : public Model {
 public:
  explicit PhageLambdaModel(const PhageParams& params, const PhageCost& cost = {});

  const PhageParams& params() const { return params_; }
  /// Per-mode rate constant multiplying (u + u0).
  double rate_constant(ModeId mode) const;

 protected:
  StateVec do_flow(ModeId mode, const StateVec& x, const ControlPoint& c) const override;
  double do_rate(ModeId mode, const StateVec& x, const ControlPoint& c) const override;
  ModeDistribution do_mode_distribution(ModeId mode, const ControlPoint& c) const override;
  StateVec do_jump_offset(ModeId from, ModeId to, const StateVec& x, const ControlPoint& c) const override;
  double do_cost(ModeId mode, const StateVec& x, const ControlPoint& c) const override;

 private:
  PhageParams params_;
  PhageCost cost_;
};

ModelPtr phage_lambda_model(const PhageParams& params = {}, const PhageCost& cost = {});

enum class ToyKind {
  kConstantCost,    ///< one mode, f = 0, lambda = 0, h = c
  kDecay1d,         ///< one mode, f(x) = -x, lambda = 0, h(x) = x on [0, 1]
  kFlipflop,        ///< two modes, f = 0, lambda = lambda0 both ways, h = 1 in A, 0 in B
  kControlledDecay  ///< one mode, f(x, u) = -u x, U = [0, 1], h(x) = x on [0, 1]
};

struct ToyParams {
  double cost_constant = 0.75;
  double flip_rate = 1.0;
};

ModelPtr toy_model(ToyKind kind, const ToyParams& params = {});

ToyKind parse_toy_kind(const std::string& name);
std::string toy_kind_name(ToyKind kind);

}  // namespace pdmp
