#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "tsalab/campaign.hpp"
#include "tsalab/keyvalue.hpp"
#include "tsalab/matlib.hpp"
#include "tsalab/rng.hpp"
#include "tsalab/system.hpp"

namespace tsalab {

/// Finite MDP. `discount` is the RL discount factor, kept distinct from the
/// slow step size.
struct Mdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> transition;  // P(s'|s,a) at ((s * n_actions) + a) * n_states + s'
  Matrix reward;                   // n_states x n_actions
  double discount = 0.9;

  double p(std::size_t s, std::size_t a, std::size_t s2) const { return transition[(s * n_actions + a) * n_states + s2]; }
  /// Throws InvalidArgument when a transition row does not sum to 1 (1e-12) or discount is outside (0, 1).
  void validate() const;
};

/// Rows are state features.
struct FeatureMap {
  Matrix phi;  // n_states x d
  Eigen::Index dim() const noexcept { return phi.cols(); }
};

/// Row-stochastic n_states x n_actions matrix pi(a|s).
using Policy = Matrix;

/// Transitions from normalised standard-exponential variates, rewards
/// uniform in [0, 1], Gaussian features normalised to unit rows. Features are
/// redrawn (at most 10 attempts) while the smallest singular value is <= 1e-8.
struct RandomMdp {
  Mdp mdp;
  FeatureMap features;
};
RandomMdp random_mdp(std::size_t n_states, std::size_t n_actions, std::size_t d, double discount, std::uint64_t seed);

Policy uniform_policy(std::size_t n_states, std::size_t n_actions);
/// Each row drawn from the flat Dirichlet distribution.
Policy random_policy(std::size_t n_states, std::size_t n_actions, std::uint64_t seed);

/// Stationary distribution of the state chain under `behavior` by power
/// iteration (tolerance 1e-12 in the l1 norm, at most 1e5 iterations).
/// Throws NoStationaryDistribution when the iteration does not settle.
Vector stationary_distribution(const Mdp& mdp, const Policy& behavior);

/// Exact expectations under the behaviour chain's stationary law with
/// importance ratios rho = pi_target / pi_behavior:
///   A_ff = E[phi phi^T], A_fs = A_ss = E[rho phi (phi - discount phi')^T],
///   A_sf = discount E[rho phi' phi^T], E[W] = E[V] = E[rho r phi].
struct TdcExpectations {
  Matrix a_ff, a_fs, a_sf, a_ss;
  Vector b;
  Vector stationary;
};
TdcExpectations tdc_expectations(const Mdp& mdp, const FeatureMap& features, const Policy& behavior,
                                 const Policy& target);

struct TdcBuild {
  TwoTimeScaleSystem system;
  TdcExpectations expectations;
  double fast_abscissa = 0;  // min Re eig(A_ff)
  double schur_abscissa = 0; // min Re eig(Delta)
  std::vector<std::string> warnings;
};

/// Assembles the two-time-scale system. The noise covariance is the exact
/// covariance of the per-sample update at (x*, y*), which may be singular.
TdcBuild build_tdc_system(const Mdp& mdp, const FeatureMap& features, const Policy& behavior, const Policy& target);

enum class TdcNoiseMode {
  LinearizedAdditive,      // per-sample deviation evaluated at (x*, y*)
  RealisticMultiplicative, // per-sample deviation evaluated at the current iterate
};

struct TdcSamplerTables;

/// Draws (s, a, s') i.i.d.: s from the stationary law, a from the behaviour
/// policy, s' from the transition kernel. The returned sample is (W_t, V_t)
/// in the form used by the recursion, so that stepping with it reproduces
/// the TDC update exactly in the multiplicative mode.
class TdcNoise final : public NoiseModel {
 public:
  TdcNoise(const Mdp& mdp, const FeatureMap& features, const Policy& behavior, const Policy& target,
           const TwoTimeScaleSystem& sys, TdcNoiseMode mode);

  void sample(const Vector& x, const Vector& y, Rng& rng, NoiseSample& out) override;
  std::unique_ptr<NoiseModel> clone() const override { return std::make_unique<TdcNoise>(*this); }
  std::string name() const override;

  struct Draw {
    std::size_t s, a, s2;
  };
  Draw draw(Rng& rng) const;

 private:
  void fill(const Draw& d, const Vector& x, const Vector& y, NoiseSample& out);

  std::shared_ptr<const TdcSamplerTables> tables_;
  const TwoTimeScaleSystem* sys_;
  TdcNoiseMode mode_;
  Vector ax_, ay_;  // A_ff x + A_fs y and A_sf x + A_ss y
};

KeyValueFile mdp_to_keyvalue(const Mdp& mdp, const FeatureMap& features, const Policy& behavior,
                             const Policy& target);
struct MdpBundle {
  Mdp mdp;
  FeatureMap features;
  Policy behavior;
  Policy target;
};
MdpBundle mdp_from_keyvalue(const KeyValueFile& kv);
void save_mdp(const MdpBundle& bundle, const std::filesystem::path& path);
MdpBundle load_mdp(const std::filesystem::path& path);

}  // namespace tsalab
