#include "tsalab/tdc.hpp"

#include <algorithm>
#include <cmath>

namespace tsalab {

void Mdp::validate() const {
  if (n_states < 1 || n_actions < 1) throw Error(ErrorCode::InvalidArgument, "MDP needs at least one state and action");
  if (transition.size() != n_states * n_actions * n_states) {
    throw Error(ErrorCode::DimensionMismatch, "transition tensor has the wrong size");
  }
  if (reward.rows() != static_cast<Eigen::Index>(n_states) || reward.cols() != static_cast<Eigen::Index>(n_actions)) {
    throw Error(ErrorCode::DimensionMismatch, "reward must be n_states x n_actions");
  }
  if (!(discount > 0.0 && discount < 1.0)) throw Error(ErrorCode::InvalidArgument, "discount must lie in (0, 1)");
  for (std::size_t row = 0; row < n_states * n_actions; ++row) {
    double sum = 0;
    for (std::size_t s2 = 0; s2 < n_states; ++s2) {
      const double p = transition[row * n_states + s2];
      if (!(p >= 0.0)) throw Error(ErrorCode::InvalidArgument, "transition probabilities must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw Error(ErrorCode::InvalidArgument, "transition row does not sum to 1");
  }
}

namespace {

void validate_policy(const Policy& pi, const Mdp& mdp, const char* what) {
  if (pi.rows() != static_cast<Eigen::Index>(mdp.n_states) || pi.cols() != static_cast<Eigen::Index>(mdp.n_actions)) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " must be n_states x n_actions");
  }
  for (Eigen::Index s = 0; s < pi.rows(); ++s) {
    if ((pi.row(s).array() < 0.0).any() || std::abs(pi.row(s).sum() - 1.0) > 1e-12) {
      throw Error(ErrorCode::InvalidArgument, std::string(what) + " rows must be probability vectors");
    }
  }
}

void validate_inputs(const Mdp& mdp, const FeatureMap& f, const Policy& behavior, const Policy& target) {
  mdp.validate();
  if (f.phi.rows() != static_cast<Eigen::Index>(mdp.n_states) || f.phi.cols() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "features must have one row per state");
  }
  validate_policy(behavior, mdp, "behavior policy");
  validate_policy(target, mdp, "target policy");
  for (Eigen::Index s = 0; s < behavior.rows(); ++s) {
    for (Eigen::Index a = 0; a < behavior.cols(); ++a) {
      if (!(behavior(s, a) > 0.0)) throw Error(ErrorCode::InvalidArgument, "behavior policy must have full support");
    }
  }
}

double exponential(Rng& rng) { return -std::log1p(-rng.uniform()); }

}  // namespace

RandomMdp random_mdp(std::size_t n_states, std::size_t n_actions, std::size_t d, double discount, std::uint64_t seed) {
  if (d < 1 || n_states < d) throw Error(ErrorCode::InvalidArgument, "random_mdp requires n_states >= d >= 1");
  if (n_actions < 1) throw Error(ErrorCode::InvalidArgument, "random_mdp requires n_actions >= 1");
  Rng rng(seed);
  RandomMdp out;
  Mdp& m = out.mdp;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.discount = discount;
  m.transition.resize(n_states * n_actions * n_states);
  for (std::size_t row = 0; row < n_states * n_actions; ++row) {
    double sum = 0;
    for (std::size_t s2 = 0; s2 < n_states; ++s2) sum += (m.transition[row * n_states + s2] = exponential(rng));
    for (std::size_t s2 = 0; s2 < n_states; ++s2) m.transition[row * n_states + s2] /= sum;
  }
  m.reward.resize(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
  for (Eigen::Index s = 0; s < m.reward.rows(); ++s)
    for (Eigen::Index a = 0; a < m.reward.cols(); ++a) m.reward(s, a) = rng.uniform();

  const auto rows = static_cast<Eigen::Index>(n_states);
  const auto cols = static_cast<Eigen::Index>(d);
  for (int attempt = 0; attempt < 10; ++attempt) {
    Matrix phi(rows, cols);
    for (Eigen::Index s = 0; s < rows; ++s)
      for (Eigen::Index k = 0; k < cols; ++k) phi(s, k) = rng.normal();
    for (Eigen::Index s = 0; s < rows; ++s) {
      const double nrm = phi.row(s).norm();
      if (nrm > 0) phi.row(s) /= nrm;
    }
    Eigen::JacobiSVD<Matrix> svd(phi);
    if (svd.singularValues().minCoeff() > 1e-8) {
      out.features.phi = std::move(phi);
      m.validate();
      return out;
    }
  }
  throw Error(ErrorCode::RankDeficientFeatures, "features rank deficient after 10 attempts");
}

Policy uniform_policy(std::size_t n_states, std::size_t n_actions) {
  return Policy::Constant(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions),
                          1.0 / static_cast<double>(n_actions));
}

Policy random_policy(std::size_t n_states, std::size_t n_actions, std::uint64_t seed) {
  Rng rng(seed);
  Policy pi(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
  for (Eigen::Index s = 0; s < pi.rows(); ++s) {
    for (Eigen::Index a = 0; a < pi.cols(); ++a) pi(s, a) = exponential(rng);
    pi.row(s) /= pi.row(s).sum();
  }
  return pi;
}

Vector stationary_distribution(const Mdp& mdp, const Policy& behavior) {
  mdp.validate();
  validate_policy(behavior, mdp, "behavior policy");
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  Matrix p = Matrix::Zero(n, n);  // p(s, s') = sum_a pi(a|s) P(s'|s,a)
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a)
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2)
        p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s2)) +=
            behavior(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) * mdp.p(s, a, s2);
  const Matrix pt = p.transpose();
  Vector mu = Vector::Constant(n, 1.0 / static_cast<double>(n));
  for (int it = 0; it < 100000; ++it) {
    Vector next = pt * mu;
    next /= next.sum();
    const double change = (next - mu).lpNorm<1>();
    mu = std::move(next);
    if (change <= 1e-12) return mu;
  }
  throw Error(ErrorCode::NoStationaryDistribution, "power iteration did not converge in 1e5 iterations");
}

TdcExpectations tdc_expectations(const Mdp& mdp, const FeatureMap& f, const Policy& behavior, const Policy& target) {
  validate_inputs(mdp, f, behavior, target);
  const Eigen::Index d = f.dim();
  TdcExpectations e;
  e.stationary = stationary_distribution(mdp, behavior);
  e.a_ff = Matrix::Zero(d, d);
  e.a_fs = Matrix::Zero(d, d);
  e.a_sf = Matrix::Zero(d, d);
  e.b = Vector::Zero(d);
  const double g = mdp.discount;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    const Vector phi = f.phi.row(si).transpose();
    e.a_ff += e.stationary(si) * phi * phi.transpose();
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto ai = static_cast<Eigen::Index>(a);
      const double w_sa = e.stationary(si) * behavior(si, ai);
      const double rho = target(si, ai) / behavior(si, ai);
      e.b += w_sa * rho * mdp.reward(si, ai) * phi;
      Vector next = Vector::Zero(d);  // E[phi(s') | s, a]
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) next += mdp.p(s, a, s2) * f.phi.row(static_cast<Eigen::Index>(s2)).transpose();
      e.a_fs += w_sa * rho * phi * (phi - g * next).transpose();
      e.a_sf += w_sa * rho * g * next * phi.transpose();
    }
  }
  e.a_ss = e.a_fs;
  return e;
}

TdcBuild build_tdc_system(const Mdp& mdp, const FeatureMap& f, const Policy& behavior, const Policy& target) {
  TdcExpectations e = tdc_expectations(mdp, f, behavior, target);
  const Eigen::Index d = f.dim();
  std::vector<std::string> warnings;
  const double fast_abscissa = spectral_abscissa(e.a_ff);
  Eigen::PartialPivLU<Matrix> ff_lu(e.a_ff);
  const Matrix delta = e.a_ss - e.a_sf * ff_lu.solve(e.a_fs);
  const double schur_abscissa = spectral_abscissa(delta);
  if (!(fast_abscissa > 0.0)) warnings.push_back("A_ff is not stable (min Re eig <= 0)");
  if (!(schur_abscissa > 0.0)) warnings.push_back("Schur complement Delta is not certified stable (min Re eig <= 0)");

  Vector mean(2 * d);
  mean << e.b, e.b;
  // Solution first, with a placeholder covariance, then the exact covariance
  // of the per-sample update at (x*, y*).
  const TwoTimeScaleSystem provisional =
      make_system(e.a_ff, e.a_fs, e.a_sf, e.a_ss, Matrix::Zero(2 * d, 2 * d), mean, NoiseCheck::AllowSemidefinite);
  const Vector& xs = provisional.x_star();
  const Vector& ys = provisional.y_star();
  const double g = mdp.discount;
  Matrix gamma = Matrix::Zero(2 * d, 2 * d);
  Vector dev(2 * d);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    const Vector phi = f.phi.row(si).transpose();
    const double phi_x = phi.dot(xs);
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto ai = static_cast<Eigen::Index>(a);
      const double rho = target(si, ai) / behavior(si, ai);
      const double r = mdp.reward(si, ai);
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
        const double q = e.stationary(si) * behavior(si, ai) * mdp.p(s, a, s2);
        if (q == 0.0) continue;
        const auto s2i = static_cast<Eigen::Index>(s2);
        const Vector phi2 = f.phi.row(s2i).transpose();
        const double td = (phi - g * phi2).dot(ys);
        // Per-sample W, V at (x*, y*) minus their mean b.
        dev.head(d) = rho * r * phi - phi * phi_x - rho * td * phi;
        dev.tail(d) = rho * r * phi - g * rho * phi_x * phi2 - rho * td * phi;
        gamma.selfadjointView<Eigen::Lower>().rankUpdate(dev, q);
      }
    }
  }
  gamma = gamma.selfadjointView<Eigen::Lower>();
  // E[dev] = b - A_ff x* - A_fs y* = 0, so the sum above is the covariance.
  TwoTimeScaleSystem sys = make_system(e.a_ff, e.a_fs, e.a_sf, e.a_ss, symmetrize(gamma), mean,
                                       NoiseCheck::AllowSemidefinite);
  return TdcBuild{std::move(sys), std::move(e), fast_abscissa, schur_abscissa, std::move(warnings)};
}

struct TdcSamplerTables {
  std::vector<double> cum_state;       // stationary
  std::vector<double> cum_action;      // per state
  std::vector<double> cum_next;        // per (s, a)
  std::vector<double> rho, reward;     // per (s, a)
  std::size_t n_states = 0, n_actions = 0;
  Matrix phi;                          // d x n_states (columns are features)
  double discount = 0;
};

namespace {

std::size_t pick(const double* cum, std::size_t n, double u) {
  const double* it = std::upper_bound(cum, cum + n, u);
  const auto k = static_cast<std::size_t>(it - cum);
  return k >= n ? n - 1 : k;
}

void cumulate(std::vector<double>& out, std::size_t offset, std::size_t n) {
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += out[offset + i];
    out[offset + i] = acc;
  }
  for (std::size_t i = 0; i < n; ++i) out[offset + i] /= acc;
}

}  // namespace

TdcNoise::TdcNoise(const Mdp& mdp, const FeatureMap& f, const Policy& behavior, const Policy& target,
                   const TwoTimeScaleSystem& sys, TdcNoiseMode mode)
    : sys_(&sys), mode_(mode) {
  validate_inputs(mdp, f, behavior, target);
  if (sys.dx() != f.dim() || sys.dy() != f.dim()) throw Error(ErrorCode::DimensionMismatch, "system does not match features");
  auto t = std::make_shared<TdcSamplerTables>();
  const std::size_t ns = mdp.n_states, na = mdp.n_actions;
  t->n_states = ns;
  t->n_actions = na;
  t->discount = mdp.discount;
  t->phi = f.phi.transpose();
  const Vector mu = stationary_distribution(mdp, behavior);
  t->cum_state.assign(mu.data(), mu.data() + mu.size());
  cumulate(t->cum_state, 0, ns);
  t->cum_action.resize(ns * na);
  t->rho.resize(ns * na);
  t->reward.resize(ns * na);
  t->cum_next = mdp.transition;
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const auto si = static_cast<Eigen::Index>(s);
      const auto ai = static_cast<Eigen::Index>(a);
      t->cum_action[s * na + a] = behavior(si, ai);
      t->rho[s * na + a] = target(si, ai) / behavior(si, ai);
      t->reward[s * na + a] = mdp.reward(si, ai);
      cumulate(t->cum_next, (s * na + a) * ns, ns);
    }
    cumulate(t->cum_action, s * na, na);
  }
  tables_ = std::move(t);
  ax_.resize(sys.dx());
  ay_.resize(sys.dy());
}

std::string TdcNoise::name() const {
  return mode_ == TdcNoiseMode::LinearizedAdditive ? "tdc-linearized-additive" : "tdc-multiplicative";
}

TdcNoise::Draw TdcNoise::draw(Rng& rng) const {
  const auto& t = *tables_;
  Draw d{};
  d.s = pick(t.cum_state.data(), t.n_states, rng.uniform());
  d.a = pick(t.cum_action.data() + d.s * t.n_actions, t.n_actions, rng.uniform());
  d.s2 = pick(t.cum_next.data() + (d.s * t.n_actions + d.a) * t.n_states, t.n_states, rng.uniform());
  return d;
}

void TdcNoise::fill(const Draw& d, const Vector& x, const Vector& y, NoiseSample& out) {
  const auto& t = *tables_;
  const auto phi = t.phi.col(static_cast<Eigen::Index>(d.s));
  const auto phi2 = t.phi.col(static_cast<Eigen::Index>(d.s2));
  const double rho = t.rho[d.s * t.n_actions + d.a];
  const double r = t.reward[d.s * t.n_actions + d.a];
  const double g = t.discount;
  const double phi_x = phi.dot(x);
  const double td = phi.dot(y) - g * phi2.dot(y);
  // W = rho r phi - (A_ff(xi) - A_ff) x - (A_fs(xi) - A_fs) y, V likewise.
  out.w = ax_;
  out.w += (rho * r - phi_x - rho * td) * phi;
  out.v = ay_;
  out.v += (rho * r - rho * td) * phi;
  out.v -= (g * rho * phi_x) * phi2;
}

void TdcNoise::sample(const Vector& x, const Vector& y, Rng& rng, NoiseSample& out) {
  const Draw d = draw(rng);
  if (mode_ == TdcNoiseMode::LinearizedAdditive) {
    // A_ff x* + A_fs y* = A_sf x* + A_ss y* = b
    ax_ = sys_->mean_w();
    ay_ = sys_->mean_v();
    fill(d, sys_->x_star(), sys_->y_star(), out);
  } else {
    ax_.noalias() = sys_->a_ff() * x;
    ax_.noalias() += sys_->a_fs() * y;
    ay_.noalias() = sys_->a_sf() * x;
    ay_.noalias() += sys_->a_ss() * y;
    fill(d, x, y, out);
  }
}

KeyValueFile mdp_to_keyvalue(const Mdp& mdp, const FeatureMap& f, const Policy& behavior, const Policy& target) {
  KeyValueFile kv;
  kv.set("format", "tsalab-mdp-1");
  kv.set("n_states", std::to_string(mdp.n_states));
  kv.set("n_actions", std::to_string(mdp.n_actions));
  kv.set("d", std::to_string(f.dim()));
  kv.set_double("discount", mdp.discount);
  kv.set("transition", format_doubles(mdp.transition.data(), mdp.transition.size()));
  kv.set_matrix("reward", mdp.reward);
  kv.set_matrix("phi", f.phi);
  kv.set_matrix("behavior", behavior);
  kv.set_matrix("target", target);
  return kv;
}

MdpBundle mdp_from_keyvalue(const KeyValueFile& kv) {
  const auto ns = kv.get_int("n_states");
  const auto na = kv.get_int("n_actions");
  const auto d = kv.get_int("d");
  if (ns < 1 || na < 1 || d < 1) throw Error(ErrorCode::ParseError, "n_states, n_actions and d must be >= 1");
  MdpBundle b;
  b.mdp.n_states = static_cast<std::size_t>(ns);
  b.mdp.n_actions = static_cast<std::size_t>(na);
  b.mdp.discount = kv.get_double("discount");
  b.mdp.transition = kv.get_doubles("transition");
  b.mdp.reward = kv.get_matrix("reward", ns, na);
  b.features.phi = kv.get_matrix("phi", ns, d);
  b.behavior = kv.get_matrix("behavior", ns, na);
  b.target = kv.get_matrix("target", ns, na);
  validate_inputs(b.mdp, b.features, b.behavior, b.target);
  return b;
}

void save_mdp(const MdpBundle& b, const std::filesystem::path& path) {
  mdp_to_keyvalue(b.mdp, b.features, b.behavior, b.target).save(path);
}

MdpBundle load_mdp(const std::filesystem::path& path) { return mdp_from_keyvalue(KeyValueFile::load(path)); }

}  // namespace tsalab
