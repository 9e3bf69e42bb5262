#pragma once

// Synergy-structured action head. One squashed-Gaussian action per group
// drives the group's representative (its lowest-index muscle); every other
// muscle gets the group action scaled by a bounded correction weight whose
// bound grows with training time.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dynsyn/checksum.hpp"
#include "dynsyn/errors.hpp"
#include "dynsyn/nn.hpp"
#include "dynsyn/random.hpp"

namespace dynsyn::policy {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct ClipSchedule {
  double k_d = 5e-8;  // per step
  double a_d = 1e6;   // steps
  double kappa = 1.0;

  void validate() const {
    if (!(k_d >= 0.0)) throw ParameterError("clip schedule: k_D must be >= 0");
    if (!(a_d >= 0.0)) throw ParameterError("clip schedule: a_D must be >= 0");
    if (!(kappa > 0.0)) throw ParameterError("clip schedule: kappa must be > 0");
  }
};

// c = min(max(k_D (t - a_D), 0), kappa)
inline double clip_bound(double t, const ClipSchedule& s) {
  if (!(t >= 0.0)) throw DomainError("clip_bound: t must be >= 0");
  return std::min(std::max(s.k_d * (t - s.a_d), 0.0), s.kappa);
}

class GroupIndexMap {
 public:
  GroupIndexMap() = default;

  // `groups` must partition 0..N_m-1; each group is represented by its
  // smallest member.
  explicit GroupIndexMap(const std::vector<std::vector<int>>& groups) {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    group_.assign(n, -1);
    weight_.assign(n, -1);
    representative_.assign(n, false);
    for (std::size_t k = 0; k < groups.size(); ++k) {
      if (groups[k].empty()) throw ParameterError("GroupIndexMap: empty group");
      for (int m : groups[k]) {
        if (m < 0 || static_cast<std::size_t>(m) >= n || group_[static_cast<std::size_t>(m)] != -1)
          throw ParameterError("GroupIndexMap: groups do not partition 0.." + std::to_string(n - 1));
        group_[static_cast<std::size_t>(m)] = static_cast<int>(k);
      }
      const int rep = *std::min_element(groups[k].begin(), groups[k].end());
      representative_[static_cast<std::size_t>(rep)] = true;
    }
    int next = 0;
    for (std::size_t m = 0; m < n; ++m)
      if (!representative_[m]) weight_[m] = next++;
    n_groups_ = groups.size();
    n_weights_ = static_cast<std::size_t>(next);
    groups_ = groups;
  }

  // Every muscle its own group.
  static GroupIndexMap singletons(std::size_t n) {
    std::vector<std::vector<int>> g;
    for (std::size_t m = 0; m < n; ++m) g.push_back({static_cast<int>(m)});
    return GroupIndexMap(g);
  }

  std::size_t n_muscles() const { return group_.size(); }
  std::size_t n_groups() const { return n_groups_; }
  std::size_t n_weights() const { return n_weights_; }
  int group(std::size_t m) const { return group_[m]; }
  bool representative(std::size_t m) const { return representative_[m]; }
  int weight_index(std::size_t m) const { return weight_[m]; }
  const std::vector<std::vector<int>>& groups() const { return groups_; }

  // Stable hash of the partition, embedded in policy checkpoints.
  std::string hash() const {
    std::string canon;
    for (const auto& g : groups_) {
      std::vector<int> s = g;
      std::sort(s.begin(), s.end());
      for (int m : s) canon += std::to_string(m) + ",";
      canon += ";";
    }
    return hex64(fnv1a64(canon));
  }

 private:
  std::vector<int> group_, weight_;
  std::vector<bool> representative_;
  std::vector<std::vector<int>> groups_;
  std::size_t n_groups_ = 0, n_weights_ = 0;
};

// a[m] = a_G[g] for the representative of g, else
// clip(a_G[g] * clip(kappa w[j], -c, c), -1, 1), in muscle order.
inline VectorXd compose_action(const VectorXd& a_g, const VectorXd& w, const GroupIndexMap& map, double c,
                               double kappa) {
  if (static_cast<std::size_t>(a_g.size()) != map.n_groups() || static_cast<std::size_t>(w.size()) != map.n_weights())
    throw ParameterError("compose_action: action sizes do not match the grouping");
  VectorXd a(static_cast<Eigen::Index>(map.n_muscles()));
  for (std::size_t m = 0; m < map.n_muscles(); ++m) {
    const double g = a_g[map.group(m)];
    double v = g;
    if (!map.representative(m)) v = g * std::clamp(kappa * w[map.weight_index(m)], -c, c);
    a[static_cast<Eigen::Index>(m)] = std::clamp(v, -1.0, 1.0);
  }
  return a;
}

inline VectorXd compose_action(const VectorXd& a_g, const VectorXd& w, const GroupIndexMap& map, double t,
                               const ClipSchedule& sched) {
  return compose_action(a_g, w, map, clip_bound(t, sched), sched.kappa);
}

// Batched composition with its vector-Jacobian product.
struct ComposeJacobian {
  MatrixXd mult;   // n_muscles x B: d a / d a_G[g(m)]
  MatrixXd dw;     // n_muscles x B: d a / d w[j(m)]
};

inline MatrixXd compose_batch(const MatrixXd& a_g, const MatrixXd& w, const GroupIndexMap& map, double c,
                              double kappa, ComposeJacobian* jac = nullptr) {
  const auto nm = static_cast<Eigen::Index>(map.n_muscles());
  const Eigen::Index b = a_g.cols();
  MatrixXd a(nm, b);
  if (jac) {
    jac->mult = MatrixXd::Zero(nm, b);
    jac->dw = MatrixXd::Zero(nm, b);
  }
  for (Eigen::Index col = 0; col < b; ++col)
    for (Eigen::Index m = 0; m < nm; ++m) {
      const auto mu = static_cast<std::size_t>(m);
      const double g = a_g(map.group(mu), col);
      double v = g, dg = 1.0, dw = 0.0;
      if (!map.representative(mu)) {
        const double kw = kappa * w(map.weight_index(mu), col);
        const double mult = std::clamp(kw, -c, c);
        v = g * mult;
        dg = mult;
        dw = (kw > -c && kw < c) ? g * kappa : 0.0;
      }
      a(m, col) = std::clamp(v, -1.0, 1.0);
      if (jac && v > -1.0 && v < 1.0) {
        jac->mult(m, col) = dg;
        jac->dw(m, col) = dw;
      }
    }
  return a;
}

// Maps a policy action in [-1, 1] to excitation in (0, 1).
inline double to_excitation(double a) {
  if (!std::isfinite(a)) throw DomainError("to_excitation: non-finite action");
  return 1.0 / (1.0 + std::exp(-5.0 * ((a + 1.0) / 2.0 - 0.5)));
}

inline VectorXd to_excitation(const VectorXd& a) {
  VectorXd out(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out[i] = to_excitation(a[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Squashed Gaussian

// log(1 - tanh(u)^2), stable for large |u|.
inline double log_one_minus_tanh2(double u) {
  const double x = -2.0 * u;
  const double softplus = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return 2.0 * (std::log(2.0) - u - softplus);
}

// Log density of a = tanh(u) where u ~ N(mu, exp(log_std)^2).
inline double squashed_log_prob(double u, double mu, double log_std) {
  const double z = (u - mu) / std::exp(log_std);
  return -0.5 * z * z - log_std - 0.5 * std::log(2.0 * M_PI) - log_one_minus_tanh2(u);
}

// ---------------------------------------------------------------------------
// Head

// The trunk maps observations to [mu_G; log_std_G; mu_w]; log_std_w is a
// free parameter. A flat actor is the same head over singleton groups.
class DynSynHead {
 public:
  DynSynHead() = default;
  DynSynHead(int obs_dim, const std::vector<int>& hidden, GroupIndexMap map, Rng& rng)
      : map_(std::move(map)) {
    std::vector<int> sizes{obs_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(static_cast<int>(2 * map_.n_groups() + map_.n_weights()));
    trunk_ = nn::Mlp(sizes, rng);
    log_std_w_ = VectorXd::Zero(static_cast<Eigen::Index>(map_.n_weights()));
  }

  const GroupIndexMap& map() const { return map_; }
  int n_groups() const { return static_cast<int>(map_.n_groups()); }
  int n_weights() const { return static_cast<int>(map_.n_weights()); }
  int obs_dim() const { return trunk_.input_size(); }
  nn::Mlp& trunk() { return trunk_; }
  const nn::Mlp& trunk() const { return trunk_; }
  VectorXd& log_std_w() { return log_std_w_; }
  const VectorXd& log_std_w() const { return log_std_w_; }

  // All parameters as one vector: trunk then log_std_w.
  VectorXd flat_params() const {
    VectorXd p(trunk_.params().size() + log_std_w_.size());
    p << trunk_.params(), log_std_w_;
    return p;
  }
  void set_flat_params(const VectorXd& p) {
    if (p.size() != trunk_.params().size() + log_std_w_.size()) throw ParameterError("DynSynHead: parameter size mismatch");
    trunk_.params() = p.head(trunk_.params().size());
    log_std_w_ = p.tail(log_std_w_.size());
  }

 private:
  nn::Mlp trunk_;
  VectorXd log_std_w_;
  GroupIndexMap map_;
};

struct HeadBatch {
  MatrixXd a_g, w;        // squashed samples
  RowVectorXd log_prob;   // of a_g only
  MatrixXd eps_g, eps_w;  // standard-normal noise used
  MatrixXd std_g;         // exp(clamped log_std_G)
  MatrixXd log_std_raw;   // trunk output before clamping
  VectorXd std_w;
  nn::Mlp::Cache cache;
};

// Reparameterized samples for a batch of observations (one per column).
// rng == nullptr gives the deterministic mode tanh(mu).
inline HeadBatch sample_batch(const DynSynHead& head, const MatrixXd& obs, Rng* rng) {
  if (!obs.allFinite()) throw DomainError("sample_heads: non-finite observation");
  const Eigen::Index ng = head.n_groups(), nw = head.n_weights(), b = obs.cols();
  HeadBatch s;
  const MatrixXd out = head.trunk().forward(obs, &s.cache);
  const auto mu_g = out.topRows(ng);
  s.log_std_raw = out.middleRows(ng, ng);
  const auto mu_w = out.bottomRows(nw);
  const MatrixXd ls_g = s.log_std_raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  s.std_g = ls_g.array().exp();
  s.std_w = head.log_std_w().cwiseMax(kLogStdMin).cwiseMin(kLogStdMax).array().exp();
  s.eps_g = MatrixXd::Zero(ng, b);
  s.eps_w = MatrixXd::Zero(nw, b);
  if (rng) {
    for (Eigen::Index col = 0; col < b; ++col) {
      for (Eigen::Index i = 0; i < ng; ++i) s.eps_g(i, col) = normal01(*rng);
      for (Eigen::Index i = 0; i < nw; ++i) s.eps_w(i, col) = normal01(*rng);
    }
  }
  const MatrixXd u_g = mu_g + s.std_g.cwiseProduct(s.eps_g);
  s.a_g = u_g.array().tanh();
  s.w = (mu_w + (s.eps_w.array().colwise() * s.std_w.array()).matrix()).array().tanh();
  s.log_prob = RowVectorXd::Zero(b);
  for (Eigen::Index col = 0; col < b; ++col)
    for (Eigen::Index i = 0; i < ng; ++i)
      s.log_prob[col] += squashed_log_prob(u_g(i, col), mu_g(i, col), ls_g(i, col));
  return s;
}

struct HeadOutput {
  VectorXd a_g, w;
  double log_prob = 0.0;
};

inline HeadOutput sample_heads(const DynSynHead& head, const VectorXd& obs, Rng* rng) {
  HeadBatch s = sample_batch(head, MatrixXd(obs), rng);
  return {s.a_g.col(0), s.w.col(0), s.log_prob[0]};
}

// Backpropagates dL/da_G, dL/dw and dL/dlog_prob (all with the noise held
// fixed) into the head parameters, laid out as flat_params().
inline VectorXd backward(const DynSynHead& head, const HeadBatch& s, const MatrixXd& d_ag, const MatrixXd& d_w,
                         const RowVectorXd& d_logp) {
  const Eigen::Index ng = head.n_groups(), nw = head.n_weights(), b = s.a_g.cols();
  MatrixXd d_out(2 * ng + nw, b);
  // u -> a = tanh(u); log_prob depends on u through the squash correction
  // (d/du = 2 tanh(u)) and on log_std directly (-1).
  const MatrixXd g_u = d_ag.cwiseProduct((1.0 - s.a_g.array().square()).matrix()) +
                       (2.0 * s.a_g.array()).matrix() * d_logp.asDiagonal();
  d_out.topRows(ng) = g_u;
  MatrixXd g_ls = g_u.cwiseProduct(s.std_g).cwiseProduct(s.eps_g);
  g_ls.rowwise() -= d_logp;
  for (Eigen::Index i = 0; i < g_ls.size(); ++i) {
    const double raw = s.log_std_raw.data()[i];
    if (raw < kLogStdMin || raw > kLogStdMax) g_ls.data()[i] = 0.0;
  }
  d_out.middleRows(ng, ng) = g_ls;
  const MatrixXd g_uw = d_w.cwiseProduct((1.0 - s.w.array().square()).matrix());
  d_out.bottomRows(nw) = g_uw;

  VectorXd grad_trunk;
  head.trunk().backward(s.cache, d_out, grad_trunk);
  VectorXd grad_ls_w = (g_uw.cwiseProduct(s.eps_w).array().colwise() * s.std_w.array()).rowwise().sum();
  for (Eigen::Index i = 0; i < nw; ++i) {
    const double raw = head.log_std_w()[i];
    if (raw < kLogStdMin || raw > kLogStdMax) grad_ls_w[i] = 0.0;
  }
  VectorXd grad(grad_trunk.size() + nw);
  grad << grad_trunk, grad_ls_w;
  return grad;
}

}  // namespace dynsyn::policy
