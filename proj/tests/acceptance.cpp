// Acceptance run: one PASS/FAIL line per criterion 1-11.
//
//   acceptance [--only 1,4,9] [--out DIR]
//
// Exit status 0 only when every selected criterion passes.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dynsyn/cli.hpp"
#include "dynsyn/muscle.hpp"
#include "dynsyn/nn.hpp"
#include "dynsyn/plant.hpp"
#include "dynsyn/policy.hpp"
#include "dynsyn/random.hpp"
#include "dynsyn/sac.hpp"
#include "dynsyn/synergy.hpp"
#include "dynsyn/tasks.hpp"

namespace {

using namespace dynsyn;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t index_of(const plant::Model& model, const std::string& name) {
  const auto names = synergy::muscle_names(model);
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw LookupError("no muscle " + name + " in " + model.name);
  return static_cast<std::size_t>(it - names.begin());
}

// ---------------------------------------------------------------------------
// 1. Activation dynamics against a 1e-6 s forward-Euler reference.

double reference_rate(double u, double a, double tau_act, double tau_deact) {
  const double tau = u > a ? tau_act * (0.5 + 1.5 * a) : tau_deact / (0.5 + 1.5 * a);
  return (u - a) / tau;
}

Outcome criterion1() {
  Rng rng(101);
  const muscle::MuscleParams p;
  const double dt = 0.01, h = 1e-6;
  const int fine = static_cast<int>(std::lround(dt / h));
  double worst = 0.0;
  for (int start = 0; start < 100; ++start) {
    muscle::MuscleState s;
    s.act = uniform01(rng);
    double ref = s.act;
    // Excitation redrawn every control step.
    for (int k = 0; k < 100; ++k) {
      const double u = uniform01(rng);
      s = muscle::activation_step(u, s, dt, p);
      for (int i = 0; i < fine; ++i) ref += h * reference_rate(u, ref, p.tau_act, p.tau_deact);
      worst = std::max(worst, std::abs(s.act - ref));
    }
  }
  return {worst <= 1e-3, "max |err| " + fmt(worst, 3) + " over 100 starts x 1 s (tol 1e-3)"};
}

// ---------------------------------------------------------------------------
// 2. Moment arms against central differences of muscle lengths.

Outcome criterion2() {
  const auto model = plant::arm2x6();
  Rng rng(102);
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd q(static_cast<Eigen::Index>(model.dof()));
    for (std::size_t j = 0; j < model.dof(); ++j) {
      const auto& l = model.chain.links[j];
      // Keep the difference stencil inside the joint limits.
      q[static_cast<Eigen::Index>(j)] = uniform(rng, l.q_min + 1e-3, l.q_max - 1e-3);
    }
    const MatrixXd r = plant::moment_arms(model, q);
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      VectorXd qp = q, qm = q;
      qp[j] += h;
      qm[j] -= h;
      const VectorXd fd = -(plant::muscle_lengths(model, qp) - plant::muscle_lengths(model, qm)) / (2 * h);
      for (Eigen::Index m = 0; m < fd.size(); ++m) {
        const double scale = std::max({std::abs(r(m, j)), std::abs(fd[m]), 1e-3});
        worst = std::max(worst, std::abs(r(m, j) - fd[m]) / scale);
      }
    }
  }
  return {worst <= 1e-5, "max rel err " + fmt(worst, 3) + " on 200 configurations (tol 1e-5)"};
}

// ---------------------------------------------------------------------------
// 3. Backward passes against central differences.

// Relative error ||g - fd|| / max(||g||, ||fd||) over the checked coordinates.
struct GradCheck {
  double num = 0.0, g2 = 0.0, f2 = 0.0;
  void add(double g, double fd) {
    num += (g - fd) * (g - fd);
    g2 += g * g;
    f2 += fd * fd;
  }
  double rel() const { return std::sqrt(num) / std::max(std::sqrt(std::max(g2, f2)), 1e-300); }
};

std::vector<Eigen::Index> coordinates(Eigen::Index n, std::size_t count, Rng& rng) {
  std::vector<Eigen::Index> idx;
  if (static_cast<std::size_t>(n) <= count) {
    for (Eigen::Index i = 0; i < n; ++i) idx.push_back(i);
  } else {
    for (std::size_t k = 0; k < count; ++k) idx.push_back(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n))));
  }
  return idx;
}

Outcome criterion3() {
  const auto model = plant::arm2x6();
  const auto env = tasks::reach_env(model, {});
  const int obs_dim = static_cast<int>(env->obs_dim());
  const auto grouping = policy::GroupIndexMap({{0, 4}, {1, 5}, {2}, {3}});
  const double h = 1e-6;
  Rng rng(103);
  std::ostringstream detail;
  double worst = 0.0;

  // Both the default and the desk-scale hidden sizes.
  for (const std::vector<int>& hidden : {std::vector<int>{256, 256}, std::vector<int>{64, 64}}) {
    sac::SacConfig cfg;
    cfg.hidden = hidden;
    cfg.clip = {1e-3, 0.0, 1.0};
    MatrixXd obs(obs_dim, 4);
    for (Eigen::Index i = 0; i < obs.size(); ++i) obs.data()[i] = normal01(rng);

    for (sac::ActorKind kind : {sac::ActorKind::kFlat, sac::ActorKind::kDynSyn}) {
      const auto map = kind == sac::ActorKind::kFlat ? policy::GroupIndexMap::singletons(6) : grouping;
      sac::Agent agent = sac::make_agent(kind, obs_dim, map, cfg, 7);
      agent.step = 500;  // c = 0.5, inside the ramp
      agent.actor.log_std_w().setConstant(-0.5);

      // Actor: full SAC actor loss through composition and both critics.
      Rng r0(11);
      const auto al = sac::actor_loss(obs, agent, 0.2, r0);
      const VectorXd p0 = agent.actor.flat_params();
      GradCheck actor;
      for (Eigen::Index i : coordinates(p0.size(), 300, rng)) {
        sac::Agent ap = agent, am = agent;
        VectorXd pp = p0, pm = p0;
        pp[i] += h;
        pm[i] -= h;
        ap.actor.set_flat_params(pp);
        am.actor.set_flat_params(pm);
        Rng rp(11), rm(11);
        actor.add(al.grad[i], (sac::actor_loss(obs, ap, 0.2, rp).loss - sac::actor_loss(obs, am, 0.2, rm).loss) / (2 * h));
      }
      worst = std::max(worst, actor.rel());
      detail << sac::to_string(kind) << "[" << hidden[0] << "] actor " << fmt(actor.rel(), 2) << "; ";
    }

    // Critic: squared error against fixed targets, parameters and inputs.
    sac::Agent agent = sac::make_agent(sac::ActorKind::kFlat, obs_dim, policy::GroupIndexMap::singletons(6), cfg, 8);
    MatrixXd x(obs_dim + 6, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal01(rng);
    RowVectorXd y(4);
    for (auto& v : y) v = normal01(rng);
    auto loss = [&](const nn::Mlp& net, const MatrixXd& in) {
      return 0.5 * (net.forward(in) - y).squaredNorm();
    };
    nn::Mlp::Cache cache;
    const RowVectorXd out = agent.q1.forward(x, &cache);
    VectorXd grad;
    const MatrixXd dx = agent.q1.backward(cache, out - y, grad);
    GradCheck critic, input;
    const VectorXd p0 = agent.q1.params();
    for (Eigen::Index i : coordinates(p0.size(), 300, rng)) {
      nn::Mlp np = agent.q1, nm = agent.q1;
      np.params()[i] += h;
      nm.params()[i] -= h;
      critic.add(grad[i], (loss(np, x) - loss(nm, x)) / (2 * h));
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      MatrixXd xp = x, xm = x;
      xp.data()[i] += h;
      xm.data()[i] -= h;
      input.add(dx.data()[i], (loss(agent.q1, xp) - loss(agent.q1, xm)) / (2 * h));
    }
    worst = std::max({worst, critic.rel(), input.rel()});
    detail << "critic[" << hidden[0] << "] " << fmt(critic.rel(), 2) << ", input " << fmt(input.rel(), 2) << "; ";
  }
  return {worst <= 1e-4, "worst rel err " + fmt(worst, 3) + " (tol 1e-4): " + detail.str()};
}

// ---------------------------------------------------------------------------
// 4-6. Synergy structure on arm2x6 and the mirrored pair.

synergy::Extraction run_extraction(const plant::Model& model, std::size_t steps, std::size_t n_seeds) {
  synergy::PerturbationConfig base;
  base.total_steps = steps;
  std::vector<std::uint64_t> seeds(n_seeds);
  std::iota(seeds.begin(), seeds.end(), 0);
  return synergy::extract(model, base, seeds);
}

std::string describe(const synergy::GroupingResult& g, const plant::Model& model) {
  const auto names = synergy::muscle_names(model);
  std::string s;
  for (const auto& grp : g.groups) {
    s += "{";
    for (std::size_t k = 0; k < grp.size(); ++k) s += (k ? "," : "") + names[static_cast<std::size_t>(grp[k])];
    s += "}";
  }
  return s;
}

Outcome criterion4() {
  const auto model = plant::arm2x6();
  const auto ex = run_extraction(model, 50000, 10);
  const std::vector<std::pair<std::string, std::string>> antagonists{
      {"shoulder_flexor", "shoulder_extensor"},
      {"elbow_flexor", "elbow_extensor"},
      {"biarticular_flexor", "biarticular_extensor"}};
  int good = 0;
  std::string failures;
  for (const auto& run : ex.runs) {
    const auto labels = run.grouping.labels();
    const MatrixXd& r = run.correlation.r;
    bool ok = true;
    double antagonist_r = -INFINITY;
    for (const auto& [f, e] : antagonists) {
      const auto i = index_of(model, f), j = index_of(model, e);
      ok &= labels[i] != labels[j];
      antagonist_r = std::max(antagonist_r, r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    // A bi-articular muscle may join mono-articular muscles of its own
    // side only when their correlation beats every antagonist pair's.
    for (const auto& [bi, monos] : std::vector<std::pair<std::string, std::vector<std::string>>>{
             {"biarticular_flexor", {"shoulder_flexor", "elbow_flexor"}},
             {"biarticular_extensor", {"shoulder_extensor", "elbow_extensor"}}}) {
      const auto b = index_of(model, bi);
      for (const auto& mono : monos) {
        const auto m = index_of(model, mono);
        if (labels[b] == labels[m])
          ok &= r(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(m)) > antagonist_r;
      }
    }
    good += ok;
    if (!ok) failures += " seed " + std::to_string(run.seed) + ": " + describe(run.grouping, model);
  }
  return {good == 10, std::to_string(good) + "/10 seeds separate antagonists, N_s = 50000, N_g = " +
                          std::to_string(ex.selection.n_groups) + ", seed 0 " + describe(ex.runs[0].grouping, model) +
                          failures};
}

Outcome criterion5() {
  const auto model = plant::arm2x6_mirrored();
  const auto ex = run_extraction(model, synergy::PerturbationConfig{}.total_steps, 10);
  const auto names = synergy::muscle_names(model);
  auto copy = [&](std::size_t i) { return names[i].substr(names[i].size() - 2); };
  int cross_pairs = 0;
  double max_r = 0.0;
  for (const auto& run : ex.runs) {
    const auto labels = run.grouping.labels();
    for (std::size_t i = 0; i < names.size(); ++i)
      for (std::size_t j = i + 1; j < names.size(); ++j)
        if (copy(i) != copy(j)) {
          cross_pairs += labels[i] == labels[j];
          max_r = std::max(max_r, std::abs(run.correlation.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
        }
  }
  return {cross_pairs == 0 && max_r < 0.2, std::to_string(cross_pairs) + " cross-copy co-groupings, max cross-copy |R| " +
                                               fmt(max_r, 3) + " (< 0.2), 10 seeds, N_g = " +
                                               std::to_string(ex.selection.n_groups)};
}

synergy::Extraction criterion6_extraction;

Outcome criterion6() {
  const auto model = plant::arm2x6();
  criterion6_extraction = run_extraction(model, synergy::PerturbationConfig{}.total_steps, 10);
  const MatrixXd& p = criterion6_extraction.probability.p;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) worst = std::max(worst, std::min(p.data()[i], 1.0 - p.data()[i]));
  return {worst <= 0.1, "max distance of P to {0,1} " + fmt(worst, 3) + " (tol 0.1), 10 seeds, grouping " +
                            describe(criterion6_extraction.runs[0].grouping, model)};
}

// ---------------------------------------------------------------------------
// 7. Sample-size convergence.

Outcome criterion7() {
  const auto study = synergy::convergence_study(plant::arm2x6(), {}, {500, 10000, 50000}, 10);
  const double d500 = study.rows[0].distance, d10k = study.rows[1].distance;
  return {d10k <= 0.25 * d500, "distance to 50000-step reference: 500 -> " + fmt(d500) + ", 10000 -> " + fmt(d10k) +
                                   " (need <= 25% of the 500-step value), N_g = " + std::to_string(study.n_groups)};
}

// ---------------------------------------------------------------------------
// 8. Composition against a scalar re-implementation.

double clip(double v, double lo, double hi) { return v < lo ? lo : (hi < v ? hi : v); }

// c = min(max(k_D (t - a_D), 0), kappa); representative (smallest member)
// takes a_G of its group, every other member a_G clip(kappa w, -c, c),
// clipped to [-1, 1]. Weights index non-representatives in muscle order.
std::vector<double> oracle_compose(const std::vector<double>& a_g, const std::vector<double>& w,
                                   const std::vector<std::vector<int>>& groups, double t, double k_d, double a_d,
                                   double kappa) {
  double c = k_d * (t - a_d);
  if (c < 0.0) c = 0.0;
  if (c > kappa) c = kappa;
  int n = 0;
  for (const auto& g : groups) n += static_cast<int>(g.size());
  std::vector<double> out(static_cast<std::size_t>(n));
  int next_weight = 0;
  for (int m = 0; m < n; ++m) {
    std::size_t k = 0;
    while (std::find(groups[k].begin(), groups[k].end(), m) == groups[k].end()) ++k;
    int rep = groups[k][0];
    for (int x : groups[k]) rep = x < rep ? x : rep;
    double v;
    if (m == rep) {
      v = a_g[k];
    } else {
      v = a_g[k] * clip(kappa * w[static_cast<std::size_t>(next_weight)], -c, c);
      ++next_weight;
    }
    out[static_cast<std::size_t>(m)] = clip(v, -1.0, 1.0);
  }
  return out;
}

Outcome criterion8() {
  Rng rng(108);
  int mismatches = 0, zero_regime = 0, cap_regime = 0, zero_violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 11));
    const int k = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    // Random partition: shuffle, cut into k non-empty pieces.
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[uniform_index(rng, static_cast<std::uint64_t>(i + 1))]);
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(k));
    for (int i = 0; i < n; ++i) groups[static_cast<std::size_t>(i < k ? i : static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(k))))].push_back(perm[static_cast<std::size_t>(i)]);

    const double k_d = std::pow(10.0, uniform(rng, -8.0, -2.0));
    const double a_d = uniform(rng, 0.0, 1e6);
    const double kappa = uniform(rng, 0.1, 3.0);
    double t;
    switch (trial % 3) {
      case 0: t = uniform(rng, 0.0, a_d); break;                       // c = 0
      case 1: t = a_d + (kappa / k_d) * uniform(rng, 1.0, 10.0); break;  // capped at kappa
      default: t = a_d + (kappa / k_d) * uniform(rng, 0.0, 1.2); break;
    }
    std::vector<double> a_g(static_cast<std::size_t>(k)), w(static_cast<std::size_t>(n - k));
    for (auto& v : a_g) v = uniform(rng, -1.0, 1.0);
    for (auto& v : w) v = uniform(rng, -1.5, 1.5);

    const policy::ClipSchedule sched{k_d, a_d, kappa};
    const VectorXd got = policy::compose_action(Eigen::Map<const VectorXd>(a_g.data(), k),
                                                Eigen::Map<const VectorXd>(w.data(), n - k),
                                                policy::GroupIndexMap(groups), t, sched);
    const auto want = oracle_compose(a_g, w, groups, t, k_d, a_d, kappa);
    if (std::memcmp(got.data(), want.data(), want.size() * sizeof(double)) != 0) ++mismatches;
    const double c = policy::clip_bound(t, sched);
    if (c == 0.0) {
      ++zero_regime;
      policy::GroupIndexMap map(groups);
      for (int m = 0; m < n; ++m)
        if (!map.representative(static_cast<std::size_t>(m)) && got[m] != 0.0) ++zero_violations;
    }
    cap_regime += c == kappa;
  }
  return {mismatches == 0 && zero_violations == 0 && zero_regime > 0 && cap_regime > 0,
          std::to_string(mismatches) + "/1000 bitwise mismatches; " + std::to_string(zero_regime) + " cases at c = 0 (" +
              std::to_string(zero_violations) + " nonzero a_I), " + std::to_string(cap_regime) + " at the kappa cap"};
}

// ---------------------------------------------------------------------------
// 9-10. Learning on reach_env.

// Desk-scale reach protocol. Targets lie in a 4 x 6 cm box just inside the
// fully extended tip, which stays near the start posture.
tasks::TaskConfig reach_task() {
  tasks::TaskConfig t;
  t.episode_length = 100;
  t.w_p = 1.0;
  t.w_a = 0.1;
  t.target_min = plant::Vec2{0.45, -0.03};
  t.target_max = plant::Vec2{0.49, 0.03};
  return t;
}

constexpr std::size_t kReachBudget = 60000;

sac::SacConfig reach_sac() {
  sac::SacConfig c;
  c.hidden = {64, 64};
  c.total_steps = kReachBudget;
  c.eval_interval = 5000;
  c.eval_episodes = 5;
  // Group weights open from 20k steps and reach kappa at 120k.
  c.clip = {1e-5, 20000.0, 1.0};
  return c;
}

policy::GroupIndexMap extracted_grouping() {
  if (criterion6_extraction.runs.empty())
    criterion6_extraction = run_extraction(plant::arm2x6(), synergy::PerturbationConfig{}.total_steps, 10);
  return policy::GroupIndexMap(criterion6_extraction.selection.grouping.groups);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

fs::path output_root;

Outcome criterion9() {
  const auto model = plant::arm2x6();
  const auto task = reach_task();
  const double threshold = 0.9 * task.w_p * static_cast<double>(task.episode_length) * 0.5;
  const sac::SacConfig cfg = reach_sac();
  const auto map = extracted_grouping();
  const fs::path dir = output_root / "criterion9";
  fs::create_directories(dir);

  std::ostringstream detail;
  std::vector<double> medians;
  bool dynsyn_censored = false;
  for (sac::ActorKind kind : {sac::ActorKind::kDynSyn, sac::ActorKind::kFlat}) {
    std::vector<double> steps;
    detail << sac::to_string(kind) << " steps";
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      sac::TrainOptions opts;
      opts.stop_at_return = threshold;
      const auto r = sac::train([&] { return tasks::reach_env(model, task); }, kind,
                                kind == sac::ActorKind::kFlat ? policy::GroupIndexMap::singletons(6) : map, cfg, seed,
                                opts);
      sac::write_curve_csv(r.curve, (dir / (sac::to_string(kind) + "_seed" + std::to_string(seed) + ".csv")).string());
      // A run that never reaches the threshold is counted at the budget; for
      // the flat baseline that understates what it needs.
      const bool reached = r.first_step_at_stop > 0;
      steps.push_back(reached ? static_cast<double>(r.first_step_at_stop) : static_cast<double>(kReachBudget));
      detail << ' ' << (reached ? std::to_string(r.first_step_at_stop) : ">" + std::to_string(kReachBudget));
    }
    const double m = median(steps);
    medians.push_back(m);
    if (kind == sac::ActorKind::kDynSyn) dynsyn_censored = m >= static_cast<double>(kReachBudget);
    detail << " (median " << m << "); ";
  }
  const bool pass = !dynsyn_censored && medians[0] <= 0.6 * medians[1];
  detail << "threshold " << threshold << ", need dynsyn median <= 0.6 x flat median";
  return {pass, detail.str()};
}

Outcome criterion10() {
  cli::RunConfig c;
  c.seeds = {3};
  c.jobs = 1;
  c.task_config = reach_task();
  c.sac = reach_sac();
  c.sac.total_steps = 20000;
  c.sac.eval_interval = 2000;
  std::ostringstream log;
  c.out = (output_root / "criterion10" / "a").string();
  cli::cmd_train(c, log);
  c.out = (output_root / "criterion10" / "b").string();
  cli::cmd_train(c, log);
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  const auto a = bytes(output_root / "criterion10" / "a" / "seed_3" / "curve.csv");
  const auto b = bytes(output_root / "criterion10" / "b" / "seed_3" / "curve.csv");
  const auto ca = bytes(output_root / "criterion10" / "a" / "seed_3" / "checkpoint.bin");
  const auto cb = bytes(output_root / "criterion10" / "b" / "seed_3" / "checkpoint.bin");
  const auto rows = static_cast<std::size_t>(std::count(a.begin(), a.end(), '\n'));
  return {!a.empty() && a == b && ca == cb,
          std::string(a == b ? "identical" : "different") + " curves (" + std::to_string(rows - 1) + " points), " +
              (ca == cb ? "identical" : "different") + " final checkpoints, 20000 steps"};
}

// ---------------------------------------------------------------------------
// 11. K-medoids against exhaustive enumeration.

double exhaustive_optimum(const MatrixXd& d, int k) {
  const int n = static_cast<int>(d.rows());
  double best = INFINITY;
  std::vector<bool> pick(static_cast<std::size_t>(n), false);
  std::fill(pick.begin(), pick.begin() + k, true);
  do {
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      double nearest = INFINITY;
      for (int m = 0; m < n; ++m)
        if (pick[static_cast<std::size_t>(m)]) nearest = std::min(nearest, d(i, m));
      cost += nearest;
    }
    best = std::min(best, cost);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

Outcome criterion11() {
  Rng rng(111);
  int agree = 0, total = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    MatrixXd d = MatrixXd::Zero(8, 8);
    for (int i = 0; i < 8; ++i)
      for (int j = i + 1; j < 8; ++j) d(i, j) = d(j, i) = uniform(rng, 0.0, 2.0);
    for (int k : {2, 3}) {
      const double got = synergy::kmedoids(d, static_cast<std::size_t>(k), static_cast<std::uint64_t>(trial)).cost;
      const double gap = got - exhaustive_optimum(d, k);
      worst = std::max(worst, gap);
      agree += gap <= 1e-12;
      ++total;
    }
  }
  return {agree == total, std::to_string(agree) + "/" + std::to_string(total) +
                              " instances at the global optimum (worst excess " + fmt(worst, 3) + ")"};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string out = (fs::temp_directory_path() / "dynsyn_acceptance").string();
  app.add_option("--only", only, "Criteria to run")->delimiter(',');
  app.add_option("--out", out, "Directory for learning curves and run outputs");
  CLI11_PARSE(app, argc, argv);
  output_root = out;
  fs::create_directories(output_root);

  const std::vector<Criterion> criteria{
      {1, "activation dynamics", 10, criterion1},
      {2, "moment arms", 5, criterion2},
      {3, "network gradients", 30, criterion3},
      {4, "synergy structure", 120, criterion4},
      {5, "bilateral independence", 240, criterion5},
      {6, "grouping stability", INFINITY, criterion6},
      {7, "sample-size convergence", 300, criterion7},
      {8, "composition exactness", 1, criterion8},
      {9, "sample efficiency", 1800, criterion9},
      {10, "determinism", 300, criterion10},
      {11, "k-medoids optimality", 5, criterion11},
  };
  const std::set<int> selected(only.begin(), only.end());
  bool all = true;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    all &= pass;
    std::cout << "criterion " << std::setw(2) << c.id << " " << (pass ? "PASS" : "FAIL") << "  " << c.name << ": "
              << o.detail << " [" << fmt(secs, 3) << " s"
              << (std::isfinite(c.limit_seconds) ? ", limit " + fmt(c.limit_seconds) + " s" : std::string()) << "]"
              << (in_time ? "" : " TIME LIMIT EXCEEDED") << std::endl;
  }
  return all ? 0 : 1;
}
