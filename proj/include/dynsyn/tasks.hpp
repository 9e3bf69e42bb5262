#pragma once

// Episodic control tasks over the plant. Observation layout (all tasks):
//   [0]                    time since reset (s)
//   [1, 1+N)               q
//   [1+N, 1+2N)            qdot
//   next N_m               muscle force / f_max
//   next N_m               normalized fiber length
//   next N_m               normalized fiber velocity
//   next N_m               activation
//   extras                 reach: target xy, tip xy, target - tip
//                          oscillate: reference angle, cos and sin of phase

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dynsyn/errors.hpp"
#include "dynsyn/plant.hpp"
#include "dynsyn/random.hpp"

namespace dynsyn::tasks {

using Eigen::VectorXd;
using plant::Vec2;

struct TaskConfig {
  std::size_t episode_length = 100;  // steps
  double dt = 0.01;
  double w_p = 1.0;
  double w_a = 0.1;
  double alive_bonus = 0.0;
  // Reach targets are drawn uniformly from this box; unset means the whole
  // reachable workspace.
  std::optional<Vec2> target_min, target_max;
  std::vector<double> initial_q;  // empty: zeros
  double initial_q_noise = 0.0;   // uniform +- rad added at reset
  // Oscillation reference q_ref(t) = amplitude cos(2 pi t / period).
  int osc_joint = 0;
  double osc_amplitude = 0.5;
  double osc_period = 1.0;

  void validate() const {
    if (episode_length < 1) throw ParameterError("task: episode_length must be >= 1");
    if (!(dt > 0.0 && dt <= 0.01)) throw ParameterError("task: dt must lie in (0, 0.01]");
    if (!(w_p >= 0.0 && w_a >= 0.0 && alive_bonus >= 0.0)) throw ParameterError("task: reward weights must be >= 0");
    if (target_min.has_value() != target_max.has_value())
      throw ParameterError("task: target_min and target_max must be given together");
    if (target_min && !((*target_min).array() <= (*target_max).array()).all())
      throw ParameterError("task: target_min must not exceed target_max");
    if (!(initial_q_noise >= 0.0)) throw ParameterError("task: initial_q_noise must be >= 0");
    if (!(osc_period > 0.0)) throw ParameterError("task: osc_period must be > 0");
  }
};

struct StepResult {
  VectorXd obs;
  double reward = 0.0;
  bool done = false;        // episode over for any reason
  bool terminated = false;  // ended by a failure, not the time limit
};

// What the trainer needs from an environment. Actions are excitations in
// [0, 1]^action_dim.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t obs_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual VectorXd reset(std::uint64_t seed) = 0;
  virtual StepResult step(const VectorXd& ctrl) = 0;
};

class Env : public Environment {
 public:
  Env(plant::Model model, TaskConfig config) : model_(std::move(model)), config_(std::move(config)) {
    config_.validate();
    plant::validate(model_);
    if (!config_.initial_q.empty() && config_.initial_q.size() != model_.dof())
      throw ParameterError("task: initial_q has " + std::to_string(config_.initial_q.size()) + " entries, model has " +
                           std::to_string(model_.dof()) + " joints");
    state_ = plant::initial_state(model_, base_q());
  }

  const plant::Model& model() const { return model_; }
  const TaskConfig& config() const { return config_; }
  std::size_t n_muscles() const { return model_.muscle_count(); }
  std::size_t obs_dim() const override { return 1 + 2 * model_.dof() + 4 * model_.muscle_count() + extras_dim(); }
  std::size_t action_dim() const override { return model_.muscle_count(); }
  const plant::PlantState& state() const { return state_; }
  std::size_t step_count() const { return steps_; }

  VectorXd reset(std::uint64_t seed) override {
    rng_.seed(seed);
    VectorXd q = base_q();
    for (Eigen::Index i = 0; i < q.size(); ++i)
      q[i] += uniform(rng_, -config_.initial_q_noise, config_.initial_q_noise);
    state_ = plant::initial_state(model_, q);
    steps_ = 0;
    failed_ = false;
    on_reset();
    return observation();
  }

  StepResult step(const VectorXd& ctrl) override {
    if (ctrl.size() != static_cast<Eigen::Index>(n_muscles()))
      throw ParameterError("step: ctrl has " + std::to_string(ctrl.size()) + " entries, expected " +
                           std::to_string(n_muscles()));
    for (Eigen::Index i = 0; i < ctrl.size(); ++i)
      if (!(ctrl[i] >= 0.0 && ctrl[i] <= 1.0)) throw DomainError("step: ctrl must lie in [0, 1]");
    if (steps_ >= config_.episode_length || failed_) throw ParameterError("step: episode is over, call reset");
    StepResult r;
    try {
      state_ = plant::step(model_, state_, ctrl, config_.dt);
    } catch (const IntegrationError&) {
      failed_ = true;
    }
    ++steps_;
    if (failed_) {
      r.obs = last_obs_;
      r.done = r.terminated = true;
      return r;
    }
    r.obs = observation();
    r.reward = reward();
    r.done = steps_ >= config_.episode_length;
    return r;
  }

  double time() const { return static_cast<double>(steps_) * config_.dt; }

 protected:
  virtual std::size_t extras_dim() const = 0;
  virtual void write_extras(VectorXd& obs, Eigen::Index at) const = 0;
  virtual double task_reward() const = 0;
  virtual void on_reset() {}

  double activation_norm() const {
    double s = 0.0;
    for (const auto& m : state_.muscles) s += m.act * m.act;
    return std::sqrt(s) / static_cast<double>(n_muscles());
  }
  double reward() const { return task_reward() - config_.w_a * activation_norm() + config_.alive_bonus; }

  VectorXd observation() {
    const auto n = static_cast<Eigen::Index>(model_.dof());
    const auto nm = static_cast<Eigen::Index>(n_muscles());
    VectorXd obs(static_cast<Eigen::Index>(obs_dim()));
    obs[0] = time();
    obs.segment(1, n) = state_.q;
    obs.segment(1 + n, n) = state_.qdot;
    const Eigen::Index base = 1 + 2 * n;
    for (Eigen::Index m = 0; m < nm; ++m) {
      const auto& ms = state_.muscles[static_cast<std::size_t>(m)];
      obs[base + m] = ms.force / model_.routing.muscles[static_cast<std::size_t>(m)].params.f_max;
      obs[base + nm + m] = ms.l_norm;
      obs[base + 2 * nm + m] = ms.v_norm;
      obs[base + 3 * nm + m] = ms.act;
    }
    write_extras(obs, base + 4 * nm);
    if (!obs.allFinite()) failed_ = true;
    last_obs_ = obs;
    return obs;
  }

  VectorXd base_q() const {
    VectorXd q = VectorXd::Zero(static_cast<Eigen::Index>(model_.dof()));
    for (std::size_t i = 0; i < config_.initial_q.size(); ++i) q[static_cast<Eigen::Index>(i)] = config_.initial_q[i];
    return q;
  }

  plant::Model model_;
  TaskConfig config_;
  plant::PlantState state_;
  Rng rng_;
  std::size_t steps_ = 0;
  bool failed_ = false;
  VectorXd last_obs_;
};

// Tip positions over a joint-space grid, at most ~20000 points.
inline std::vector<Vec2> reachable_points(const plant::Model& model) {
  const std::size_t n = model.dof();
  int per = 2;
  while (std::pow(per + 1, static_cast<double>(n)) <= 20000.0 && per < 101) ++per;
  std::vector<int> idx(n, 0);
  std::vector<Vec2> out;
  VectorXd q(static_cast<Eigen::Index>(n));
  while (true) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto& l = model.chain.links[j];
      q[static_cast<Eigen::Index>(j)] = l.q_min + (l.q_max - l.q_min) * idx[j] / (per - 1);
    }
    out.push_back(plant::end_effector(model, q));
    std::size_t j = 0;
    while (j < n && ++idx[j] == per) idx[j++] = 0;
    if (j == n) break;
  }
  return out;
}

// p_tip tracking: w_p exp(-10 sqrt(|target - tip|)) - w_a |act| / N_m.
class ReachEnv : public Env {
 public:
  ReachEnv(plant::Model model, TaskConfig config) : Env(std::move(model), std::move(config)) {
    reachable_ = reachable_points(model_);
    lo_ = hi_ = reachable_.front();
    for (const auto& p : reachable_) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    double spacing = 0.0;
    for (std::size_t i = 1; i < std::min<std::size_t>(reachable_.size(), 50); ++i)
      spacing = std::max(spacing, (reachable_[i] - reachable_[i - 1]).norm());
    tolerance_ = spacing;
    if (config_.target_min) {
      if (!(((*config_.target_min).array() >= lo_.array()).all() && ((*config_.target_max).array() <= hi_.array()).all()))
        throw ParameterError("reach: target box lies outside the reachable workspace [" + std::to_string(lo_.x()) +
                             ", " + std::to_string(hi_.x()) + "] x [" + std::to_string(lo_.y()) + ", " +
                             std::to_string(hi_.y()) + "]");
    }
    target_ = plant::end_effector(model_, state_.q);
  }

  const Vec2& target() const { return target_; }
  Vec2 tip() const { return plant::end_effector(model_, state_.q); }
  Vec2 workspace_min() const { return lo_; }
  Vec2 workspace_max() const { return hi_; }

  // Overrides the sampled target until the next reset.
  void set_target(const Vec2& t) {
    if (!(t.array() >= lo_.array()).all() || !(t.array() <= hi_.array()).all())
      throw ParameterError("reach: target outside the reachable workspace");
    target_ = t;
  }

 protected:
  std::size_t extras_dim() const override { return 6; }
  void write_extras(VectorXd& obs, Eigen::Index at) const override {
    const Vec2 p = tip();
    obs.segment(at, 2) = target_;
    obs.segment(at + 2, 2) = p;
    obs.segment(at + 4, 2) = target_ - p;
  }
  double task_reward() const override {
    return config_.w_p * std::exp(-10.0 * std::sqrt((target_ - tip()).norm()));
  }
  void on_reset() override {
    if (config_.target_min) {
      target_ = {uniform(rng_, config_.target_min->x(), config_.target_max->x()),
                 uniform(rng_, config_.target_min->y(), config_.target_max->y())};
      return;
    }
    // Uniform over the workspace box, rejecting points far from every
    // reachable grid sample.
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const Vec2 c{uniform(rng_, lo_.x(), hi_.x()), uniform(rng_, lo_.y(), hi_.y())};
      for (const auto& p : reachable_)
        if ((p - c).norm() <= tolerance_) {
          target_ = c;
          return;
        }
    }
    target_ = reachable_[uniform_index(rng_, reachable_.size())];
  }

 private:
  std::vector<Vec2> reachable_;
  Vec2 lo_, hi_, target_;
  double tolerance_ = 0.0;
};

// exp(-(q_j - A cos(2 pi t / period))^2) - w_a |act| / N_m.
class OscillateEnv : public Env {
 public:
  OscillateEnv(plant::Model model, TaskConfig config) : Env(std::move(model), std::move(config)) {
    if (config_.osc_joint < 0 || static_cast<std::size_t>(config_.osc_joint) >= model_.dof())
      throw ParameterError("oscillate: osc_joint out of range");
  }

  double reference(double t) const { return config_.osc_amplitude * std::cos(2.0 * M_PI * t / config_.osc_period); }

 protected:
  std::size_t extras_dim() const override { return 3; }
  void write_extras(VectorXd& obs, Eigen::Index at) const override {
    const double phase = 2.0 * M_PI * time() / config_.osc_period;
    obs[at] = reference(time());
    obs[at + 1] = std::cos(phase);
    obs[at + 2] = std::sin(phase);
  }
  double task_reward() const override {
    const double e = state_.q[config_.osc_joint] - reference(time());
    return config_.w_p * std::exp(-e * e);
  }
};

inline std::unique_ptr<Env> reach_env(const plant::Model& model, const TaskConfig& config) {
  return std::make_unique<ReachEnv>(model, config);
}

inline std::unique_ptr<Env> oscillate_env(const plant::Model& model, const TaskConfig& config) {
  return std::make_unique<OscillateEnv>(model, config);
}

inline std::unique_ptr<Env> make_env(const std::string& task, const plant::Model& model, const TaskConfig& config) {
  if (task == "reach") return reach_env(model, config);
  if (task == "oscillate") return oscillate_env(model, config);
  throw LookupError("unknown task '" + task + "' (expected reach or oscillate)");
}

// ---------------------------------------------------------------------------
// Episode traces

struct TraceRow {
  double t = 0.0;
  VectorXd q, ctrl;
  double reward = 0.0;
};

inline void write_trace_csv(const std::vector<TraceRow>& rows, const plant::Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.precision(17);
  out << "t";
  for (const auto& l : model.chain.links) out << ",q_" << l.name;
  for (const auto& m : model.routing.muscles) out << ",ctrl_" << m.name;
  out << ",reward\n";
  for (const auto& r : rows) {
    out << r.t;
    for (Eigen::Index i = 0; i < r.q.size(); ++i) out << ',' << r.q[i];
    for (Eigen::Index i = 0; i < r.ctrl.size(); ++i) out << ',' << r.ctrl[i];
    out << ',' << r.reward << '\n';
  }
}

}  // namespace dynsyn::tasks
