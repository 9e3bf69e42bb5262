#pragma once

// Soft actor-critic over either a flat squashed-Gaussian actor or the
// synergy head. A flat actor is the synergy head over singleton groups, so
// both share every code path.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dynsyn/errors.hpp"
#include "dynsyn/nn.hpp"
#include "dynsyn/policy.hpp"
#include "dynsyn/random.hpp"
#include "dynsyn/tasks.hpp"

namespace dynsyn::sac {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;
using policy::ClipSchedule;
using policy::DynSynHead;
using policy::GroupIndexMap;

enum class ActorKind { kFlat, kDynSyn };

inline std::string to_string(ActorKind k) { return k == ActorKind::kFlat ? "flat" : "dynsyn"; }
inline ActorKind actor_kind_from_string(const std::string& s) {
  if (s == "flat") return ActorKind::kFlat;
  if (s == "dynsyn") return ActorKind::kDynSyn;
  throw ParameterError("unknown actor kind '" + s + "' (expected flat or dynsyn)");
}

struct SacConfig {
  std::size_t batch_size = 256;
  std::size_t buffer_size = 1000000;
  std::size_t warmup_steps = 100;
  double gamma = 0.98;
  double tau = 0.005;
  std::size_t train_frequency = 1;
  std::size_t gradient_steps = 4;
  std::size_t target_update_interval = 1;
  std::size_t n_envs = 8;
  double learning_rate = 1e-3;
  bool linear_lr_decay = true;
  double initial_alpha = 1.0;
  std::optional<double> target_entropy;  // unset: -dim(a_G)
  std::vector<int> hidden{256, 256};
  std::size_t total_steps = 100000;  // environment steps over all envs
  std::size_t eval_interval = 5000;
  std::size_t eval_episodes = 5;
  std::size_t checkpoint_interval = 0;  // 0: only at start and end
  ClipSchedule clip;

  void validate() const {
    for (auto [v, name] : {std::pair{batch_size, "batch_size"}, {buffer_size, "buffer_size"},
                           {train_frequency, "train_frequency"}, {target_update_interval, "target_update_interval"},
                           {n_envs, "n_envs"}, {eval_interval, "eval_interval"}, {eval_episodes, "eval_episodes"}})
      if (v < 1) throw ParameterError(std::string("sac: ") + name + " must be >= 1");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("sac: gamma must lie in [0, 1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw ParameterError("sac: tau must lie in (0, 1]");
    if (!(learning_rate > 0.0)) throw ParameterError("sac: learning_rate must be > 0");
    if (!(initial_alpha > 0.0)) throw ParameterError("sac: initial_alpha must be > 0");
    for (int h : hidden)
      if (h < 1) throw ParameterError("sac: hidden sizes must be >= 1");
    clip.validate();
  }
};

// ---------------------------------------------------------------------------
// Replay

struct Transition {
  VectorXd obs;
  VectorXd action;  // executed action in [-1, 1]^{N_m}
  VectorXd a_g, w;
  double reward = 0.0;
  VectorXd next_obs;
  bool done = false;  // failure termination; time-limit ends bootstrap
  std::uint64_t t = 0;
};

struct Batch {
  MatrixXd obs, action, a_g, w, next_obs;
  RowVectorXd reward, done;
  std::vector<std::size_t> indices;
};

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim, int action_dim, int n_groups, int n_weights)
      : capacity_(capacity),
        obs_(obs_dim, static_cast<Eigen::Index>(capacity)),
        next_obs_(obs_dim, static_cast<Eigen::Index>(capacity)),
        action_(action_dim, static_cast<Eigen::Index>(capacity)),
        a_g_(n_groups, static_cast<Eigen::Index>(capacity)),
        w_(n_weights, static_cast<Eigen::Index>(capacity)),
        reward_(static_cast<Eigen::Index>(capacity)),
        done_(static_cast<Eigen::Index>(capacity)),
        t_(capacity) {
    if (capacity == 0) throw ParameterError("ReplayBuffer: capacity must be >= 1");
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }

  void add(const Transition& tr) {
    if (!tr.obs.allFinite() || !tr.next_obs.allFinite() || !tr.action.allFinite() || !std::isfinite(tr.reward))
      throw DomainError("ReplayBuffer: non-finite transition");
    if (tr.action.cwiseAbs().maxCoeff() > 1.0) throw DomainError("ReplayBuffer: action outside [-1, 1]");
    const auto i = static_cast<Eigen::Index>(head_);
    obs_.col(i) = tr.obs;
    next_obs_.col(i) = tr.next_obs;
    action_.col(i) = tr.action;
    a_g_.col(i) = tr.a_g;
    w_.col(i) = tr.w;
    reward_[i] = tr.reward;
    done_[i] = tr.done ? 1.0 : 0.0;
    t_[head_] = tr.t;
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }

  // Slot i counted from the oldest stored transition.
  Transition at(std::size_t i) const {
    if (i >= size_) throw LookupError("ReplayBuffer: index out of range");
    const std::size_t slot = (head_ + capacity_ - size_ + i) % capacity_;
    const auto s = static_cast<Eigen::Index>(slot);
    return {obs_.col(s), action_.col(s), a_g_.col(s), w_.col(s), reward_[s], next_obs_.col(s), done_[s] > 0.5, t_[slot]};
  }

  // Uniform with replacement.
  Batch sample(std::size_t n, Rng& rng) const {
    if (size_ == 0) throw ParameterError("ReplayBuffer: sample from empty buffer");
    Batch b;
    const auto cols = static_cast<Eigen::Index>(n);
    b.obs.resize(obs_.rows(), cols);
    b.next_obs.resize(obs_.rows(), cols);
    b.action.resize(action_.rows(), cols);
    b.a_g.resize(a_g_.rows(), cols);
    b.w.resize(w_.rows(), cols);
    b.reward.resize(cols);
    b.done.resize(cols);
    for (Eigen::Index k = 0; k < cols; ++k) {
      const std::size_t slot = uniform_index(rng, size_);
      b.indices.push_back(slot);
      const auto s = static_cast<Eigen::Index>(slot);
      b.obs.col(k) = obs_.col(s);
      b.next_obs.col(k) = next_obs_.col(s);
      b.action.col(k) = action_.col(s);
      b.a_g.col(k) = a_g_.col(s);
      b.w.col(k) = w_.col(s);
      b.reward[k] = reward_[s];
      b.done[k] = done_[s];
    }
    return b;
  }

 private:
  std::size_t capacity_, head_ = 0, size_ = 0;
  MatrixXd obs_, next_obs_, action_, a_g_, w_;
  VectorXd reward_, done_;
  std::vector<std::uint64_t> t_;
};

// ---------------------------------------------------------------------------
// Agent

struct Agent {
  ActorKind kind = ActorKind::kFlat;
  DynSynHead actor;
  nn::Mlp q1, q2, q1_target, q2_target;
  nn::AdamState actor_opt, q1_opt, q2_opt, alpha_opt;
  double log_alpha = 0.0;
  double target_entropy = 0.0;
  ClipSchedule clip;
  std::uint64_t step = 0;       // environment steps taken
  std::uint64_t updates = 0;    // gradient steps taken

  double alpha() const { return std::exp(log_alpha); }
  // Correction bound in force at the current step; flat actors have none.
  double clip_bound() const { return kind == ActorKind::kFlat ? 0.0 : policy::clip_bound(static_cast<double>(step), clip); }
  int obs_dim() const { return actor.obs_dim(); }
  int action_dim() const { return static_cast<int>(actor.map().n_muscles()); }
};

inline Agent make_agent(ActorKind kind, int obs_dim, const GroupIndexMap& map, const SacConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Agent a;
  a.kind = kind;
  a.clip = cfg.clip;
  Rng actor_rng(mix_seed(seed, 1)), critic_rng(mix_seed(seed, 2));
  a.actor = DynSynHead(obs_dim, cfg.hidden, kind == ActorKind::kFlat ? GroupIndexMap::singletons(map.n_muscles()) : map,
                       actor_rng);
  std::vector<int> qs{obs_dim + static_cast<int>(map.n_muscles())};
  qs.insert(qs.end(), cfg.hidden.begin(), cfg.hidden.end());
  qs.push_back(1);
  a.q1 = nn::Mlp(qs, critic_rng);
  a.q2 = nn::Mlp(qs, critic_rng);
  a.q1_target = a.q1;
  a.q2_target = a.q2;
  const nn::LinearSchedule sched{cfg.learning_rate, cfg.linear_lr_decay ? cfg.total_steps : 0};
  a.actor_opt = nn::AdamState(a.actor.flat_params().size(), sched);
  a.q1_opt = nn::AdamState(a.q1.params().size(), sched);
  a.q2_opt = nn::AdamState(a.q2.params().size(), sched);
  a.alpha_opt = nn::AdamState(1, sched);
  a.log_alpha = std::log(cfg.initial_alpha);
  a.target_entropy = cfg.target_entropy.value_or(-static_cast<double>(a.actor.n_groups()));
  return a;
}

inline MatrixXd critic_input(const MatrixXd& obs, const MatrixXd& action) {
  MatrixXd x(obs.rows() + action.rows(), obs.cols());
  x << obs, action;
  return x;
}

// Executed action for one observation. rng == nullptr gives the mean action.
struct ActionSample {
  VectorXd action, a_g, w;
};

inline ActionSample select_action(const Agent& agent, const VectorXd& obs, Rng* rng) {
  const auto out = policy::sample_heads(agent.actor, obs, rng);
  return {policy::compose_action(out.a_g, out.w, agent.actor.map(), agent.clip_bound(), agent.clip.kappa), out.a_g,
          out.w};
}

// r + gamma (1 - done) (min target Q(s', a') - alpha log pi(a_G' | s')).
inline RowVectorXd critic_target(const Batch& batch, const Agent& agent, double gamma, Rng& rng) {
  const auto next = policy::sample_batch(agent.actor, batch.next_obs, &rng);
  const MatrixXd a_next = policy::compose_batch(next.a_g, next.w, agent.actor.map(), agent.clip_bound(), agent.clip.kappa);
  const MatrixXd x = critic_input(batch.next_obs, a_next);
  const RowVectorXd q = agent.q1_target.forward(x).cwiseMin(agent.q2_target.forward(x));
  const RowVectorXd soft = q - agent.alpha() * next.log_prob;
  return batch.reward + gamma * (RowVectorXd::Ones(batch.reward.size()) - batch.done).cwiseProduct(soft);
}

struct ActorLoss {
  double loss = 0.0;
  VectorXd grad;  // over actor.flat_params()
  RowVectorXd log_prob;
};

// mean(alpha log pi(a_G|s) - min(Q1, Q2)(s, compose(a_G, w))) with the
// noise drawn from rng; gradients flow through the composition.
inline ActorLoss actor_loss(const MatrixXd& obs, const Agent& agent, double alpha, Rng& rng) {
  const auto s = policy::sample_batch(agent.actor, obs, &rng);
  policy::ComposeJacobian jac;
  const MatrixXd a = policy::compose_batch(s.a_g, s.w, agent.actor.map(), agent.clip_bound(), agent.clip.kappa, &jac);
  const MatrixXd x = critic_input(obs, a);
  nn::Mlp::Cache c1, c2;
  const RowVectorXd v1 = agent.q1.forward(x, &c1), v2 = agent.q2.forward(x, &c2);
  const double b = static_cast<double>(obs.cols());
  ActorLoss out;
  out.log_prob = s.log_prob;
  out.loss = (alpha * s.log_prob - v1.cwiseMin(v2)).sum() / b;

  // d loss / d Q_i routed to the smaller critic per sample.
  RowVectorXd g1 = RowVectorXd::Zero(v1.size()), g2 = RowVectorXd::Zero(v2.size());
  for (Eigen::Index k = 0; k < v1.size(); ++k) (v1[k] <= v2[k] ? g1 : g2)[k] = -1.0 / b;
  VectorXd scratch;
  const MatrixXd dx1 = agent.q1.backward(c1, g1, scratch);
  scratch.resize(0);
  const MatrixXd dx2 = agent.q2.backward(c2, g2, scratch);
  const MatrixXd da = (dx1 + dx2).bottomRows(a.rows());

  const auto& map = agent.actor.map();
  MatrixXd d_ag = MatrixXd::Zero(s.a_g.rows(), s.a_g.cols());
  MatrixXd d_w = MatrixXd::Zero(s.w.rows(), s.w.cols());
  for (Eigen::Index col = 0; col < a.cols(); ++col)
    for (std::size_t m = 0; m < map.n_muscles(); ++m) {
      const auto mi = static_cast<Eigen::Index>(m);
      d_ag(map.group(m), col) += da(mi, col) * jac.mult(mi, col);
      if (!map.representative(m)) d_w(map.weight_index(m), col) += da(mi, col) * jac.dw(mi, col);
    }
  out.grad = policy::backward(agent.actor, s, d_ag, d_w, RowVectorXd::Constant(s.log_prob.size(), alpha / b));
  return out;
}

// One Adam step on log alpha for loss -log_alpha * mean(log_prob + target).
inline double alpha_update(const RowVectorXd& log_prob, Agent& agent) {
  VectorXd p(1), g(1);
  p << agent.log_alpha;
  g << -(log_prob.array() + agent.target_entropy).mean();
  nn::adam_step_scheduled(p, g, agent.alpha_opt, agent.step);
  agent.log_alpha = p[0];
  return agent.alpha();
}

inline void polyak(nn::Mlp& target, const nn::Mlp& source, double tau) {
  target.params() = (1.0 - tau) * target.params() + tau * source.params();
}

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
};

inline UpdateStats gradient_step(Agent& agent, const ReplayBuffer& buffer, const SacConfig& cfg, Rng& rng) {
  const Batch batch = buffer.sample(cfg.batch_size, rng);
  const double b = static_cast<double>(cfg.batch_size);
  UpdateStats st;

  // Entropy temperature, using the current policy's log-probs.
  const auto current = policy::sample_batch(agent.actor, batch.obs, &rng);
  const double alpha = agent.alpha();
  alpha_update(current.log_prob, agent);

  // Critics.
  const RowVectorXd y = critic_target(batch, agent, cfg.gamma, rng);
  const MatrixXd x = critic_input(batch.obs, batch.action);
  for (auto [net, opt] : {std::pair{&agent.q1, &agent.q1_opt}, {&agent.q2, &agent.q2_opt}}) {
    nn::Mlp::Cache cache;
    const RowVectorXd q = net->forward(x, &cache);
    const RowVectorXd err = q - y;
    st.critic_loss += 0.5 * err.squaredNorm() / b;
    VectorXd grad;
    net->backward(cache, err / b, grad);
    nn::adam_step_scheduled(net->params(), grad, *opt, agent.step);
  }

  // Actor against the updated critics.
  const ActorLoss al = actor_loss(batch.obs, agent, alpha, rng);
  st.actor_loss = al.loss;
  VectorXd params = agent.actor.flat_params();
  nn::adam_step_scheduled(params, al.grad, agent.actor_opt, agent.step);
  agent.actor.set_flat_params(params);

  ++agent.updates;
  if (agent.updates % cfg.target_update_interval == 0) {
    polyak(agent.q1_target, agent.q1, cfg.tau);
    polyak(agent.q2_target, agent.q2, cfg.tau);
  }
  st.alpha = agent.alpha();
  return st;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void set_rng_state(Rng& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
  if (!is) throw FormatError("checkpoint: bad generator state");
}

inline nn::Archive agent_archive(const Agent& a) {
  nn::Archive ar;
  ar.put_text("kind", to_string(a.kind));
  ar.put_text("grouping.hash", a.actor.map().hash());
  ar.put_text("grouping.groups", nlohmann::json(a.actor.map().groups()).dump());
  ar.put_mlp("actor.trunk", a.actor.trunk());
  ar.put("actor.log_std_w", a.actor.log_std_w());
  ar.put_mlp("q1", a.q1);
  ar.put_mlp("q2", a.q2);
  ar.put_mlp("q1_target", a.q1_target);
  ar.put_mlp("q2_target", a.q2_target);
  ar.put_adam("actor_opt", a.actor_opt);
  ar.put_adam("q1_opt", a.q1_opt);
  ar.put_adam("q2_opt", a.q2_opt);
  ar.put_adam("alpha_opt", a.alpha_opt);
  VectorXd scalars(7);
  scalars << a.log_alpha, a.target_entropy, a.clip.k_d, a.clip.a_d, a.clip.kappa, static_cast<double>(a.step),
      static_cast<double>(a.updates);
  ar.put("scalars", scalars);
  return ar;
}

// `expected_hash`, when given, must match the stored grouping hash.
inline Agent agent_from_archive(const nn::Archive& ar, const std::optional<std::string>& expected_hash = std::nullopt) {
  Agent a;
  a.kind = actor_kind_from_string(ar.get_text("kind"));
  const std::string hash = ar.get_text("grouping.hash");
  if (expected_hash && *expected_hash != hash)
    throw ParameterError("checkpoint was trained with grouping " + hash + ", not " + *expected_hash);
  std::vector<std::vector<int>> groups;
  try {
    groups = nlohmann::json::parse(ar.get_text("grouping.groups")).get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad grouping: ") + e.what());
  }
  GroupIndexMap map(groups);
  if (map.hash() != hash) throw FormatError("checkpoint: grouping hash does not match stored groups");
  const nn::Mlp trunk = ar.get_mlp("actor.trunk");
  Rng dummy(0);
  a.actor = DynSynHead(trunk.input_size(), std::vector<int>(trunk.sizes().begin() + 1, trunk.sizes().end() - 1), map, dummy);
  if (a.actor.trunk().sizes() != trunk.sizes()) throw FormatError("checkpoint: actor shape does not match grouping");
  a.actor.trunk() = trunk;
  a.actor.log_std_w() = ar.get("actor.log_std_w");
  if (a.actor.log_std_w().size() != a.actor.n_weights()) throw FormatError("checkpoint: weight std size mismatch");
  a.q1 = ar.get_mlp("q1");
  a.q2 = ar.get_mlp("q2");
  a.q1_target = ar.get_mlp("q1_target");
  a.q2_target = ar.get_mlp("q2_target");
  a.actor_opt = ar.get_adam("actor_opt");
  a.q1_opt = ar.get_adam("q1_opt");
  a.q2_opt = ar.get_adam("q2_opt");
  a.alpha_opt = ar.get_adam("alpha_opt");
  const VectorXd& s = ar.get("scalars");
  if (s.size() != 7) throw FormatError("checkpoint: bad scalar block");
  a.log_alpha = s[0];
  a.target_entropy = s[1];
  a.clip = {s[2], s[3], s[4]};
  a.step = static_cast<std::uint64_t>(s[5]);
  a.updates = static_cast<std::uint64_t>(s[6]);
  return a;
}

// ---------------------------------------------------------------------------
// Training

struct CurvePoint {
  std::uint64_t step = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double alpha = 0.0;
  double c = 0.0;
};

inline void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path, bool append = false) {
  const bool header = !append || !std::ifstream(path).good();
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.precision(17);
  if (header) out << "step,mean_return,std_return,alpha,c\n";
  for (const auto& p : curve) out << p.step << ',' << p.mean_return << ',' << p.std_return << ',' << p.alpha << ',' << p.c << '\n';
}

inline std::vector<CurvePoint> read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line != "step,mean_return,std_return,alpha,c") throw FormatError("'" + path + "' is not a learning curve");
  std::vector<CurvePoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CurvePoint p;
    char comma;
    std::istringstream ls(line);
    if (!(ls >> p.step >> comma >> p.mean_return >> comma >> p.std_return >> comma >> p.alpha >> comma >> p.c))
      throw FormatError("'" + path + "': bad row '" + line + "'");
    out.push_back(p);
  }
  return out;
}

using EnvFactory = std::function<std::unique_ptr<tasks::Environment>()>;

struct EvalResult {
  std::vector<double> returns;
  double mean = 0.0;
  double std = 0.0;
};

// Mean-action episodes with reset seeds derived from `seed`.
inline EvalResult evaluate(const Agent& agent, tasks::Environment& env, std::size_t episodes, std::uint64_t seed,
                           const std::function<void(const VectorXd&, const VectorXd&, const tasks::StepResult&)>& on_step = {}) {
  if (episodes == 0) throw ParameterError("evaluate: episode count must be >= 1");
  EvalResult r;
  for (std::size_t e = 0; e < episodes; ++e) {
    VectorXd obs = env.reset(mix_seed(seed, e));
    double ret = 0.0;
    while (true) {
      const VectorXd ctrl = policy::to_excitation(select_action(agent, obs, nullptr).action);
      const auto st = env.step(ctrl);
      if (on_step) on_step(obs, ctrl, st);
      ret += st.reward;
      obs = st.obs;
      if (st.done) break;
    }
    r.returns.push_back(ret);
  }
  for (double v : r.returns) r.mean += v;
  r.mean /= static_cast<double>(episodes);
  for (double v : r.returns) r.std += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(r.std / static_cast<double>(episodes));
  return r;
}

struct TrainOptions {
  std::string checkpoint_path;  // empty: no checkpoints
  std::optional<Agent> resume;  // continue from this agent's step counter
  std::function<void(const CurvePoint&)> on_eval;
  // Stop as soon as an evaluation reaches this mean return.
  std::optional<double> stop_at_return;
};

struct TrainResult {
  std::vector<CurvePoint> curve;
  Agent agent;
  std::uint64_t first_step_at_stop = 0;  // step at which stop_at_return was met, 0 if never
};

// Runs n_envs environments in lockstep feeding one replay buffer. Each
// vectorized step is followed by gradient_steps updates every
// train_frequency vectorized steps once warmup is over. Single-threaded
// and deterministic for a fixed seed.
inline TrainResult train(const EnvFactory& factory, ActorKind kind, const GroupIndexMap& map, const SacConfig& cfg,
                         std::uint64_t seed, const TrainOptions& opts = {}) {
  cfg.validate();
  std::vector<std::unique_ptr<tasks::Environment>> envs;
  for (std::size_t i = 0; i < cfg.n_envs; ++i) envs.push_back(factory());
  auto eval_env = factory();
  const int obs_dim = static_cast<int>(envs[0]->obs_dim());
  if (envs[0]->action_dim() != map.n_muscles())
    throw ParameterError("train: grouping covers " + std::to_string(map.n_muscles()) + " muscles, environment has " +
                         std::to_string(envs[0]->action_dim()));

  TrainResult result;
  Agent& agent = result.agent;
  agent = opts.resume ? *opts.resume : make_agent(kind, obs_dim, map, cfg, seed);
  if (opts.resume) {
    if (agent.kind != kind) throw ParameterError("train: resumed checkpoint is a " + to_string(agent.kind) + " actor");
    if (kind == ActorKind::kDynSyn && agent.actor.map().hash() != map.hash())
      throw ParameterError("train: resumed checkpoint uses a different grouping");
    if (agent.obs_dim() != obs_dim) throw ParameterError("train: resumed checkpoint has a different observation size");
  }
  ReplayBuffer buffer(std::min(cfg.buffer_size, std::max<std::size_t>(cfg.total_steps, 1)), obs_dim,
                      agent.action_dim(), agent.actor.n_groups(), agent.actor.n_weights());
  // Independent streams for exploration, replay sampling and resets.
  Rng act_rng(mix_seed(seed, 10 + agent.step)), sample_rng(mix_seed(seed, 11 + agent.step));
  std::uint64_t episode_counter = agent.step;
  const std::uint64_t eval_seed = mix_seed(seed, 12);

  auto save = [&] {
    if (!opts.checkpoint_path.empty()) agent_archive(agent).save(opts.checkpoint_path);
  };
  save();

  std::vector<VectorXd> obs(cfg.n_envs);
  for (std::size_t i = 0; i < cfg.n_envs; ++i) obs[i] = envs[i]->reset(mix_seed(seed, 1000 + episode_counter++));

  std::uint64_t next_eval = (agent.step / cfg.eval_interval + 1) * cfg.eval_interval;
  std::uint64_t next_ckpt =
      cfg.checkpoint_interval ? (agent.step / cfg.checkpoint_interval + 1) * cfg.checkpoint_interval : 0;
  std::uint64_t vec_steps = 0;
  try {
    while (agent.step < cfg.total_steps) {
      for (std::size_t i = 0; i < cfg.n_envs; ++i) {
        ActionSample a;
        if (agent.step < cfg.warmup_steps) {
          a.a_g.resize(agent.actor.n_groups());
          a.w.resize(agent.actor.n_weights());
          for (auto& v : a.a_g) v = uniform(act_rng, -1.0, 1.0);
          for (auto& v : a.w) v = uniform(act_rng, -1.0, 1.0);
          a.action = policy::compose_action(a.a_g, a.w, agent.actor.map(), agent.clip_bound(), agent.clip.kappa);
        } else {
          a = select_action(agent, obs[i], &act_rng);
        }
        const auto st = envs[i]->step(policy::to_excitation(a.action));
        buffer.add({obs[i], a.action, a.a_g, a.w, st.reward, st.obs, st.terminated, agent.step});
        obs[i] = st.done ? envs[i]->reset(mix_seed(seed, 1000 + episode_counter++)) : st.obs;
        ++agent.step;
      }
      ++vec_steps;
      if (agent.step > cfg.warmup_steps && vec_steps % cfg.train_frequency == 0)
        for (std::size_t g = 0; g < cfg.gradient_steps; ++g) gradient_step(agent, buffer, cfg, sample_rng);

      if (agent.step >= next_eval) {
        next_eval += cfg.eval_interval;
        const auto ev = evaluate(agent, *eval_env, cfg.eval_episodes, eval_seed);
        const CurvePoint p{agent.step, ev.mean, ev.std, agent.alpha(), agent.clip_bound()};
        result.curve.push_back(p);
        if (opts.on_eval) opts.on_eval(p);
        if (opts.stop_at_return && ev.mean >= *opts.stop_at_return) {
          result.first_step_at_stop = agent.step;
          break;
        }
      }
      if (next_ckpt && agent.step >= next_ckpt) {
        next_ckpt += cfg.checkpoint_interval;
        save();
      }
    }
  } catch (...) {
    save();
    throw;
  }
  save();
  return result;
}

}  // namespace dynsyn::sac
