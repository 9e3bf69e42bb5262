#pragma once

// Planar tendon-driven rigid-link simulator.
//
// Links form a forest: every link hangs off its parent's distal end (or a
// fixed base point for roots) through one revolute joint, so joint i is the
// joint at the proximal end of link i and q has one entry per link. Joint
// angles are relative to the parent link. Muscles are pull-only paths
// through via-points fixed either to the ground (link = -1) or to a link.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dynsyn/errors.hpp"
#include "dynsyn/muscle.hpp"

namespace dynsyn::plant {

using Vec2 = Eigen::Vector2d;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kGround = -1;

struct Link {
  std::string name;
  int parent = kGround;
  Vec2 base = Vec2::Zero();  // joint position for root links (world frame)
  double mass = 1.0;         // kg
  double length = 0.3;       // m
  double com = 0.15;         // m, along the link axis
  double inertia = 0.01;     // kg m^2 about the center of mass
  double damping = 0.0;      // N m s / rad
  double q_min = -M_PI;      // rad
  double q_max = M_PI;       // rad
};

struct LinkChain {
  std::vector<Link> links;
  Vec2 gravity = Vec2::Zero();  // m/s^2
};

struct ViaPoint {
  int link = kGround;
  Vec2 point = Vec2::Zero();  // in the link frame (x along the link axis)
};

struct MuscleSpec {
  std::string name;
  std::vector<ViaPoint> path;
  double tendon_slack = 0.0;  // m; fiber length = path length - tendon_slack
  muscle::MuscleParams params;
};

struct TendonRouting {
  std::vector<MuscleSpec> muscles;
};

struct EndEffector {
  int link = 0;
  Vec2 point = Vec2::Zero();
};

struct Model {
  std::string name;
  LinkChain chain;
  TendonRouting routing;
  EndEffector tip;

  std::size_t dof() const { return chain.links.size(); }
  std::size_t muscle_count() const { return routing.muscles.size(); }
};

struct PlantState {
  VectorXd q;
  VectorXd qdot;
  std::vector<muscle::MuscleState> muscles;
  double t = 0.0;
};

// ---------------------------------------------------------------------------
// Validation

inline void validate(const Model& model) {
  const auto& links = model.chain.links;
  if (links.empty()) throw ParameterError("model '" + model.name + "' has no links");
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    const std::string where = "link " + std::to_string(i) + " ('" + l.name + "')";
    if (l.parent != kGround && (l.parent < 0 || l.parent >= static_cast<int>(i)))
      throw ParameterError(where + ": parent must precede the link");
    if (!(l.mass > 0 && l.length > 0 && l.inertia > 0))
      throw ParameterError(where + ": mass, length and inertia must be positive");
    if (!(l.damping >= 0)) throw ParameterError(where + ": damping must be >= 0");
    if (!(l.q_min < l.q_max)) throw ParameterError(where + ": q_min must be < q_max");
  }
  for (const auto& m : model.routing.muscles) {
    if (m.path.size() < 2)
      throw ParameterError("muscle '" + m.name + "' needs at least two via-points");
    for (const auto& vp : m.path)
      if (vp.link < kGround || vp.link >= static_cast<int>(links.size()))
        throw ParameterError("muscle '" + m.name + "' references an unknown link");
    if (!m.params.valid())
      throw ParameterError("muscle '" + m.name + "' has invalid parameters");
  }
  if (model.tip.link < 0 || model.tip.link >= static_cast<int>(links.size()))
    throw ParameterError("end effector references an unknown link");
}

// ---------------------------------------------------------------------------
// Kinematics

// World-frame joint origins and absolute link angles for a configuration.
struct Frames {
  std::vector<Vec2> origin;
  std::vector<double> angle;
  std::vector<Vec2> axis;  // unit vector along each link
};

inline Frames forward_kinematics(const Model& model, const VectorXd& q) {
  const auto& links = model.chain.links;
  Frames f;
  f.origin.resize(links.size());
  f.angle.resize(links.size());
  f.axis.resize(links.size());
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    if (l.parent == kGround) {
      f.origin[i] = l.base;
      f.angle[i] = q[i];
    } else {
      const auto p = static_cast<std::size_t>(l.parent);
      f.origin[i] = f.origin[p] + links[p].length * f.axis[p];
      f.angle[i] = f.angle[p] + q[i];
    }
    f.axis[i] = Vec2(std::cos(f.angle[i]), std::sin(f.angle[i]));
  }
  return f;
}

inline Vec2 to_world(const Frames& f, int link, const Vec2& local) {
  if (link == kGround) return local;
  const auto i = static_cast<std::size_t>(link);
  const Vec2& ax = f.axis[i];
  return f.origin[i] + Vec2(ax.x() * local.x() - ax.y() * local.y(),
                            ax.y() * local.x() + ax.x() * local.y());
}

// True when joint j moves link i (j is i or one of its ancestors).
inline bool moves(const Model& model, std::size_t joint, int link) {
  while (link != kGround) {
    if (static_cast<std::size_t>(link) == joint) return true;
    link = model.chain.links[static_cast<std::size_t>(link)].parent;
  }
  return false;
}

inline Vec2 end_effector(const Model& model, const VectorXd& q) {
  return to_world(forward_kinematics(model, q), model.tip.link, model.tip.point);
}

inline VectorXd muscle_lengths(const Model& model, const VectorXd& q) {
  const Frames f = forward_kinematics(model, q);
  VectorXd lengths(static_cast<Eigen::Index>(model.muscle_count()));
  for (std::size_t m = 0; m < model.muscle_count(); ++m) {
    const auto& path = model.routing.muscles[m].path;
    double total = 0.0;
    Vec2 prev = to_world(f, path[0].link, path[0].point);
    for (std::size_t k = 1; k < path.size(); ++k) {
      const Vec2 cur = to_world(f, path[k].link, path[k].point);
      total += (cur - prev).norm();
      prev = cur;
    }
    lengths[static_cast<Eigen::Index>(m)] = total;
  }
  return lengths;
}

// Moment-arm matrix, entry (i, j) = -d(length_i)/d(q_j).
inline MatrixXd moment_arms(const Model& model, const VectorXd& q) {
  const Frames f = forward_kinematics(model, q);
  const std::size_t n = model.dof();
  MatrixXd arms = MatrixXd::Zero(static_cast<Eigen::Index>(model.muscle_count()),
                                 static_cast<Eigen::Index>(n));
  for (std::size_t m = 0; m < model.muscle_count(); ++m) {
    const auto& path = model.routing.muscles[m].path;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const Vec2 a = to_world(f, path[k].link, path[k].point);
      const Vec2 b = to_world(f, path[k + 1].link, path[k + 1].point);
      const double len = (b - a).norm();
      if (len == 0.0) continue;
      const Vec2 u = (b - a) / len;
      for (std::size_t j = 0; j < n; ++j) {
        const bool mb = moves(model, j, path[k + 1].link);
        const bool ma = moves(model, j, path[k].link);
        // Rotating both ends (or neither) about joint j keeps the length.
        if (mb == ma) continue;
        // d(point)/dq_j = z x (point - origin_j)
        const Vec2& o = f.origin[j];
        const Vec2 rel = mb ? Vec2(b - o) : Vec2(a - o);
        const Vec2 dp(-rel.y(), rel.x());
        const double dlen = mb ? u.dot(dp) : -u.dot(dp);
        arms(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) -= dlen;
      }
    }
  }
  return arms;
}

// ---------------------------------------------------------------------------
// Rigid-body terms

// Mass matrix and bias vector such that M(q) qdd + bias = tau, where bias
// collects velocity-product and gravity terms.
struct RigidBodyTerms {
  MatrixXd mass;
  VectorXd bias;
};

inline RigidBodyTerms rigid_body_terms(const Model& model, const VectorXd& q,
                                       const VectorXd& qdot) {
  const auto& links = model.chain.links;
  const std::size_t n = links.size();
  const auto ni = static_cast<Eigen::Index>(n);
  const Frames f = forward_kinematics(model, q);

  std::vector<double> omega(n);
  for (std::size_t i = 0; i < n; ++i)
    omega[i] = qdot[static_cast<Eigen::Index>(i)] +
               (links[i].parent == kGround ? 0.0 : omega[static_cast<std::size_t>(links[i].parent)]);

  RigidBodyTerms out{MatrixXd::Zero(ni, ni), VectorXd::Zero(ni)};
  Eigen::Matrix<double, 2, Eigen::Dynamic> jv(2, ni);
  VectorXd jw(ni);
  for (std::size_t i = 0; i < n; ++i) {
    const Link& l = links[i];
    const Vec2 com = f.origin[i] + l.com * f.axis[i];

    // Velocity-product acceleration of the center of mass.
    Vec2 accel = -omega[i] * omega[i] * l.com * f.axis[i];
    for (int k = l.parent; k != kGround; k = links[static_cast<std::size_t>(k)].parent) {
      const auto ku = static_cast<std::size_t>(k);
      accel -= omega[ku] * omega[ku] * links[ku].length * f.axis[ku];
    }

    jv.setZero();
    jw.setZero();
    for (int k = static_cast<int>(i); k != kGround; k = links[static_cast<std::size_t>(k)].parent) {
      const Vec2 rel = com - f.origin[static_cast<std::size_t>(k)];
      jv.col(k) = Vec2(-rel.y(), rel.x());
      jw[k] = 1.0;
    }
    out.mass.noalias() += l.mass * jv.transpose() * jv;
    out.mass.noalias() += l.inertia * jw * jw.transpose();
    out.bias.noalias() += l.mass * jv.transpose() * (accel - model.chain.gravity);
  }
  return out;
}

// Kinetic + gravitational + passive-muscle elastic energy (J).
inline double mechanical_energy(const Model& model, const PlantState& s) {
  const auto& links = model.chain.links;
  const Frames f = forward_kinematics(model, s.q);
  const RigidBodyTerms rb = rigid_body_terms(model, s.q, VectorXd::Zero(s.q.size()));
  double e = 0.5 * s.qdot.dot(rb.mass * s.qdot);
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Vec2 com = f.origin[i] + links[i].com * f.axis[i];
    e -= links[i].mass * model.chain.gravity.dot(com);
  }
  for (std::size_t m = 0; m < model.muscle_count(); ++m) {
    const auto& p = model.routing.muscles[m].params;
    e += p.f_max * p.l_opt * muscle::passive_energy_normalized(s.muscles[m].l_norm);
  }
  return e;
}

// ---------------------------------------------------------------------------
// State

inline VectorXd normalized_lengths(const Model& model, const VectorXd& lengths) {
  VectorXd out(lengths.size());
  for (std::size_t m = 0; m < model.muscle_count(); ++m) {
    const auto& spec = model.routing.muscles[m];
    const auto mi = static_cast<Eigen::Index>(m);
    out[mi] = (lengths[mi] - spec.tendon_slack) / spec.params.l_opt;
    if (!(out[mi] > 0.0))
      throw IntegrationError("muscle '" + spec.name + "' fiber length collapsed to " +
                             std::to_string(out[mi]) + " optimal lengths");
  }
  return out;
}

inline PlantState initial_state(const Model& model, const VectorXd& q) {
  validate(model);
  if (q.size() != static_cast<Eigen::Index>(model.dof()))
    throw ParameterError("initial_state: q has wrong length");
  PlantState s;
  s.q = q;
  for (std::size_t i = 0; i < model.dof(); ++i) {
    const auto& l = model.chain.links[i];
    s.q[static_cast<Eigen::Index>(i)] = std::clamp(q[static_cast<Eigen::Index>(i)], l.q_min, l.q_max);
  }
  s.qdot = VectorXd::Zero(q.size());
  const VectorXd ln = normalized_lengths(model, muscle_lengths(model, s.q));
  s.muscles.resize(model.muscle_count());
  for (std::size_t m = 0; m < model.muscle_count(); ++m) {
    auto& ms = s.muscles[m];
    ms.l_norm = ln[static_cast<Eigen::Index>(m)];
    ms.force = muscle::muscle_force(ms, model.routing.muscles[m].params);
  }
  return s;
}

inline PlantState initial_state(const Model& model) {
  return initial_state(model, VectorXd::Zero(static_cast<Eigen::Index>(model.dof())));
}

inline PlantState set_joint_velocity(PlantState state, const VectorXd& qdot_target) {
  if (qdot_target.size() != state.qdot.size())
    throw ParameterError("set_joint_velocity: wrong vector length");
  if (!qdot_target.allFinite())
    throw DomainError("set_joint_velocity: non-finite target velocity");
  state.qdot = qdot_target;
  return state;
}

// One control step of length dt:
//  1. activations advance through the activation filter;
//  2. tension uses the mid-step activation, the current fiber length and the
//     fiber velocity -R(q) qdot implied by the joint velocities;
//  3. velocity-dependent forces (joint damping and the force-velocity slope
//     of active muscles) are linearized and taken implicitly, then
//     semi-implicit Euler updates qdot and q;
//  4. joints past a limit are clamped there with zero velocity;
//  5. the reported fiber velocity is the finite difference of normalized
//     fiber length over dt.
inline PlantState step(const Model& model, const PlantState& state,
                       const VectorXd& ctrl, double dt = 0.01) {
  const std::size_t nm = model.muscle_count();
  if (ctrl.size() != static_cast<Eigen::Index>(nm))
    throw ParameterError("step: ctrl has wrong length");
  if (!(dt > 0.0 && dt <= 0.01 + 1e-12))
    throw DomainError("step: dt must lie in (0, 0.01]");

  PlantState next = state;
  const auto n = static_cast<Eigen::Index>(model.dof());
  const auto nmi = static_cast<Eigen::Index>(nm);

  const MatrixXd arms = moment_arms(model, state.q);
  const VectorXd fiber_rate = -arms * state.qdot;
  VectorXd force(nmi);
  VectorXd gain(nmi);  // d(force)/d(fiber lengthening rate), N s/m
  for (std::size_t m = 0; m < nm; ++m) {
    const auto mi = static_cast<Eigen::Index>(m);
    const auto& params = model.routing.muscles[m].params;
    if (!(ctrl[mi] >= 0.0 && ctrl[mi] <= 1.0))
      throw DomainError("step: ctrl[" + std::to_string(m) + "] outside [0,1]");
    next.muscles[m] = muscle::activation_step(ctrl[mi], state.muscles[m], dt, params);

    muscle::MuscleState mid = state.muscles[m];
    mid.act = 0.5 * (state.muscles[m].act + next.muscles[m].act);
    mid.v_norm = fiber_rate[mi] / (params.l_opt * params.v_max);
    force[mi] = muscle::muscle_force(mid, params);
    gain[mi] = params.f_max * mid.act * muscle::force_length_active(mid.l_norm) *
               muscle::force_velocity_slope(mid.v_norm) / (params.l_opt * params.v_max);
  }

  const RigidBodyTerms rb = rigid_body_terms(model, state.q, state.qdot);
  VectorXd tau = -rb.bias;
  // Joint-space stiffness of the velocity-dependent forces: tau changes by
  // -muscle_damping * delta(qdot), plus viscous joint damping.
  MatrixXd muscle_damping = MatrixXd::Zero(n, n);
  if (nm > 0) {
    tau.noalias() += arms.transpose() * force;
    muscle_damping.noalias() = arms.transpose() * gain.asDiagonal() * arms;
  }
  MatrixXd lhs = rb.mass + dt * muscle_damping;
  const VectorXd rhs = lhs * state.qdot + dt * tau;
  for (Eigen::Index j = 0; j < n; ++j)
    lhs(j, j) += dt * model.chain.links[static_cast<std::size_t>(j)].damping;

  next.qdot = lhs.ldlt().solve(rhs);
  next.q = state.q + dt * next.qdot;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& l = model.chain.links[static_cast<std::size_t>(j)];
    if (next.q[j] <= l.q_min) {
      next.q[j] = l.q_min;
      next.qdot[j] = 0.0;
    } else if (next.q[j] >= l.q_max) {
      next.q[j] = l.q_max;
      next.qdot[j] = 0.0;
    }
  }
  next.t = state.t + dt;

  if (!next.q.allFinite() || !next.qdot.allFinite()) {
    std::ostringstream msg;
    msg << "step: non-finite state at t=" << next.t << " (q=" << next.q.transpose()
        << ", qdot=" << next.qdot.transpose() << ")";
    throw IntegrationError(msg.str());
  }

  const VectorXd ln = normalized_lengths(model, muscle_lengths(model, next.q));
  for (std::size_t m = 0; m < nm; ++m) {
    auto& ms = next.muscles[m];
    const double l_new = ln[static_cast<Eigen::Index>(m)];
    ms.v_norm = (l_new - state.muscles[m].l_norm) /
                (dt * model.routing.muscles[m].params.v_max);
    ms.l_norm = l_new;
    ms.force = muscle::muscle_force(ms, model.routing.muscles[m].params);
  }
  return next;
}

// ---------------------------------------------------------------------------
// Model construction helpers and the built-in catalog

// Reflection across the world x-axis. Negating q on the reflected model
// reproduces the original motion reflected.
inline Model mirrored(const Model& model, const std::string& suffix = "") {
  Model out = model;
  out.chain.gravity.y() = -out.chain.gravity.y();
  for (auto& l : out.chain.links) {
    l.base.y() = -l.base.y();
    const double lo = l.q_min;
    l.q_min = -l.q_max;
    l.q_max = -lo;
    if (!suffix.empty()) l.name += suffix;
  }
  for (auto& m : out.routing.muscles) {
    for (auto& vp : m.path) vp.point.y() = -vp.point.y();
    if (!suffix.empty()) m.name += suffix;
  }
  out.tip.point.y() = -out.tip.point.y();
  return out;
}

// Places `extra` alongside `model` as an independent subsystem.
inline Model combined(const Model& model, const Model& extra, const std::string& name) {
  Model out = model;
  out.name = name;
  const int offset = static_cast<int>(model.dof());
  for (Link l : extra.chain.links) {
    if (l.parent != kGround) l.parent += offset;
    out.chain.links.push_back(l);
  }
  for (MuscleSpec m : extra.routing.muscles) {
    for (auto& vp : m.path)
      if (vp.link != kGround) vp.link += offset;
    out.routing.muscles.push_back(m);
  }
  return out;
}

// Dense joint-space sweep of each muscle's path length: (min, max).
inline std::vector<std::pair<double, double>> length_ranges(const Model& model,
                                                            int points_per_joint = 41) {
  const auto n = static_cast<Eigen::Index>(model.dof());
  std::vector<std::pair<double, double>> ranges(model.muscle_count(),
                                                {INFINITY, -INFINITY});
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  VectorXd q(n);
  while (true) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& l = model.chain.links[static_cast<std::size_t>(j)];
      q[j] = l.q_min + (l.q_max - l.q_min) * idx[static_cast<std::size_t>(j)] /
                           (points_per_joint - 1);
    }
    const VectorXd len = muscle_lengths(model, q);
    for (std::size_t m = 0; m < ranges.size(); ++m) {
      ranges[m].first = std::min(ranges[m].first, len[static_cast<Eigen::Index>(m)]);
      ranges[m].second = std::max(ranges[m].second, len[static_cast<Eigen::Index>(m)]);
    }
    std::size_t j = 0;
    while (j < idx.size() && ++idx[j] == points_per_joint) idx[j++] = 0;
    if (j == idx.size()) break;
  }
  return ranges;
}

// Sets l_opt and tendon slack so each fiber spans [0.5, 1.05] optimal
// lengths over the admissible joint range.
inline void fit_fiber_lengths(Model& model) {
  const auto ranges = length_ranges(model);
  for (std::size_t m = 0; m < model.muscle_count(); ++m) {
    auto& spec = model.routing.muscles[m];
    const auto [lo, hi] = ranges[m];
    spec.params.l_opt = (hi - lo) / 0.55;
    spec.tendon_slack = hi - 1.05 * spec.params.l_opt;
  }
}

// Two-link planar arm moving in the horizontal plane with six muscles:
// mono-articular flexor/extensor at the shoulder and elbow plus a
// bi-articular flexor/extensor pair acting mostly at the shoulder.
inline Model arm2x6() {
  Model m;
  m.name = "arm2x6";
  Link upper;
  upper.name = "upper_arm";
  upper.mass = 1.0;
  upper.length = 0.25;
  upper.com = 0.125;
  upper.inertia = 1.0 * 0.25 * 0.25 / 12.0;
  upper.damping = 0.2;
  upper.q_min = -1.2;
  upper.q_max = 1.2;
  Link fore = upper;
  fore.name = "forearm";
  fore.parent = 0;
  fore.mass = 0.8;
  fore.inertia = 0.8 * 0.25 * 0.25 / 12.0;
  m.chain.links = {upper, fore};

  auto make = [](std::string name, std::vector<ViaPoint> path, double f_max) {
    MuscleSpec s;
    s.name = std::move(name);
    s.path = std::move(path);
    s.params.f_max = f_max;
    return s;
  };
  // Paths run over pulley points (a ground point beside the shoulder, a
  // point on the upper arm at the elbow) so moment arms keep their sign over
  // the joint range.
  m.routing.muscles = {
      make("shoulder_flexor", {{kGround, {-0.1, 0.05}}, {kGround, {-0.009, 0.05}}, {0, {0.08, 0.01}}}, 150.0),
      make("shoulder_extensor", {{kGround, {-0.1, -0.05}}, {kGround, {-0.009, -0.05}}, {0, {0.08, -0.01}}}, 150.0),
      make("elbow_flexor", {{0, {0.15, 0.02}}, {0, {0.25, 0.025}}, {1, {0.06, 0.012}}}, 100.0),
      make("elbow_extensor", {{0, {0.15, -0.02}}, {0, {0.25, -0.025}}, {1, {0.06, -0.012}}},
           100.0),
      make("biarticular_flexor",
           {{kGround, {-0.009, 0.065}}, {0, {0.12, 0.02}}, {0, {0.25, 0.02}}, {1, {0.05, 0.008}}},
           120.0),
      make("biarticular_extensor",
           {{kGround, {-0.009, -0.065}}, {0, {0.12, -0.02}}, {0, {0.25, -0.02}}, {1, {0.05, -0.008}}},
           120.0),
  };
  m.tip = {1, Vec2(0.25, 0.0)};
  fit_fiber_lengths(m);
  return m;
}

// Two independent arm2x6 copies, the second reflected, 12 muscles total.
inline Model arm2x6_mirrored() {
  Model left = arm2x6();
  for (auto& l : left.chain.links) {
    l.base = Vec2(0.0, 0.3);
    l.name += "_a";
  }
  for (auto& mu : left.routing.muscles) mu.name += "_a";
  // Ground via-points are expressed in world coordinates; shift them with
  // the base so the geometry is unchanged.
  for (auto& mu : left.routing.muscles)
    for (auto& vp : mu.path)
      if (vp.link == kGround) vp.point.y() += 0.3;
  Model right = mirrored(arm2x6(), "_b");
  for (auto& l : right.chain.links) l.base = Vec2(0.0, -0.3);
  for (auto& mu : right.routing.muscles)
    for (auto& vp : mu.path)
      if (vp.link == kGround) vp.point.y() -= 0.3;
  return combined(left, right, "arm2x6-mirrored");
}

// Single pendulum without muscles, hanging under gravity.
inline Model pendulum() {
  Model m;
  m.name = "pendulum";
  Link l;
  l.name = "rod";
  l.mass = 1.0;
  l.length = 0.5;
  l.com = 0.25;
  l.inertia = 1.0 * 0.5 * 0.5 / 12.0;
  l.q_min = -10.0;
  l.q_max = 10.0;
  m.chain.links = {l};
  m.chain.gravity = Vec2(0.0, -9.81);
  m.tip = {0, Vec2(0.5, 0.0)};
  return m;
}

inline std::vector<std::string> builtin_model_names() {
  return {"arm2x6", "arm2x6-mirrored", "pendulum"};
}

inline Model builtin_model(const std::string& name) {
  if (name == "arm2x6") return arm2x6();
  if (name == "arm2x6-mirrored") return arm2x6_mirrored();
  if (name == "pendulum") return pendulum();
  throw LookupError("unknown built-in model '" + name + "'");
}

inline std::map<std::string, Model> builtin_models() {
  std::map<std::string, Model> out;
  for (const auto& n : builtin_model_names()) out.emplace(n, builtin_model(n));
  return out;
}

}  // namespace dynsyn::plant
