#pragma once

// Dynamical synergy extraction: perturb joint velocities with zero muscle
// input, record muscle lengths, correlate length changes segment by segment
// and cluster the muscles with K-Medoids on 1 - R.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "dynsyn/errors.hpp"
#include "dynsyn/plant.hpp"
#include "dynsyn/random.hpp"

namespace dynsyn::synergy {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PerturbationConfig {
  std::size_t total_steps = 500000;
  std::size_t control_frequency = 10;  // steps between velocity resamples
  double control_amplitude = 5.0;      // rad/s
  std::uint64_t seed = 0;
  double dt = 0.01;

  void validate() const {
    if (total_steps == 0) throw ParameterError("perturbation: total_steps must be > 0");
    if (control_frequency == 0) throw ParameterError("perturbation: control_frequency must be >= 1");
    if (!(control_amplitude >= 0.0))
      throw ParameterError("perturbation: control_amplitude must be >= 0");
  }
};

struct TrajectoryBuffer {
  MatrixXd lengths;  // total_steps x muscle count, metres
  double dt = 0.01;
  std::string model;

  Eigen::Index steps() const { return lengths.rows(); }
  Eigen::Index muscles() const { return lengths.cols(); }

  // First `rows` samples.
  TrajectoryBuffer truncated(Eigen::Index rows) const {
    if (rows <= 0 || rows > steps()) throw ParameterError("truncated: row count out of range");
    return {lengths.topRows(rows), dt, model};
  }
};

enum class Signal { kLengthChanges, kRawLengths };

struct CorrelationMatrix {
  MatrixXd r;
  std::size_t segment_count = 0;
  std::vector<bool> degenerate;  // muscle whose signal is identically zero

  bool any_degenerate() const {
    return std::any_of(degenerate.begin(), degenerate.end(), [](bool b) { return b; });
  }
};

struct GroupingResult {
  std::vector<std::vector<int>> groups;  // ascending members, ordered by first member
  std::vector<int> medoids;              // medoids[g] belongs to groups[g]
  double cost = 0.0;                     // total distance to assigned medoids
  std::uint64_t seed = 0;

  std::size_t n_groups() const { return groups.size(); }
  std::size_t n_items() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
  }
  // Group id per item.
  std::vector<int> labels() const {
    std::vector<int> out(n_items(), -1);
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (int i : groups[g]) out[static_cast<std::size_t>(i)] = static_cast<int>(g);
    return out;
  }
};

struct GroupingProbabilityMatrix {
  MatrixXd p;
  std::size_t n_seeds = 0;
};

// ---------------------------------------------------------------------------
// Trajectory generation

// Every control_frequency steps the joint velocities are overwritten with a
// fresh draw from U[-A_c, A_c]^N; every step advances the plant with zero
// excitation and records the muscle path lengths.
inline TrajectoryBuffer generate_trajectory(const plant::Model& model,
                                            const PerturbationConfig& config) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(model.dof());
  const auto nm = static_cast<Eigen::Index>(model.muscle_count());
  const VectorXd zero_ctrl = VectorXd::Zero(nm);

  Rng rng(config.seed);
  plant::PlantState state = plant::initial_state(model);
  TrajectoryBuffer buffer{MatrixXd(static_cast<Eigen::Index>(config.total_steps), nm),
                          config.dt, model.name};
  VectorXd qdot(n);
  for (std::size_t t = 0; t < config.total_steps; ++t) {
    if (t % config.control_frequency == 0) {
      for (Eigen::Index j = 0; j < n; ++j)
        qdot[j] = uniform(rng, -config.control_amplitude, config.control_amplitude);
      state = plant::set_joint_velocity(std::move(state), qdot);
    }
    try {
      state = plant::step(model, state, zero_ctrl, config.dt);
    } catch (const IntegrationError& e) {
      throw IntegrationError("trajectory step " + std::to_string(t) + ": " + e.what());
    }
    buffer.lengths.row(static_cast<Eigen::Index>(t)) =
        plant::muscle_lengths(model, state.q).transpose();
  }
  return buffer;
}

// ---------------------------------------------------------------------------
// Correlation

// Mean over `segments` contiguous, equal-length windows of the cosine
// similarity between muscle signals. Rows beyond segments * window are
// dropped. A zero-norm window contributes 0 to the affected pairs.
inline CorrelationMatrix correlation_matrix(const TrajectoryBuffer& buffer, std::size_t segments,
                                            Signal signal = Signal::kLengthChanges) {
  if (segments == 0) throw ParameterError("correlation_matrix: segment count must be >= 1");
  const Eigen::Index nm = buffer.muscles();
  MatrixXd x;
  if (signal == Signal::kLengthChanges) {
    if (buffer.steps() < 2) throw ParameterError("correlation_matrix: need at least two samples");
    x = buffer.lengths.bottomRows(buffer.steps() - 1) - buffer.lengths.topRows(buffer.steps() - 1);
  } else {
    x = buffer.lengths;
  }
  const Eigen::Index window = x.rows() / static_cast<Eigen::Index>(segments);
  if (window == 0)
    throw ParameterError("correlation_matrix: " + std::to_string(segments) +
                         " segments exceed the " + std::to_string(x.rows()) + " available samples");

  CorrelationMatrix out;
  out.segment_count = segments;
  out.r = MatrixXd::Zero(nm, nm);
  out.degenerate.assign(static_cast<std::size_t>(nm), true);
  for (std::size_t k = 0; k < segments; ++k) {
    const auto seg = x.middleRows(static_cast<Eigen::Index>(k) * window, window);
    const MatrixXd gram = seg.transpose() * seg;
    for (Eigen::Index i = 0; i < nm; ++i) {
      if (gram(i, i) > 0.0) out.degenerate[static_cast<std::size_t>(i)] = false;
      for (Eigen::Index j = i + 1; j < nm; ++j) {
        const double denom = std::sqrt(gram(i, i)) * std::sqrt(gram(j, j));
        if (denom > 0.0) out.r(i, j) += std::clamp(gram(i, j) / denom, -1.0, 1.0);
      }
    }
  }
  out.r /= static_cast<double>(segments);
  for (Eigen::Index i = 0; i < nm; ++i) {
    out.r(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < nm; ++j) out.r(j, i) = out.r(i, j);
  }
  return out;
}

// clamp(1 - R, 0, 2)
inline MatrixXd correlation_distance(const CorrelationMatrix& c) {
  return (1.0 - c.r.array()).cwiseMax(0.0).cwiseMin(2.0).matrix();
}

// ---------------------------------------------------------------------------
// K-Medoids

struct KMedoidsOptions {
  // Random initial medoid sets tried after the greedy BUILD start.
  int restarts = 10;
  int max_swap_iterations = 1000;
};

namespace detail {

inline void check_distance(const MatrixXd& d) {
  if (d.rows() != d.cols() || d.rows() == 0)
    throw ParameterError("kmedoids: distance matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (d(i, i) != 0.0) throw ParameterError("kmedoids: distance diagonal must be zero");
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      if (!(d(i, j) >= 0.0)) throw ParameterError("kmedoids: distances must be non-negative");
      if (std::abs(d(i, j) - d(j, i)) > 1e-12) throw ParameterError("kmedoids: distance matrix must be symmetric");
    }
  }
}

inline double total_cost(const MatrixXd& d, const std::vector<int>& medoids) {
  double cost = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int m : medoids) best = std::min(best, d(i, m));
    cost += best;
  }
  return cost;
}

inline std::vector<int> build(const MatrixXd& d, std::size_t k) {
  const Eigen::Index n = d.rows();
  std::vector<int> medoids;
  VectorXd nearest = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  while (medoids.size() < k) {
    int best = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < n; ++c) {
      if (chosen[static_cast<std::size_t>(c)]) continue;
      const double cost = nearest.cwiseMin(d.col(c)).sum();
      if (cost < best_cost) {
        best_cost = cost;
        best = static_cast<int>(c);
      }
    }
    chosen[static_cast<std::size_t>(best)] = true;
    medoids.push_back(best);
    nearest = nearest.cwiseMin(d.col(best));
  }
  return medoids;
}

// Steepest-descent SWAP: applies the best improving (medoid, non-medoid)
// exchange until none improves. Equal-best exchanges are broken with rng.
inline std::vector<int> swap(const MatrixXd& d, std::vector<int> medoids, Rng& rng, int max_iter) {
  const Eigen::Index n = d.rows();
  double cost = total_cost(d, medoids);
  const double eps = 1e-12 * std::max(1.0, cost);
  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<bool> is_medoid(static_cast<std::size_t>(n), false);
    for (int m : medoids) is_medoid[static_cast<std::size_t>(m)] = true;
    double best_cost = cost - eps;
    std::vector<std::pair<std::size_t, int>> best_moves;
    for (std::size_t mi = 0; mi < medoids.size(); ++mi) {
      for (Eigen::Index o = 0; o < n; ++o) {
        if (is_medoid[static_cast<std::size_t>(o)]) continue;
        std::vector<int> trial = medoids;
        trial[mi] = static_cast<int>(o);
        const double c = total_cost(d, trial);
        if (c < best_cost - eps) {
          best_cost = c;
          best_moves = {{mi, static_cast<int>(o)}};
        } else if (c <= best_cost + eps && !best_moves.empty()) {
          best_moves.emplace_back(mi, static_cast<int>(o));
        }
      }
    }
    if (best_moves.empty()) break;
    const auto pick = best_moves.size() == 1 ? 0 : uniform_index(rng, best_moves.size());
    medoids[best_moves[pick].first] = best_moves[pick].second;
    cost = total_cost(d, medoids);
  }
  return medoids;
}

inline GroupingResult assemble(const MatrixXd& d, const std::vector<int>& medoids, std::uint64_t seed) {
  const Eigen::Index n = d.rows();
  std::vector<std::vector<int>> members(medoids.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t g = 0; g < medoids.size(); ++g) {
      if (medoids[g] == i) {
        best = g;
        break;
      }
      if (d(i, medoids[g]) < d(i, medoids[best])) best = g;
    }
    members[best].push_back(static_cast<int>(i));
  }
  std::vector<std::size_t> order(medoids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return members[a].front() < members[b].front(); });
  GroupingResult r;
  r.seed = seed;
  for (std::size_t g : order) {
    r.groups.push_back(members[g]);
    r.medoids.push_back(medoids[g]);
  }
  r.cost = total_cost(d, medoids);
  return r;
}

}  // namespace detail

// PAM: greedy BUILD plus SWAP to a local optimum of total distance to the
// nearest medoid, repeated from seeded random starts; the cheapest result
// wins. Deterministic for a fixed seed.
inline GroupingResult kmedoids(const MatrixXd& distance, std::size_t n_groups, std::uint64_t seed,
                               const KMedoidsOptions& options = {}) {
  detail::check_distance(distance);
  const auto n = static_cast<std::size_t>(distance.rows());
  if (n_groups < 1 || n_groups > n)
    throw ParameterError("kmedoids: n_groups must lie in [1, " + std::to_string(n) + "], got " +
                         std::to_string(n_groups));
  Rng rng(seed);
  std::vector<int> best = detail::swap(distance, detail::build(distance, n_groups), rng,
                                       options.max_swap_iterations);
  double best_cost = detail::total_cost(distance, best);
  for (int r = 0; r < options.restarts; ++r) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
    perm.resize(n_groups);
    auto cand = detail::swap(distance, perm, rng, options.max_swap_iterations);
    const double c = detail::total_cost(distance, cand);
    if (c < best_cost - 1e-12 * std::max(1.0, best_cost)) {
      best_cost = c;
      best = std::move(cand);
    }
  }
  return detail::assemble(distance, best, seed);
}

// ---------------------------------------------------------------------------
// Group-count selection

enum class SelectionRule {
  // Largest candidate before the sharpest relative collapse of the minimum
  // distance between medoids (the point where the max-min spread of medoid
  // distances opens up because a coherent group was split).
  kSeparationCollapse,
  // Largest candidate whose spread d_max - d_min reaches `gap_fraction` of
  // the largest spread over all candidates.
  kGapFraction,
};

struct SelectionOptions {
  SelectionRule rule = SelectionRule::kSeparationCollapse;
  double gap_fraction = 0.8;
  // kSeparationCollapse only counts drops to below this fraction of the
  // previous candidate's minimum separation.
  double collapse_ratio = 0.5;
  KMedoidsOptions kmedoids;
};

struct SelectionRow {
  std::size_t n_groups = 0;
  double d_max = 0.0;
  double d_min = 0.0;
  double cost = 0.0;
  double gap() const { return d_max - d_min; }
};

struct GroupCountSelection {
  std::size_t n_groups = 0;
  bool degenerate = false;  // every medoid spread is zero
  std::vector<SelectionRow> table;
  GroupingResult grouping;  // kmedoids result at the chosen count
};

inline GroupCountSelection select_group_count(const MatrixXd& distance,
                                              std::vector<std::size_t> candidates,
                                              std::uint64_t seed,
                                              const SelectionOptions& options = {}) {
  if (candidates.empty()) throw ParameterError("select_group_count: no candidates");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (std::size_t c : candidates)
    if (c < 2 || c > static_cast<std::size_t>(distance.rows()))
      throw ParameterError("select_group_count: candidate " + std::to_string(c) +
                           " outside [2, " + std::to_string(distance.rows()) + "]");

  GroupCountSelection out;
  std::vector<GroupingResult> results;
  for (std::size_t c : candidates) {
    GroupingResult g = kmedoids(distance, c, seed, options.kmedoids);
    SelectionRow row{c, 0.0, std::numeric_limits<double>::infinity(), g.cost};
    for (std::size_t a = 0; a < g.medoids.size(); ++a)
      for (std::size_t b = a + 1; b < g.medoids.size(); ++b) {
        const double v = distance(g.medoids[a], g.medoids[b]);
        row.d_max = std::max(row.d_max, v);
        row.d_min = std::min(row.d_min, v);
      }
    out.table.push_back(row);
    results.push_back(std::move(g));
  }

  double max_gap = 0.0;
  for (const auto& row : out.table) max_gap = std::max(max_gap, row.gap());
  const bool all_coincident = std::all_of(out.table.begin(), out.table.end(),
                                          [](const SelectionRow& r) { return r.d_max <= 1e-12; });
  std::size_t chosen = 0;
  if (max_gap <= 1e-12 && all_coincident) {
    out.degenerate = true;
  } else if (options.rule == SelectionRule::kGapFraction) {
    for (std::size_t i = 0; i < out.table.size(); ++i)
      if (out.table[i].gap() >= options.gap_fraction * max_gap) chosen = i;
    out.degenerate = max_gap <= 1e-12;
  } else {
    chosen = out.table.size() - 1;
    double sharpest = options.collapse_ratio;
    for (std::size_t i = 0; i + 1 < out.table.size(); ++i) {
      const double before = out.table[i].d_min;
      if (!(before > 1e-12)) continue;
      const double ratio = out.table[i + 1].d_min / before;
      if (ratio < sharpest) {
        sharpest = ratio;
        chosen = i;
      }
    }
  }
  out.n_groups = out.table[chosen].n_groups;
  out.grouping = std::move(results[chosen]);
  return out;
}

// Default candidate list for a model with n muscles: 2 .. n - 1.
inline std::vector<std::size_t> default_candidates(std::size_t n_muscles) {
  std::vector<std::size_t> out;
  for (std::size_t k = 2; k + 1 <= n_muscles; ++k) out.push_back(k);
  if (out.empty() && n_muscles >= 2) out.push_back(n_muscles);
  return out;
}

// ---------------------------------------------------------------------------
// Multi-seed statistics

inline GroupingProbabilityMatrix grouping_probability(const std::vector<GroupingResult>& results) {
  if (results.empty()) throw ParameterError("grouping_probability: no results");
  const std::size_t n = results.front().n_items();
  GroupingProbabilityMatrix out{MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
                                results.size()};
  for (const auto& r : results) {
    if (r.n_items() != n) throw ParameterError("grouping_probability: results differ in muscle count");
    for (const auto& g : r.groups)
      for (int i : g)
        for (int j : g) out.p(i, j) += 1.0;
  }
  out.p /= static_cast<double>(results.size());
  return out;
}

inline double grouping_distance(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ParameterError("grouping_distance: shape mismatch");
  return (a - b).norm();
}

// Runs fn(i) for i in [0, count) on up to `jobs` threads; results keep
// their index order.
template <typename T>
std::vector<T> parallel_map(std::size_t count, std::size_t jobs, const std::function<T(std::size_t)>& fn) {
  std::vector<T> out(count);
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::future<void>> workers;
  std::atomic<std::size_t> next{0};
  for (std::size_t w = 0; w < jobs; ++w)
    workers.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < count; i = next++) out[i] = fn(i);
    }));
  for (auto& w : workers) w.get();
  return out;
}

struct ExtractionOptions {
  std::size_t segments = 100;
  Signal signal = Signal::kLengthChanges;
  std::vector<std::size_t> candidates;  // empty: default_candidates
  SelectionOptions selection;
  std::size_t jobs = 1;
  // Called with (seed index, trajectory) as each trajectory is generated;
  // may run concurrently when jobs > 1.
  std::function<void(std::size_t, const TrajectoryBuffer&)> on_trajectory;
};

struct SeedRun {
  std::uint64_t seed = 0;
  CorrelationMatrix correlation;
  GroupingResult grouping;
};

struct Extraction {
  GroupCountSelection selection;  // made on the first seed
  std::vector<SeedRun> runs;
  GroupingProbabilityMatrix probability;
};

// Full pipeline over several seeds. The group count is selected on the
// first seed's correlation matrix and reused for every seed.
inline Extraction extract(const plant::Model& model, const PerturbationConfig& base,
                          const std::vector<std::uint64_t>& seeds, const ExtractionOptions& options = {}) {
  if (seeds.empty()) throw ParameterError("extract: empty seed list");
  auto correlations = parallel_map<CorrelationMatrix>(seeds.size(), options.jobs, [&](std::size_t i) {
    PerturbationConfig cfg = base;
    cfg.seed = seeds[i];
    const TrajectoryBuffer traj = generate_trajectory(model, cfg);
    if (options.on_trajectory) options.on_trajectory(i, traj);
    return correlation_matrix(traj, options.segments, options.signal);
  });
  Extraction out;
  const auto candidates = options.candidates.empty() ? default_candidates(model.muscle_count())
                                                     : options.candidates;
  out.selection = select_group_count(correlation_distance(correlations[0]), candidates, seeds[0],
                                     options.selection);
  std::vector<GroupingResult> groupings;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    SeedRun run{seeds[i], std::move(correlations[i]), {}};
    run.grouping = i == 0 ? out.selection.grouping
                          : kmedoids(correlation_distance(run.correlation), out.selection.n_groups,
                                     seeds[i], options.selection.kmedoids);
    groupings.push_back(run.grouping);
    out.runs.push_back(std::move(run));
  }
  out.probability = grouping_probability(groupings);
  return out;
}

struct ConvergenceRow {
  std::size_t sample_size = 0;
  double distance = 0.0;
};

struct ConvergenceStudy {
  std::size_t n_groups = 0;
  std::vector<ConvergenceRow> rows;
  std::vector<GroupingProbabilityMatrix> probabilities;  // one per sample size
};

// For each seed one trajectory of the largest size is generated; every
// sample size regroups its prefix. Distances are Frobenius norms to the
// grouping-probability matrix of the largest size. n_groups = 0 selects
// the count on the first seed's full-length data.
inline ConvergenceStudy convergence_study(const plant::Model& model, const PerturbationConfig& base,
                                          const std::vector<std::size_t>& sample_sizes,
                                          std::size_t n_seeds = 10, std::size_t n_groups = 0,
                                          const ExtractionOptions& options = {}) {
  if (sample_sizes.empty()) throw ParameterError("convergence_study: empty sample_sizes");
  if (!std::is_sorted(sample_sizes.begin(), sample_sizes.end()))
    throw ParameterError("convergence_study: sample_sizes must be ascending");
  if (sample_sizes.front() < 2) throw ParameterError("convergence_study: sample sizes must be >= 2");
  if (n_seeds == 0) throw ParameterError("convergence_study: n_seeds must be >= 1");
  const std::size_t full = sample_sizes.back();

  auto correlations = parallel_map<std::vector<CorrelationMatrix>>(n_seeds, options.jobs, [&](std::size_t s) {
    PerturbationConfig cfg = base;
    cfg.total_steps = full;
    cfg.seed = base.seed + s;
    const TrajectoryBuffer traj = generate_trajectory(model, cfg);
    std::vector<CorrelationMatrix> per_size;
    for (std::size_t size : sample_sizes) {
      const std::size_t segments = std::min(options.segments, size - 1);
      per_size.push_back(correlation_matrix(traj.truncated(static_cast<Eigen::Index>(size)), segments,
                                            options.signal));
    }
    return per_size;
  });

  ConvergenceStudy out;
  out.n_groups = n_groups;
  if (out.n_groups == 0) {
    const auto candidates = options.candidates.empty() ? default_candidates(model.muscle_count())
                                                       : options.candidates;
    out.n_groups = select_group_count(correlation_distance(correlations[0].back()), candidates, base.seed,
                                      options.selection)
                       .n_groups;
  }
  for (std::size_t k = 0; k < sample_sizes.size(); ++k) {
    std::vector<GroupingResult> groupings;
    for (std::size_t s = 0; s < n_seeds; ++s)
      groupings.push_back(kmedoids(correlation_distance(correlations[s][k]), out.n_groups, base.seed + s,
                                   options.selection.kmedoids));
    out.probabilities.push_back(grouping_probability(groupings));
  }
  for (std::size_t k = 0; k < sample_sizes.size(); ++k)
    out.rows.push_back({sample_sizes[k], grouping_distance(out.probabilities[k].p, out.probabilities.back().p)});
  return out;
}

}  // namespace dynsyn::synergy
