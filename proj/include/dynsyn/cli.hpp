#pragma once

// Batch front end: run configuration, the extract / train / convergence /
// eval / inspect commands and the provenance written next to every output.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dynsyn/checksum.hpp"
#include "dynsyn/errors.hpp"
#include "dynsyn/model_io.hpp"
#include "dynsyn/plant.hpp"
#include "dynsyn/sac.hpp"
#include "dynsyn/synergy.hpp"
#include "dynsyn/synergy_io.hpp"
#include "dynsyn/tasks.hpp"

namespace dynsyn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "dynsyn 0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 2, kRuntime = 3 };

struct RunConfig {
  std::string model = "arm2x6";  // built-in name or model file
  std::vector<std::uint64_t> seeds{0};
  std::string out;  // empty: <output root>/<command>
  std::size_t jobs = 1;

  synergy::PerturbationConfig perturbation;
  synergy::ExtractionOptions extraction;
  bool save_trajectories = true;

  std::vector<std::size_t> convergence_sizes{500, 10000, 50000};
  std::size_t convergence_seeds = 10;
  std::size_t convergence_groups = 0;  // 0: select

  std::string task = "reach";
  tasks::TaskConfig task_config;

  sac::SacConfig sac;
  sac::ActorKind actor = sac::ActorKind::kFlat;
  std::string grouping;  // required by the dynsyn actor
  std::optional<double> stop_at_return;
  bool resume = false;

  std::string checkpoint;  // eval input
  std::size_t eval_episodes = 20;
  bool traces = true;
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ParameterError("config: '" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ParameterError("config: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline std::string signal_name(synergy::Signal s) {
  return s == synergy::Signal::kLengthChanges ? "length_changes" : "raw_lengths";
}
inline synergy::Signal signal_from(const std::string& s) {
  if (s == "length_changes") return synergy::Signal::kLengthChanges;
  if (s == "raw_lengths") return synergy::Signal::kRawLengths;
  throw ParameterError("config: unknown synergy.signal '" + s + "'");
}
inline std::string rule_name(synergy::SelectionRule r) {
  return r == synergy::SelectionRule::kSeparationCollapse ? "separation_collapse" : "gap_fraction";
}
inline synergy::SelectionRule rule_from(const std::string& s) {
  if (s == "separation_collapse") return synergy::SelectionRule::kSeparationCollapse;
  if (s == "gap_fraction") return synergy::SelectionRule::kGapFraction;
  throw ParameterError("config: unknown synergy.rule '" + s + "'");
}

inline json optional_vec2(const std::optional<plant::Vec2>& v) {
  return v ? json::array({v->x(), v->y()}) : json(nullptr);
}
inline std::optional<plant::Vec2> optional_vec2(const json& j, const std::string& where) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array() || j.size() != 2) throw ParameterError("config: " + where + " must be [x, y] or null");
  return plant::Vec2{j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
  const auto& p = c.perturbation;
  const auto& e = c.extraction;
  const auto& t = c.task_config;
  const auto& s = c.sac;
  json j;
  j["model"] = c.model;
  j["seeds"] = c.seeds;
  j["out"] = c.out;
  j["jobs"] = c.jobs;
  j["perturbation"] = {{"total_steps", p.total_steps},
                       {"control_frequency", p.control_frequency},
                       {"control_amplitude", p.control_amplitude},
                       {"dt", p.dt}};
  j["synergy"] = {{"segments", e.segments},
                  {"signal", detail::signal_name(e.signal)},
                  {"candidates", e.candidates},
                  {"rule", detail::rule_name(e.selection.rule)},
                  {"gap_fraction", e.selection.gap_fraction},
                  {"collapse_ratio", e.selection.collapse_ratio},
                  {"restarts", e.selection.kmedoids.restarts},
                  {"max_swap_iterations", e.selection.kmedoids.max_swap_iterations},
                  {"save_trajectories", c.save_trajectories}};
  j["convergence"] = {{"sample_sizes", c.convergence_sizes},
                      {"n_seeds", c.convergence_seeds},
                      {"n_groups", c.convergence_groups}};
  j["task"] = {{"name", c.task},
               {"episode_length", t.episode_length},
               {"dt", t.dt},
               {"w_p", t.w_p},
               {"w_a", t.w_a},
               {"alive_bonus", t.alive_bonus},
               {"target_min", detail::optional_vec2(t.target_min)},
               {"target_max", detail::optional_vec2(t.target_max)},
               {"initial_q", t.initial_q},
               {"initial_q_noise", t.initial_q_noise},
               {"osc_joint", t.osc_joint},
               {"osc_amplitude", t.osc_amplitude},
               {"osc_period", t.osc_period}};
  j["sac"] = {{"batch_size", s.batch_size},
              {"buffer_size", s.buffer_size},
              {"warmup_steps", s.warmup_steps},
              {"gamma", s.gamma},
              {"tau", s.tau},
              {"train_frequency", s.train_frequency},
              {"gradient_steps", s.gradient_steps},
              {"target_update_interval", s.target_update_interval},
              {"n_envs", s.n_envs},
              {"learning_rate", s.learning_rate},
              {"linear_lr_decay", s.linear_lr_decay},
              {"initial_alpha", s.initial_alpha},
              {"target_entropy", s.target_entropy ? json(*s.target_entropy) : json(nullptr)},
              {"hidden", s.hidden},
              {"total_steps", s.total_steps},
              {"eval_interval", s.eval_interval},
              {"eval_episodes", s.eval_episodes},
              {"checkpoint_interval", s.checkpoint_interval},
              {"stop_at_return", c.stop_at_return ? json(*c.stop_at_return) : json(nullptr)},
              {"resume", c.resume}};
  j["clip"] = {{"k_d", s.clip.k_d}, {"a_d", s.clip.a_d}, {"kappa", s.clip.kappa}};
  j["actor"] = sac::to_string(c.actor);
  j["grouping"] = c.grouping;
  j["eval"] = {{"checkpoint", c.checkpoint}, {"episodes", c.eval_episodes}, {"traces", c.traces}};
  return j;
}

// Keys absent from `j` keep their defaults; unknown keys are errors.
inline RunConfig config_from_json(const json& j, RunConfig c = {}) {
  using detail::read;
  try {
    detail::reject_unknown(j, {"model", "seeds", "out", "jobs", "perturbation", "synergy", "convergence", "task", "sac",
                               "clip", "actor", "grouping", "eval"},
                           "config");
    read(j, "model", c.model);
    read(j, "seeds", c.seeds);
    read(j, "out", c.out);
    read(j, "jobs", c.jobs);
    if (j.contains("perturbation")) {
      const auto& p = j["perturbation"];
      detail::reject_unknown(p, {"total_steps", "control_frequency", "control_amplitude", "dt"}, "perturbation");
      read(p, "total_steps", c.perturbation.total_steps);
      read(p, "control_frequency", c.perturbation.control_frequency);
      read(p, "control_amplitude", c.perturbation.control_amplitude);
      read(p, "dt", c.perturbation.dt);
    }
    if (j.contains("synergy")) {
      const auto& s = j["synergy"];
      detail::reject_unknown(s, {"segments", "signal", "candidates", "rule", "gap_fraction", "collapse_ratio", "restarts",
                                 "max_swap_iterations", "save_trajectories"},
                             "synergy");
      read(s, "segments", c.extraction.segments);
      if (s.contains("signal")) c.extraction.signal = detail::signal_from(s["signal"].get<std::string>());
      read(s, "candidates", c.extraction.candidates);
      if (s.contains("rule")) c.extraction.selection.rule = detail::rule_from(s["rule"].get<std::string>());
      read(s, "gap_fraction", c.extraction.selection.gap_fraction);
      read(s, "collapse_ratio", c.extraction.selection.collapse_ratio);
      read(s, "restarts", c.extraction.selection.kmedoids.restarts);
      read(s, "max_swap_iterations", c.extraction.selection.kmedoids.max_swap_iterations);
      read(s, "save_trajectories", c.save_trajectories);
    }
    if (j.contains("convergence")) {
      const auto& v = j["convergence"];
      detail::reject_unknown(v, {"sample_sizes", "n_seeds", "n_groups"}, "convergence");
      read(v, "sample_sizes", c.convergence_sizes);
      read(v, "n_seeds", c.convergence_seeds);
      read(v, "n_groups", c.convergence_groups);
    }
    if (j.contains("task")) {
      const auto& t = j["task"];
      auto& tc = c.task_config;
      detail::reject_unknown(t, {"name", "episode_length", "dt", "w_p", "w_a", "alive_bonus", "target_min", "target_max",
                                 "initial_q", "initial_q_noise", "osc_joint", "osc_amplitude", "osc_period"},
                             "task");
      read(t, "name", c.task);
      read(t, "episode_length", tc.episode_length);
      read(t, "dt", tc.dt);
      read(t, "w_p", tc.w_p);
      read(t, "w_a", tc.w_a);
      read(t, "alive_bonus", tc.alive_bonus);
      if (t.contains("target_min")) tc.target_min = detail::optional_vec2(t["target_min"], "task.target_min");
      if (t.contains("target_max")) tc.target_max = detail::optional_vec2(t["target_max"], "task.target_max");
      read(t, "initial_q", tc.initial_q);
      read(t, "initial_q_noise", tc.initial_q_noise);
      read(t, "osc_joint", tc.osc_joint);
      read(t, "osc_amplitude", tc.osc_amplitude);
      read(t, "osc_period", tc.osc_period);
    }
    if (j.contains("sac")) {
      const auto& s = j["sac"];
      auto& sc = c.sac;
      detail::reject_unknown(s, {"batch_size", "buffer_size", "warmup_steps", "gamma", "tau", "train_frequency",
                                 "gradient_steps", "target_update_interval", "n_envs", "learning_rate",
                                 "linear_lr_decay", "initial_alpha", "target_entropy", "hidden", "total_steps",
                                 "eval_interval", "eval_episodes", "checkpoint_interval", "stop_at_return", "resume"},
                             "sac");
      read(s, "batch_size", sc.batch_size);
      read(s, "buffer_size", sc.buffer_size);
      read(s, "warmup_steps", sc.warmup_steps);
      read(s, "gamma", sc.gamma);
      read(s, "tau", sc.tau);
      read(s, "train_frequency", sc.train_frequency);
      read(s, "gradient_steps", sc.gradient_steps);
      read(s, "target_update_interval", sc.target_update_interval);
      read(s, "n_envs", sc.n_envs);
      read(s, "learning_rate", sc.learning_rate);
      read(s, "linear_lr_decay", sc.linear_lr_decay);
      read(s, "initial_alpha", sc.initial_alpha);
      if (s.contains("target_entropy"))
        sc.target_entropy = s["target_entropy"].is_null() ? std::nullopt : std::optional(s["target_entropy"].get<double>());
      read(s, "hidden", sc.hidden);
      read(s, "total_steps", sc.total_steps);
      read(s, "eval_interval", sc.eval_interval);
      read(s, "eval_episodes", sc.eval_episodes);
      read(s, "checkpoint_interval", sc.checkpoint_interval);
      if (s.contains("stop_at_return"))
        c.stop_at_return = s["stop_at_return"].is_null() ? std::nullopt : std::optional(s["stop_at_return"].get<double>());
      read(s, "resume", c.resume);
    }
    if (j.contains("clip")) {
      const auto& k = j["clip"];
      detail::reject_unknown(k, {"k_d", "a_d", "kappa"}, "clip");
      read(k, "k_d", c.sac.clip.k_d);
      read(k, "a_d", c.sac.clip.a_d);
      read(k, "kappa", c.sac.clip.kappa);
    }
    if (j.contains("actor")) c.actor = sac::actor_kind_from_string(j["actor"].get<std::string>());
    read(j, "grouping", c.grouping);
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      detail::reject_unknown(e, {"checkpoint", "episodes", "traces"}, "eval");
      read(e, "checkpoint", c.checkpoint);
      read(e, "episodes", c.eval_episodes);
      read(e, "traces", c.traces);
    }
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParameterError("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

inline void validate(const RunConfig& c) {
  if (c.seeds.empty()) throw ParameterError("config: seeds must not be empty");
  if (c.jobs < 1) throw ParameterError("config: jobs must be >= 1");
  c.perturbation.validate();
  c.task_config.validate();
  c.sac.validate();
  if (c.extraction.segments < 1) throw ParameterError("config: synergy.segments must be >= 1");
}

// ---------------------------------------------------------------------------
// Output directories and provenance

// Explicit `out` wins; otherwise DYNSYN_OUT (or "runs") joined with the
// command name.
inline fs::path output_dir(const RunConfig& c, const std::string& command) {
  if (!c.out.empty()) return c.out;
  const char* root = std::getenv("DYNSYN_OUT");
  return fs::path(root && *root ? root : "runs") / command;
}

struct ModelSource {
  plant::Model model;
  std::string origin;  // "builtin" or the file path
  std::string checksum;
};

inline ModelSource load_model_source(const std::string& name_or_path) {
  for (const auto& n : plant::builtin_model_names())
    if (n == name_or_path) {
      plant::Model m = plant::builtin_model(n);
      return {m, "builtin", hex64(fnv1a64(plant::model_to_json(m).dump()))};
    }
  if (!fs::exists(name_or_path)) throw LookupError("model '" + name_or_path + "' is neither built in nor a file");
  return {plant::load_model(name_or_path), name_or_path, file_checksum(name_or_path)};
}

struct Provenance {
  std::string command;
  std::vector<std::uint64_t> seeds;
  json inputs = json::object();  // name -> {path, checksum}

  void add_input(const std::string& name, const std::string& path, const std::string& checksum) {
    inputs[name] = {{"path", path}, {"checksum", checksum}};
  }
};

inline void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

// Resolved config, version stamp, seeds and input checksums.
inline void write_provenance(const fs::path& dir, const RunConfig& c, const Provenance& p) {
  fs::create_directories(dir);
  write_json(to_json(c), dir / "config.json");
  write_json({{"version", kVersion}, {"command", p.command}, {"seeds", p.seeds}, {"inputs", p.inputs}},
             dir / "provenance.json");
}

inline Provenance base_provenance(const std::string& command, const RunConfig& c, const ModelSource& m) {
  Provenance p{command, c.seeds, json::object()};
  p.add_input("model", m.origin, m.checksum);
  return p;
}

// ---------------------------------------------------------------------------
// inspect

inline json inspect_model(const plant::Model& model) {
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.dof()));
  const Eigen::MatrixXd r = plant::moment_arms(model, q);
  const auto ranges = plant::length_ranges(model);
  json muscles = json::array();
  for (std::size_t m = 0; m < model.muscle_count(); ++m) {
    const auto& spec = model.routing.muscles[m];
    std::vector<double> arms;
    for (Eigen::Index k = 0; k < r.cols(); ++k) arms.push_back(r(static_cast<Eigen::Index>(m), k));
    muscles.push_back({{"name", spec.name},
                       {"f_max", spec.params.f_max},
                       {"moment_arms_at_zero", arms},
                       {"length_range", {ranges[m].first, ranges[m].second}}});
  }
  json joints = json::array();
  for (const auto& l : model.chain.links) joints.push_back(l.name);
  const auto tip = plant::end_effector(model, q);
  return {{"name", model.name},
          {"dof", model.dof()},
          {"muscle_count", model.muscle_count()},
          {"joints", joints},
          {"muscles", muscles},
          {"end_effector_at_zero", {tip.x(), tip.y()}}};
}

// ---------------------------------------------------------------------------
// extract

struct ExtractOutput {
  fs::path dir;
  synergy::Extraction extraction;
};

inline ExtractOutput cmd_extract(const RunConfig& c, std::ostream& log = std::cerr) {
  validate(c);
  const ModelSource src = load_model_source(c.model);
  const fs::path dir = output_dir(c, "extract");
  fs::create_directories(dir);
  const auto names = synergy::muscle_names(src.model);

  synergy::ExtractionOptions opts = c.extraction;
  opts.jobs = c.jobs;
  if (c.save_trajectories)
    opts.on_trajectory = [&](std::size_t i, const synergy::TrajectoryBuffer& traj) {
      const json meta = {{"seed", c.seeds[i]},
                         {"control_frequency", c.perturbation.control_frequency},
                         {"control_amplitude", c.perturbation.control_amplitude}};
      synergy::save_trajectory(traj, (dir / ("trajectory_seed" + std::to_string(c.seeds[i]) + ".bin")).string(), meta);
    };
  log << "extract: " << src.model.name << ", " << c.seeds.size() << " seed(s), " << c.perturbation.total_steps
      << " steps each\n";
  ExtractOutput out{dir, synergy::extract(src.model, c.perturbation, c.seeds, opts)};
  const auto& ex = out.extraction;

  const json selected = synergy::grouping_to_json(ex.selection.grouping, src.model.name, names, ex.selection.table);
  synergy::save_grouping(selected, (dir / "grouping.json").string());
  synergy::write_selection_csv(ex.selection.table, (dir / "selection.csv").string());
  synergy::write_matrix_csv(ex.probability.p, names, (dir / "probability.csv").string());
  json per_seed = json::array();
  for (const auto& run : ex.runs) {
    const std::string tag = "seed" + std::to_string(run.seed);
    synergy::save_grouping(synergy::grouping_to_json(run.grouping, src.model.name, names),
                           (dir / ("grouping_" + tag + ".json")).string());
    synergy::write_matrix_csv(run.correlation.r, names, (dir / ("correlation_" + tag + ".csv")).string());
    json named = json::array();
    for (const auto& g : run.grouping.groups) {
      json members = json::array();
      for (int i : g) members.push_back(names[static_cast<std::size_t>(i)]);
      named.push_back(members);
    }
    per_seed.push_back({{"seed", run.seed},
                        {"groups", named},
                        {"cost", run.grouping.cost},
                        {"degenerate_segments", run.correlation.degenerate}});
  }
  write_json({{"model", src.model.name},
              {"n_groups", ex.selection.n_groups},
              {"degenerate_selection", ex.selection.degenerate},
              {"selection_table", synergy::selection_table_json(ex.selection.table)},
              {"runs", per_seed}},
             dir / "summary.json");
  plant::save_model(src.model, (dir / "model.json").string());
  write_provenance(dir, c, base_provenance("extract", c, src));
  log << "extract: selected " << ex.selection.n_groups << " groups, wrote " << dir.string() << '\n';
  return out;
}

// ---------------------------------------------------------------------------
// train

struct AggregateRow {
  std::uint64_t step = 0;
  std::size_t n_seeds = 0;
  double mean = 0.0;
  double std = 0.0;  // population std across seeds
};

// One row per logged step; each row averages the seeds that logged it.
inline std::vector<AggregateRow> aggregate_curves(const std::vector<std::vector<sac::CurvePoint>>& curves) {
  std::map<std::uint64_t, std::vector<double>> by_step;
  for (const auto& curve : curves)
    for (const auto& p : curve) by_step[p.step].push_back(p.mean_return);
  std::vector<AggregateRow> out;
  for (const auto& [step, values] : by_step) {
    AggregateRow r{step, values.size(), 0.0, 0.0};
    for (double v : values) r.mean += v;
    r.mean /= static_cast<double>(values.size());
    for (double v : values) r.std += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(r.std / static_cast<double>(values.size()));
    out.push_back(r);
  }
  return out;
}

inline void write_aggregate_csv(const std::vector<AggregateRow>& rows, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "step,n_seeds,mean_return,std_return\n";
  for (const auto& r : rows) out << r.step << ',' << r.n_seeds << ',' << r.mean << ',' << r.std << '\n';
}

inline sac::EnvFactory env_factory(const RunConfig& c, const plant::Model& model) {
  tasks::make_env(c.task, model, c.task_config);  // surface config errors before any training
  return [task = c.task, model, tc = c.task_config]() -> std::unique_ptr<tasks::Environment> {
    return tasks::make_env(task, model, tc);
  };
}

inline policy::GroupIndexMap singleton_map(std::size_t n) {
  std::vector<std::vector<int>> groups;
  for (std::size_t i = 0; i < n; ++i) groups.push_back({static_cast<int>(i)});
  return policy::GroupIndexMap(groups);
}

struct TrainOutput {
  fs::path dir;
  std::vector<std::vector<sac::CurvePoint>> curves;  // per seed, including resumed history
  std::vector<AggregateRow> aggregate;
  std::vector<std::uint64_t> first_step_at_stop;
};

inline TrainOutput cmd_train(const RunConfig& c, std::ostream& log = std::cerr) {
  validate(c);
  const ModelSource src = load_model_source(c.model);
  const fs::path dir = output_dir(c, "train");
  Provenance prov = base_provenance("train", c, src);

  policy::GroupIndexMap map = singleton_map(src.model.muscle_count());
  if (c.actor == sac::ActorKind::kDynSyn) {
    if (c.grouping.empty()) throw ParameterError("train: the dynsyn actor needs a grouping file (grouping)");
    const auto g = synergy::load_grouping(c.grouping);
    if (g.n_items() != src.model.muscle_count())
      throw ParameterError("train: grouping covers " + std::to_string(g.n_items()) + " muscles, model has " +
                           std::to_string(src.model.muscle_count()));
    map = policy::GroupIndexMap(g.groups);
    prov.add_input("grouping", c.grouping, file_checksum(c.grouping));
  }
  const sac::EnvFactory factory = env_factory(c, src.model);
  fs::create_directories(dir);
  write_provenance(dir, c, prov);

  TrainOutput out;
  out.dir = dir;
  struct SeedOut {
    std::vector<sac::CurvePoint> curve;
    std::uint64_t stop = 0;
  };
  const auto results = synergy::parallel_map<SeedOut>(c.seeds.size(), c.jobs, [&](std::size_t i) {
    const std::uint64_t seed = c.seeds[i];
    const fs::path sdir = dir / ("seed_" + std::to_string(seed));
    fs::create_directories(sdir);
    const fs::path ckpt = sdir / "checkpoint.bin";
    const fs::path curve_path = sdir / "curve.csv";
    sac::TrainOptions opts;
    opts.checkpoint_path = ckpt.string();
    opts.stop_at_return = c.stop_at_return;
    Provenance sprov = prov;
    sprov.seeds = {seed};
    std::vector<sac::CurvePoint> history;
    if (c.resume && fs::exists(ckpt)) {
      sprov.add_input("resumed_checkpoint", ckpt.string(), file_checksum(ckpt.string()));
      opts.resume = sac::agent_from_archive(nn::Archive::load(ckpt.string()), map.hash());
      if (fs::exists(curve_path)) history = sac::read_curve_csv(curve_path.string());
      // Logged points past the checkpoint are dropped; they will be redone.
      std::erase_if(history, [&](const sac::CurvePoint& p) { return p.step > opts.resume->step; });
    }
    write_provenance(sdir, c, sprov);
    sac::write_curve_csv(history, curve_path.string());
    opts.on_eval = [&](const sac::CurvePoint& p) {
      sac::write_curve_csv({p}, curve_path.string(), true);
      if (c.jobs == 1)
        log << "train[" << sac::to_string(c.actor) << " seed " << seed << "] step " << p.step << " return "
            << p.mean_return << '\n';
    };
    auto r = sac::train(factory, c.actor, map, c.sac, seed, opts);
    history.insert(history.end(), r.curve.begin(), r.curve.end());
    return SeedOut{history, r.first_step_at_stop};
  });
  for (const auto& r : results) {
    out.curves.push_back(r.curve);
    out.first_step_at_stop.push_back(r.stop);
  }
  out.aggregate = aggregate_curves(out.curves);
  write_aggregate_csv(out.aggregate, dir / "curve.csv");
  log << "train: wrote " << dir.string() << '\n';
  return out;
}

// ---------------------------------------------------------------------------
// convergence

struct ConvergenceOutput {
  fs::path dir;
  synergy::ConvergenceStudy study;
};

inline ConvergenceOutput cmd_convergence(const RunConfig& c, std::ostream& log = std::cerr) {
  validate(c);
  const ModelSource src = load_model_source(c.model);
  const fs::path dir = output_dir(c, "convergence");
  fs::create_directories(dir);
  synergy::ExtractionOptions opts = c.extraction;
  opts.jobs = c.jobs;
  synergy::PerturbationConfig base = c.perturbation;
  base.seed = c.seeds.front();
  log << "convergence: " << src.model.name << ", " << c.convergence_seeds << " seeds\n";
  ConvergenceOutput out{dir, synergy::convergence_study(src.model, base, c.convergence_sizes, c.convergence_seeds,
                                                        c.convergence_groups, opts)};
  synergy::write_convergence_csv(out.study, (dir / "convergence.csv").string());
  const auto names = synergy::muscle_names(src.model);
  for (std::size_t i = 0; i < out.study.rows.size(); ++i)
    synergy::write_matrix_csv(out.study.probabilities[i].p, names,
                              (dir / ("probability_" + std::to_string(out.study.rows[i].sample_size) + ".csv")).string());
  Provenance prov = base_provenance("convergence", c, src);
  prov.seeds.clear();
  for (std::size_t s = 0; s < c.convergence_seeds; ++s) prov.seeds.push_back(base.seed + s);
  write_provenance(dir, c, prov);
  log << "convergence: " << out.study.n_groups << " groups, wrote " << dir.string() << '\n';
  return out;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOutput {
  fs::path dir;
  sac::EvalResult result;
};

inline EvalOutput cmd_eval(const RunConfig& c, std::ostream& log = std::cerr) {
  validate(c);
  if (c.eval_episodes < 1) throw ParameterError("eval: episodes must be >= 1");
  if (c.checkpoint.empty()) throw ParameterError("eval: no checkpoint given");
  const ModelSource src = load_model_source(c.model);
  const sac::Agent agent = sac::agent_from_archive(nn::Archive::load(c.checkpoint));
  auto env = tasks::make_env(c.task, src.model, c.task_config);
  if (env->action_dim() != static_cast<std::size_t>(agent.action_dim()) || env->obs_dim() != static_cast<std::size_t>(agent.obs_dim()))
    throw ParameterError("eval: checkpoint does not fit the " + c.task + " task on " + src.model.name);
  const fs::path dir = output_dir(c, "eval");
  fs::create_directories(dir);
  if (c.traces) fs::create_directories(dir / "traces");

  std::vector<tasks::TraceRow> rows;
  std::size_t episode = 0;
  const std::uint64_t seed = c.seeds.front();
  EvalOutput out{dir, {}};
  out.result = sac::evaluate(agent, *env, c.eval_episodes, seed, [&](const auto&, const auto& ctrl, const auto& st) {
    if (!c.traces) return;
    rows.push_back({env->time(), env->state().q, ctrl, st.reward});
    if (st.done) {
      std::ostringstream name;
      name << "episode_" << std::setw(3) << std::setfill('0') << episode++ << ".csv";
      tasks::write_trace_csv(rows, src.model, (dir / "traces" / name.str()).string());
      rows.clear();
    }
  });
  write_json({{"episodes", c.eval_episodes},
              {"seed", seed},
              {"returns", out.result.returns},
              {"mean", out.result.mean},
              {"std", out.result.std}},
             dir / "eval.json");
  Provenance prov = base_provenance("eval", c, src);
  prov.seeds = {seed};
  prov.add_input("checkpoint", c.checkpoint, file_checksum(c.checkpoint));
  write_provenance(dir, c, prov);
  log << "eval: mean return " << out.result.mean << " over " << c.eval_episodes << " episodes\n";
  return out;
}

// Exit code for an exception escaping a command.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const LookupError*>(&e) ||
      dynamic_cast<const FormatError*>(&e))
    return kUsage;
  return kRuntime;
}

}  // namespace dynsyn::cli
