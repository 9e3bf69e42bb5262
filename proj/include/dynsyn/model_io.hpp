#pragma once

// JSON model documents. Numbers are written with the shortest decimal form
// that round-trips, so save -> load reproduces every parameter bit for bit.

#include <nlohmann/json.hpp>

#include <fstream>
#include <initializer_list>
#include <string>

#include "dynsyn/errors.hpp"
#include "dynsyn/plant.hpp"

namespace dynsyn::plant {

inline constexpr const char* kModelFormat = "dynsyn-model/1";

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw FormatError(where + ": unknown key '" + key + "'");
  }
}

inline Vec2 vec2(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw FormatError(where + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json vec2(const Vec2& v) { return json::array({v.x(), v.y()}); }

}  // namespace detail

inline nlohmann::json model_to_json(const Model& model) {
  using nlohmann::json;
  json links = json::array();
  for (const auto& l : model.chain.links) {
    links.push_back({{"name", l.name},
                     {"parent", l.parent},
                     {"base", detail::vec2(l.base)},
                     {"mass", l.mass},
                     {"length", l.length},
                     {"com", l.com},
                     {"inertia", l.inertia},
                     {"damping", l.damping},
                     {"limits", json::array({l.q_min, l.q_max})}});
  }
  json muscles = json::array();
  for (const auto& m : model.routing.muscles) {
    json path = json::array();
    for (const auto& vp : m.path) path.push_back({{"link", vp.link}, {"point", detail::vec2(vp.point)}});
    muscles.push_back({{"name", m.name},
                       {"path", path},
                       {"tendon_slack", m.tendon_slack},
                       {"f_max", m.params.f_max},
                       {"l_opt", m.params.l_opt},
                       {"v_max", m.params.v_max},
                       {"tau_act", m.params.tau_act},
                       {"tau_deact", m.params.tau_deact}});
  }
  return {{"format", kModelFormat},
          {"name", model.name},
          {"gravity", detail::vec2(model.chain.gravity)},
          {"links", links},
          {"muscles", muscles},
          {"end_effector", {{"link", model.tip.link}, {"point", detail::vec2(model.tip.point)}}}};
}

inline Model model_from_json(const nlohmann::json& j) {
  using detail::reject_unknown;
  using detail::vec2;
  try {
    reject_unknown(j, {"format", "name", "gravity", "links", "muscles", "end_effector"}, "model");
    if (j.at("format").get<std::string>() != kModelFormat)
      throw FormatError("model: unsupported format '" + j.at("format").get<std::string>() + "'");
    Model m;
    m.name = j.at("name").get<std::string>();
    if (j.contains("gravity")) m.chain.gravity = vec2(j["gravity"], "gravity");
    for (const auto& jl : j.at("links")) {
      reject_unknown(jl, {"name", "parent", "base", "mass", "length", "com", "inertia", "damping", "limits"},
                     "link");
      Link l;
      l.name = jl.at("name").get<std::string>();
      l.parent = jl.value("parent", kGround);
      if (jl.contains("base")) l.base = vec2(jl["base"], "link base");
      l.mass = jl.at("mass").get<double>();
      l.length = jl.at("length").get<double>();
      l.com = jl.at("com").get<double>();
      l.inertia = jl.at("inertia").get<double>();
      l.damping = jl.value("damping", 0.0);
      const Vec2 lim = vec2(jl.at("limits"), "link limits");
      l.q_min = lim.x();
      l.q_max = lim.y();
      m.chain.links.push_back(l);
    }
    for (const auto& jm : j.at("muscles")) {
      reject_unknown(jm, {"name", "path", "tendon_slack", "f_max", "l_opt", "v_max", "tau_act", "tau_deact"},
                     "muscle");
      MuscleSpec s;
      s.name = jm.at("name").get<std::string>();
      for (const auto& jp : jm.at("path")) {
        reject_unknown(jp, {"link", "point"}, "via-point");
        s.path.push_back({jp.at("link").get<int>(), vec2(jp.at("point"), "via-point")});
      }
      s.tendon_slack = jm.at("tendon_slack").get<double>();
      s.params.f_max = jm.at("f_max").get<double>();
      s.params.l_opt = jm.at("l_opt").get<double>();
      s.params.v_max = jm.value("v_max", s.params.v_max);
      s.params.tau_act = jm.value("tau_act", s.params.tau_act);
      s.params.tau_deact = jm.value("tau_deact", s.params.tau_deact);
      m.routing.muscles.push_back(s);
    }
    const auto& je = j.at("end_effector");
    reject_unknown(je, {"link", "point"}, "end_effector");
    m.tip = {je.at("link").get<int>(), vec2(je.at("point"), "end_effector")};
    validate(m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("model file '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write model file '" + path + "'");
  out << model_to_json(model).dump(2) << '\n';
}

// A built-in name or a path to a model document.
inline Model resolve_model(const std::string& name_or_path) {
  for (const auto& n : builtin_model_names())
    if (n == name_or_path) return builtin_model(n);
  return load_model(name_or_path);
}

}  // namespace dynsyn::plant
