#pragma once

// Scenario files: a JSON overlay on a fully specified default profile.
// Every key you can write in a file exists in the defaults, so typos
// fail loudly instead of silently running the default experiment.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbfnav/sim_engine.hpp"

namespace cbfnav {

class ScenarioFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json default_scenario_json() {
  return nlohmann::json{
      {"name", ""},
      {"map", ""},
      {"start", {-1.0, -8.0, 0.0, 1.5707963267948966, 0.0, 0.0}},
      {"goal", {6.0, 2.5}},
      {"arrival_tolerance", 0.1},
      {"horizon", 60.0},
      {"control_rate", 100.0},
      {"stop_on_arrival", true},
      {"rk_substeps", 1},
      {"guidance", {{"k1", 0.2}, {"k2", 1.0}, {"k3", 2.0}}},
      {"sensing",
       {{"range", 5.0},
        {"rays", 100},
        {"period", 0.2},
        {"window", 3},
        {"epsilon_a", 0.15},
        {"epsilon_beta", 0.15},
        {"rho", 30.0},
        {"kappa", 30.0},
        {"max_ellipses", 100},
        {"eta_order", 2},
        {"eta_rate", 1.2}}},
      {"constraints",
       {{"speed_limit", 3.0}, {"accel_limit", 6.0}, {"turn_limit", 4.0}}},
      {"chain",
       {{"psi_gains", {25.0, 20.0}},
        {"xi_gains", {15.0}},
        {"epsilon", 10.0},
        {"alpha", 30.0},
        {"jet_order", 4}}},
      {"filter",
       {{"gamma", 200.0}, {"sigma", 0.6}, {"full_ud_derivative", true}}},
      {"stage",
       {{"A", {{-1.0, 0.0}, {0.0, -1.0}}},
        {"B", {{1.0, 0.0}, {0.0, 1.0}}}}}};
}

namespace detail {

inline bool same_kind(const nlohmann::json& a, const nlohmann::json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

inline void merge_into(nlohmann::json& base, const nlohmann::json& overlay,
                       const std::string& path) {
  for (const auto& [key, value] : overlay.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) {
      throw ScenarioFormatError("unknown scenario key \"" + where + "\"");
    }
    nlohmann::json& slot = base[key];
    if (slot.is_object()) {
      if (!value.is_object()) {
        throw ScenarioFormatError("\"" + where + "\" must be an object");
      }
      merge_into(slot, value, where);
    } else {
      if (!same_kind(slot, value)) {
        throw ScenarioFormatError("\"" + where + "\" has the wrong type (" +
                                  std::string(value.type_name()) +
                                  ", expected " +
                                  std::string(slot.type_name()) + ")");
      }
      slot = value;
    }
  }
}

inline std::vector<std::string> split_dotted(const std::string& key) {
  std::vector<std::string> parts;
  std::string part;
  std::stringstream ss(key);
  while (std::getline(ss, part, '.')) {
    if (part.empty()) {
      throw ScenarioFormatError("bad override key \"" + key + "\"");
    }
    parts.push_back(part);
  }
  if (parts.empty()) throw ScenarioFormatError("empty override key");
  return parts;
}

}  // namespace detail

// Applies one "dotted.key=value" override.  The key must already exist;
// the value is parsed as JSON, with a bare word falling back to string.
inline void apply_override(nlohmann::json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ScenarioFormatError("override must look like key=value, got \"" +
                              spec + "\"");
  }
  const std::string key = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  nlohmann::json* slot = &doc;
  for (const std::string& part : detail::split_dotted(key)) {
    if (!slot->is_object() || !slot->contains(part)) {
      throw ScenarioFormatError("override targets unknown key \"" + key +
                                "\"");
    }
    slot = &(*slot)[part];
  }
  if (slot->is_object()) {
    throw ScenarioFormatError("override key \"" + key +
                              "\" names a section, not a value");
  }
  if (!detail::same_kind(*slot, value)) {
    throw ScenarioFormatError("override \"" + key + "\" has the wrong type (" +
                              std::string(value.type_name()) + ", expected " +
                              std::string(slot->type_name()) + ")");
  }
  *slot = value;
}

struct Scenario {
  std::string name;
  std::filesystem::path map_path;
  SimulationProblem problem;
};

namespace detail {

template <class T>
T positive(const nlohmann::json& j, const char* what) {
  const T v = j.get<T>();
  if (!(v > T(0))) {
    throw ScenarioFormatError(std::string(what) + " must be positive");
  }
  return v;
}

inline Eigen::Matrix2d matrix2(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_array() || j[0].size() != 2 ||
      !j[1].is_array() || j[1].size() != 2) {
    throw ScenarioFormatError(std::string(what) + " must be a 2x2 matrix");
  }
  Eigen::Matrix2d m;
  m << j[0][0].get<double>(), j[0][1].get<double>(), j[1][0].get<double>(),
      j[1][1].get<double>();
  return m;
}

}  // namespace detail

// Builds the runnable problem from a merged scenario document.  The map
// path resolves relative to base_dir (normally the scenario's folder).
inline Scenario build_scenario(const nlohmann::json& doc,
                               const std::filesystem::path& base_dir,
                               const std::string& fallback_name) {
  Scenario sc;
  sc.name = doc.at("name").get<std::string>();
  if (sc.name.empty()) sc.name = fallback_name;

  const std::string map_file = doc.at("map").get<std::string>();
  if (map_file.empty()) {
    throw ScenarioFormatError("scenario does not name a map");
  }
  std::filesystem::path map_path(map_file);
  if (map_path.is_relative()) map_path = base_dir / map_path;
  sc.map_path = map_path;

  SimulationProblem& prob = sc.problem;
  prob.map = load_map(map_path.string());

  const auto& start = doc.at("start");
  if (!start.is_array() || start.size() != 6) {
    throw ScenarioFormatError("start must list qx, qy, v, theta, u1, u2");
  }
  for (int i = 0; i < 6; ++i) {
    prob.initial_state[i] = start[i].get<double>();
  }

  const auto& goal = doc.at("goal");
  if (!goal.is_array() || goal.size() != 2) {
    throw ScenarioFormatError("goal must be a point");
  }
  prob.goal.position = {goal[0].get<double>(), goal[1].get<double>()};
  prob.goal.arrival_tolerance =
      detail::positive<double>(doc.at("arrival_tolerance"),
                               "arrival_tolerance");
  const auto& guidance = doc.at("guidance");
  prob.goal.k1 = detail::positive<double>(guidance.at("k1"), "guidance.k1");
  prob.goal.k2 = detail::positive<double>(guidance.at("k2"), "guidance.k2");
  prob.goal.k3 = detail::positive<double>(guidance.at("k3"), "guidance.k3");

  SimulationSettings& st = prob.settings;
  st.horizon = detail::positive<double>(doc.at("horizon"), "horizon");
  st.control_rate =
      detail::positive<double>(doc.at("control_rate"), "control_rate");
  st.stop_on_arrival = doc.at("stop_on_arrival").get<bool>();
  st.rk_substeps = detail::positive<int>(doc.at("rk_substeps"), "rk_substeps");

  const auto& sensing = doc.at("sensing");
  st.lidar.max_range = detail::positive<double>(sensing.at("range"),
                                                "sensing.range");
  st.lidar.ray_count = detail::positive<int>(sensing.at("rays"),
                                             "sensing.rays");
  st.scan_period = detail::positive<double>(sensing.at("period"),
                                            "sensing.period");
  st.window = detail::positive<int>(sensing.at("window"), "sensing.window");
  st.margins.epsilon_a = detail::positive<double>(sensing.at("epsilon_a"),
                                                  "sensing.epsilon_a");
  st.margins.epsilon_beta = detail::positive<double>(
      sensing.at("epsilon_beta"), "sensing.epsilon_beta");
  st.rho = detail::positive<double>(sensing.at("rho"), "sensing.rho");
  st.kappa = detail::positive<double>(sensing.at("kappa"), "sensing.kappa");
  st.max_ellipses = detail::positive<int>(sensing.at("max_ellipses"),
                                          "sensing.max_ellipses");
  st.eta.r = detail::positive<int>(sensing.at("eta_order"),
                                   "sensing.eta_order");
  st.eta.nu = sensing.at("eta_rate").get<double>();
  if (st.eta.nu <= 1.0) {
    throw ScenarioFormatError("sensing.eta_rate must exceed 1");
  }

  const auto& constraints = doc.at("constraints");
  const double speed_limit = detail::positive<double>(
      constraints.at("speed_limit"), "constraints.speed_limit");
  const double accel_limit = detail::positive<double>(
      constraints.at("accel_limit"), "constraints.accel_limit");
  const double turn_limit = detail::positive<double>(
      constraints.at("turn_limit"), "constraints.turn_limit");

  HocbfChainConfig& chain = prob.chain;
  const auto& chain_doc = doc.at("chain");
  chain.psi_gains = chain_doc.at("psi_gains").get<std::vector<double>>();
  chain.barrier_depth = static_cast<int>(chain.psi_gains.size());
  chain.xi_gains = chain_doc.at("xi_gains").get<std::vector<double>>();
  chain.state_depth = static_cast<int>(chain.xi_gains.size());
  chain.epsilon = detail::positive<double>(chain_doc.at("epsilon"),
                                           "chain.epsilon");
  chain.outer_alpha = detail::positive<double>(chain_doc.at("alpha"),
                                               "chain.alpha");
  chain.jet_order = detail::positive<int>(chain_doc.at("jet_order"),
                                          "chain.jet_order");
  chain.xi = speed_band(speed_limit);
  chain.phi = input_box(accel_limit, turn_limit);
  chain.validate();

  FilterConfig& filter = prob.filter;
  const auto& filter_doc = doc.at("filter");
  filter.gamma = detail::positive<double>(filter_doc.at("gamma"),
                                          "filter.gamma");
  filter.sigma = detail::positive<double>(filter_doc.at("sigma"),
                                          "filter.sigma");
  filter.full_ud_derivative =
      filter_doc.at("full_ud_derivative").get<bool>();
  filter.alpha_slope = chain.outer_alpha;

  const auto& stage_doc = doc.at("stage");
  prob.stage = ControlDynamics::make(detail::matrix2(stage_doc.at("A"),
                                                     "stage.A"),
                                     detail::matrix2(stage_doc.at("B"),
                                                     "stage.B"));
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& file,
                              const std::vector<std::string>& overrides = {}) {
  std::ifstream in(file);
  if (!in) {
    throw ScenarioFormatError("cannot open scenario file " + file.string());
  }
  nlohmann::json overlay;
  try {
    overlay = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    throw ScenarioFormatError(file.string() + ": " + err.what());
  }
  if (!overlay.is_object()) {
    throw ScenarioFormatError(file.string() + ": expected a JSON object");
  }
  nlohmann::json doc = default_scenario_json();
  detail::merge_into(doc, overlay, "");
  for (const std::string& spec : overrides) {
    apply_override(doc, spec);
  }
  return build_scenario(doc, file.parent_path(), file.stem().string());
}

// Frame dump for plotting: sensing disks and the fitted ellipses.
inline void write_frames_json(std::ostream& os,
                              const std::vector<PerceptionFrame>& frames) {
  nlohmann::json out = nlohmann::json::array();
  for (const PerceptionFrame& f : frames) {
    nlohmann::json ellipses = nlohmann::json::array();
    for (const EllipseParam& e : f.ellipses) {
      ellipses.push_back({{"center", {e.center.x(), e.center.y()}},
                          {"bearing", e.bearing},
                          {"semi_major", e.semi_major},
                          {"semi_minor", e.semi_minor}});
    }
    out.push_back({{"index", f.index},
                   {"origin", {f.origin.x(), f.origin.y()}},
                   {"disk_radius", f.disk_radius},
                   {"epsilon_beta", f.epsilon_beta},
                   {"rho", f.rho},
                   {"ellipses", std::move(ellipses)}});
  }
  os << out.dump(2) << '\n';
}

}  // namespace cbfnav
