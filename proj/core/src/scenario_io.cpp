#include "loopbench/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <nlohmann/json.hpp>

#include "loopbench/errors.hpp"
#include "json_format.hpp"
#include "json_node.hpp"

namespace loopbench {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using detail::Node;
using detail::with_path;

std::vector<AgentState> read_states(const Node& node) {
  std::vector<AgentState> states;
  const std::size_t n = node.array_size();
  if (n == 0) node.fail("needs at least one state");
  states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = node.at(i).tuple(5);
    if (v[4] < 0.0) node.at(i).fail("speed must be non-negative");
    states.push_back({v[0], v[1], v[2], v[3], v[4], 0.0});
  }
  return states;
}

TrajectorySample make_log(const Node& node, double dt) {
  auto states = read_states(node);
  fill_yaw_rates(states, dt);
  return with_path(node, [&] { return TrajectorySample(dt, std::move(states)); });
}

std::vector<Point2> read_polyline(const Node& node) {
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < node.array_size(); ++i) {
    const auto v = node.at(i).tuple(2);
    pts.push_back({v[0], v[1]});
  }
  return pts;
}

MapModel read_map(const Node& node) {
  node.expect_object({"reference_path", "left_boundary", "right_boundary", "boundary_offsets"});
  const Node ref = node.at("reference_path");
  std::vector<ReferencePoint> reference;
  for (std::size_t i = 0; i < ref.array_size(); ++i) {
    const auto v = ref.at(i).tuple(3);
    reference.push_back({v[0], v[1], v[2]});
  }
  if (node.has("boundary_offsets")) {
    if (node.has("left_boundary") || node.has("right_boundary")) {
      node.fail("give either boundary_offsets or explicit boundaries, not both");
    }
    const Node off = node.at("boundary_offsets");
    off.expect_object({"left", "right"});
    const double left = off.at("left").number();
    const double right = off.at("right").number();
    return with_path(node, [&] { return make_corridor(reference, left, right); });
  }
  auto left = read_polyline(node.at("left_boundary"));
  auto right = read_polyline(node.at("right_boundary"));
  return with_path(node, [&] { return MapModel(reference, std::move(left), std::move(right)); });
}

AgentState read_init(const Node& node) {
  node.expect_object({"x", "y", "heading", "speed"});
  AgentState s;
  s.x = node.at("x").number();
  s.y = node.at("y").number();
  s.heading = wrap_angle(node.at("heading").number());
  s.speed = node.at("speed").number();
  if (s.speed < 0.0) node.at("speed").fail("must be non-negative");
  return s;
}

Scenario build(const json& doc, const LoadOptions& options, LoadReport* report) {
  const Node root(doc, "$", options, report);
  root.expect_object({"schema_version", "meta", "map", "ego", "agents"});
  const int version = root.at("schema_version").integer();
  if (version != kScenarioSchemaVersion) {
    root.at("schema_version").fail("unsupported version " + std::to_string(version));
  }

  Scenario sc;
  const Node meta = root.at("meta");
  meta.expect_object({"name", "sim_dt", "duration"});
  sc.name = meta.at("name").string();
  sc.sim_dt = meta.at("sim_dt").number();
  sc.duration = meta.at("duration").number();
  if (!(sc.sim_dt > 0.0)) meta.at("sim_dt").fail("must be positive");
  const double steps = sc.duration / sc.sim_dt;
  if (!(sc.duration > 0.0) || std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
    meta.at("duration").fail("must be a positive integer multiple of sim_dt");
  }

  sc.map = read_map(root.at("map"));

  const Node ego = root.at("ego");
  ego.expect_object({"init", "length", "width", "wheelbase", "states"});
  sc.ego.init = read_init(ego.at("init"));
  sc.ego.length = ego.at("length").number();
  sc.ego.width = ego.at("width").number();
  sc.ego.wheelbase = ego.at("wheelbase").number();
  if (ego.has("states")) sc.ego.log = make_log(ego.at("states"), sc.sim_dt);

  const Node agents = root.at("agents");
  for (std::size_t i = 0; i < agents.array_size(); ++i) {
    const Node a = agents.at(i);
    a.expect_object({"id", "kind", "length", "width", "states", "extrapolated"});
    AgentTrack track{{}, TrajectorySample(sc.sim_dt, {AgentState{}}), false};
    track.info.id = a.at("id").string();
    try {
      track.info.kind = agent_kind_from_string(a.at("kind").string());
    } catch (const Error& e) {
      a.at("kind").fail(e.what());
    }
    track.info.length = a.at("length").number();
    track.info.width = a.at("width").number();
    track.log = make_log(a.at("states"), sc.sim_dt);
    if (a.has("extrapolated")) track.extrapolated = a.at("extrapolated").boolean();
    if (extend_to_duration(track, sc.duration) && report) {
      report->warnings.push_back(a.path() + ": log shorter than duration, extended by holding the last state");
    }
    sc.agents.push_back(std::move(track));
  }

  try {
    sc.validate();
  } catch (const InvariantError& e) {
    throw ParseError(std::string("invalid scenario: ") + e.what());
  }
  return sc;
}

ordered_json state_row(const AgentState& s) { return ordered_json::array({s.t, s.x, s.y, s.heading, s.speed}); }

ordered_json states_json(const TrajectorySample& log) {
  ordered_json rows = ordered_json::array();
  for (const auto& s : log.states()) rows.push_back(state_row(s));
  return rows;
}

}  // namespace

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

Scenario parse_scenario(std::string_view text, const LoadOptions& options, LoadReport* report) {
  const json doc = detail::parse_json(text);
  return build(doc, options, report);
}

Scenario load_scenario(const std::filesystem::path& path, const LoadOptions& options, LoadReport* report) {
  const std::string text = read_text_file(path);
  try {
    return parse_scenario(text, options, report);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string format_scenario(const Scenario& sc) {
  ordered_json doc;
  doc["schema_version"] = kScenarioSchemaVersion;
  doc["meta"] = {{"name", sc.name}, {"sim_dt", sc.sim_dt}, {"duration", sc.duration}};

  ordered_json ref = ordered_json::array();
  for (const auto& p : sc.map.reference_path()) ref.push_back(ordered_json::array({p.x, p.y, p.speed_limit}));
  ordered_json left = ordered_json::array();
  for (const auto& p : sc.map.left_boundary()) left.push_back(ordered_json::array({p.x, p.y}));
  ordered_json right = ordered_json::array();
  for (const auto& p : sc.map.right_boundary()) right.push_back(ordered_json::array({p.x, p.y}));
  doc["map"] = {{"reference_path", ref}, {"left_boundary", left}, {"right_boundary", right}};

  const auto& e = sc.ego.init;
  ordered_json ego;
  ego["init"] = {{"x", e.x}, {"y", e.y}, {"heading", e.heading}, {"speed", e.speed}};
  ego["length"] = sc.ego.length;
  ego["width"] = sc.ego.width;
  ego["wheelbase"] = sc.ego.wheelbase;
  if (sc.ego.log) ego["states"] = states_json(*sc.ego.log);
  doc["ego"] = ego;

  ordered_json agents = ordered_json::array();
  for (const auto& a : sc.agents) {
    ordered_json j;
    j["id"] = a.info.id;
    j["kind"] = std::string(to_string(a.info.kind));
    j["length"] = a.info.length;
    j["width"] = a.info.width;
    if (a.extrapolated) j["extrapolated"] = true;
    j["states"] = states_json(a.log);
    agents.push_back(j);
  }
  doc["agents"] = agents;
  return compact_json_dump(doc);
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  write_text_file(path, format_scenario(scenario));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("write to '" + path.string() + "' failed");
}

}  // namespace loopbench
