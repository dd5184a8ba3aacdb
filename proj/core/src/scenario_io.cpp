#include "pipenet/scenario_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace pipenet {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Validator {
  std::vector<std::string> violations;

  void add(const std::string& path, const std::string& message) {
    violations.push_back(path + ": " + message);
  }

  void check_keys(const json& obj, const std::string& path,
                  std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
            return it.key() == k;
          }) == allowed.end()) {
        add(path + "." + it.key(), "unknown key");
      }
    }
  }

  bool has(const json& obj, const char* key) const { return obj.contains(key); }

  double number(const json& obj, const std::string& path, const char* key,
                double fallback, bool required = false) {
    if (!obj.contains(key)) {
      if (required) add(path + "." + key, "missing required value");
      return fallback;
    }
    const json& v = obj.at(key);
    if (!v.is_number()) {
      add(path + "." + key, "expected a number");
      return fallback;
    }
    return v.get<double>();
  }

  int integer(const json& obj, const std::string& path, const char* key,
              int fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
      add(path + "." + key, "expected an integer");
      return fallback;
    }
    return v.get<int>();
  }

  std::string text(const json& obj, const std::string& path, const char* key,
                   const std::string& fallback, bool required = false) {
    if (!obj.contains(key)) {
      if (required) add(path + "." + key, "missing required value");
      return fallback;
    }
    const json& v = obj.at(key);
    if (!v.is_string()) {
      add(path + "." + key, "expected a string");
      return fallback;
    }
    return v.get<std::string>();
  }
};

GasState segment_state(Validator& val, const json& obj, const std::string& path) {
  GasState s;
  s.rho = val.number(obj, path, "rho", 1.0, true);
  s.u = val.number(obj, path, "u", 0.0, true);
  s.p = val.number(obj, path, "p", 1.0, true);
  return s;
}

void validate_initial_state(Validator& val, const std::string& path,
                            const GasState& s, const GasParams& gas) {
  if (!(s.rho > 0.0) || !std::isfinite(s.rho)) {
    val.add(path + ".rho", "density must be positive");
    return;
  }
  if (!(s.p > 0.0) || !std::isfinite(s.p)) {
    val.add(path + ".p", "pressure must be positive");
    return;
  }
  if (!std::isfinite(s.u)) {
    val.add(path + ".u", "velocity must be finite");
    return;
  }
  if (gas.gamma > 1.0) {
    const double c = std::sqrt(gas.gamma * s.p / s.rho);
    if (!(std::abs(s.u) < c)) {
      std::ostringstream os;
      os << "supersonic initial state (|u|=" << std::abs(s.u) << ", c=" << c << ")";
      val.add(path, os.str());
    }
  }
}

GridPipe parse_pipe(Validator& val, const json& obj, const std::string& path) {
  GridPipe pipe;
  val.check_keys(obj, path,
                 {"label", "nu_norm", "gamma", "c_v", "length", "cells",
                  "far_end", "flow_class", "initial"});

  pipe.spec.label = val.text(obj, path, "label", "", true);
  pipe.spec.nu_norm = val.number(obj, path, "nu_norm", 1.0);
  pipe.spec.gas.gamma = val.number(obj, path, "gamma", 1.4);
  pipe.spec.gas.c_v = val.number(obj, path, "c_v", 1.0);
  pipe.length = val.number(obj, path, "length", 1.0);
  pipe.cells = val.integer(obj, path, "cells", 200);

  if (!(pipe.spec.nu_norm > 0.0)) val.add(path + ".nu_norm", "must be positive");
  if (!(pipe.spec.gas.gamma > 1.0)) {
    val.add(path + ".gamma", "adiabatic exponent must exceed 1 for pipe '" +
                                 pipe.spec.label + "'");
  }
  if (!(pipe.spec.gas.c_v > 0.0)) val.add(path + ".c_v", "must be positive");
  if (!(pipe.length > 0.0)) val.add(path + ".length", "must be positive");
  if (pipe.cells < 4) val.add(path + ".cells", "at least 4 cells required");

  const std::string far = val.text(obj, path, "far_end", "outflow");
  if (far == "outflow") {
    pipe.far_end = FarEndBC::Outflow;
  } else if (far == "reflective") {
    pipe.far_end = FarEndBC::Reflective;
  } else {
    val.add(path + ".far_end", "expected 'outflow' or 'reflective'");
  }

  if (val.has(obj, "flow_class")) {
    const std::string cls = val.text(obj, path, "flow_class", "");
    if (cls == "incoming") {
      pipe.junction_class = FlowClass::Incoming;
    } else if (cls == "outgoing") {
      pipe.junction_class = FlowClass::Outgoing;
    } else {
      val.add(path + ".flow_class", "expected 'incoming' or 'outgoing'");
    }
  }

  if (!obj.contains("initial")) {
    val.add(path + ".initial", "missing required value");
    return pipe;
  }
  const json& init = obj.at("initial");
  if (!init.is_object()) {
    val.add(path + ".initial", "expected an object");
    return pipe;
  }
  val.check_keys(init, path + ".initial", {"rho", "u", "p", "segments"});

  const std::string init_path = path + ".initial";
  if (init.contains("segments")) {
    if (init.contains("rho") || init.contains("u") || init.contains("p")) {
      val.add(init_path, "give either a constant state or segments, not both");
      return pipe;
    }
    const json& segs = init.at("segments");
    if (!segs.is_array() || segs.empty()) {
      val.add(init_path + ".segments", "expected a non-empty array");
      return pipe;
    }
    for (size_t k = 0; k < segs.size(); ++k) {
      const std::string seg_path =
          init_path + ".segments[" + std::to_string(k) + "]";
      const json& seg = segs.at(k);
      if (!seg.is_object()) {
        val.add(seg_path, "expected an object");
        continue;
      }
      val.check_keys(seg, seg_path, {"x_from", "x_to", "rho", "u", "p"});
      InitialSegment segment;
      segment.x_from = val.number(seg, seg_path, "x_from", 0.0, true);
      segment.x_to = val.number(seg, seg_path, "x_to", 0.0, true);
      segment.state = segment_state(val, seg, seg_path);
      validate_initial_state(val, seg_path, segment.state, pipe.spec.gas);
      if (!(segment.x_from < segment.x_to)) {
        val.add(seg_path, "needs x_from < x_to");
      }
      pipe.initial_spec.push_back(segment);
    }
    // Segments must tile [0, length] in order, without overlaps or gaps.
    const double tol = 1e-12 * std::max(1.0, pipe.length);
    for (size_t k = 0; k + 1 < pipe.initial_spec.size(); ++k) {
      const InitialSegment& a = pipe.initial_spec[k];
      const InitialSegment& b = pipe.initial_spec[k + 1];
      if (b.x_from < a.x_to - tol) {
        val.add(init_path + ".segments", "overlapping segments at index " +
                                             std::to_string(k + 1));
      } else if (b.x_from > a.x_to + tol) {
        val.add(init_path + ".segments",
                "gap before segment " + std::to_string(k + 1));
      }
    }
    if (!pipe.initial_spec.empty()) {
      if (std::abs(pipe.initial_spec.front().x_from) > tol) {
        val.add(init_path + ".segments", "coverage must start at x = 0");
      }
      if (std::abs(pipe.initial_spec.back().x_to - pipe.length) > tol) {
        val.add(init_path + ".segments", "coverage must end at the pipe length");
      }
    }
  } else {
    InitialSegment segment;
    segment.x_from = 0.0;
    segment.x_to = pipe.length;
    segment.state = segment_state(val, init, init_path);
    validate_initial_state(val, init_path, segment.state, pipe.spec.gas);
    pipe.initial_spec.push_back(segment);
  }

  return pipe;
}

void fill_cells(Validator& val, GridPipe& pipe, const std::string& path) {
  if (pipe.cells < 1 || pipe.initial_spec.empty() || !(pipe.length > 0.0)) return;
  pipe.cons.reserve(pipe.cells);
  for (int i = 0; i < pipe.cells; ++i) {
    const double x = pipe.cell_center(i);
    const InitialSegment* hit = nullptr;
    for (const InitialSegment& seg : pipe.initial_spec) {
      if (x >= seg.x_from && x < seg.x_to) {
        hit = &seg;
        break;
      }
    }
    if (hit == nullptr) hit = &pipe.initial_spec.back();
    try {
      pipe.cons.push_back(primitive_to_conservative(hit->state, pipe.spec.gas));
    } catch (const Error& e) {
      val.add(path, e.what());
      return;
    }
  }
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    size_t line = 1, column = 1;
    for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::ostringstream os;
    os << "parse error at line " << line << ", column " << column << ": "
       << e.what();
    throw ConfigError(os.str());
  }

  Validator val;
  Scenario scenario;
  if (!doc.is_object()) {
    throw ConfigError("(root): expected an object");
  }
  val.check_keys(doc, "(root)", {"pipes", "junction", "run", "output"});

  if (!doc.contains("pipes") || !doc.at("pipes").is_array() ||
      doc.at("pipes").empty()) {
    val.add("pipes", "expected a non-empty array");
  } else {
    const json& pipes = doc.at("pipes");
    for (size_t i = 0; i < pipes.size(); ++i) {
      const std::string path = "pipes[" + std::to_string(i) + "]";
      if (!pipes.at(i).is_object()) {
        val.add(path, "expected an object");
        continue;
      }
      GridPipe pipe = parse_pipe(val, pipes.at(i), path);
      fill_cells(val, pipe, path);
      scenario.network.pipes.push_back(std::move(pipe));
    }
    for (size_t i = 0; i < scenario.network.pipes.size(); ++i) {
      for (size_t j = i + 1; j < scenario.network.pipes.size(); ++j) {
        if (scenario.network.pipes[i].spec.label ==
            scenario.network.pipes[j].spec.label) {
          val.add("pipes[" + std::to_string(j) + "].label",
                  "duplicate label '" + scenario.network.pipes[j].spec.label + "'");
        }
      }
    }
  }

  if (doc.contains("junction")) {
    const json& junction = doc.at("junction");
    if (!junction.is_object()) {
      val.add("junction", "expected an object");
    } else {
      val.check_keys(junction, "junction", {"mode"});
      const std::string mode = val.text(junction, "junction", "mode", "entropy_mix");
      if (mode == "entropy_mix") {
        scenario.network.scheme = JunctionScheme::EntropyMix;
      } else if (mode == "pressure") {
        scenario.network.scheme = JunctionScheme::PressureEqual;
      } else if (mode == "dynamic_pressure") {
        scenario.network.scheme = JunctionScheme::DynamicPressureEqual;
      } else if (mode == "merged_pair") {
        scenario.network.scheme = JunctionScheme::MergedPair;
      } else {
        val.add("junction.mode",
                "expected 'entropy_mix', 'pressure', 'dynamic_pressure' or "
                "'merged_pair'");
      }
    }
  }

  if (!doc.contains("run") || !doc.at("run").is_object()) {
    val.add("run", "expected an object");
  } else {
    const json& run = doc.at("run");
    val.check_keys(run, "run", {"end_time", "cfl", "splitting", "source"});
    scenario.end_time = val.number(run, "run", "end_time", 0.0, true);
    if (!(scenario.end_time > 0.0)) val.add("run.end_time", "must be positive");
    scenario.cfl = val.number(run, "run", "cfl", 0.9);
    if (!(scenario.cfl > 0.0 && scenario.cfl < 1.0)) {
      val.add("run.cfl", "must lie in (0, 1)");
    }
    const std::string splitting = val.text(run, "run", "splitting", "lie");
    if (splitting == "lie") {
      scenario.splitting = Splitting::Lie;
    } else if (splitting == "strang") {
      scenario.splitting = Splitting::Strang;
    } else {
      val.add("run.splitting", "expected 'lie' or 'strang'");
    }
    if (run.contains("source")) {
      const json& source = run.at("source");
      if (!source.is_object()) {
        val.add("run.source", "expected an object");
      } else {
        val.check_keys(source, "run.source",
                       {"gravity", "friction_factor", "diameter"});
        scenario.source.gravity = val.number(source, "run.source", "gravity", 0.0);
        scenario.source.friction_factor =
            val.number(source, "run.source", "friction_factor", 0.0);
        scenario.source.diameter = val.number(source, "run.source", "diameter", 1.0);
        if (scenario.source.friction_factor < 0.0) {
          val.add("run.source.friction_factor", "must be nonnegative");
        }
        if (scenario.source.friction_factor > 0.0 &&
            !(scenario.source.diameter > 0.0)) {
          val.add("run.source.diameter", "must be positive when friction is active");
        }
      }
    }
  }

  if (doc.contains("output")) {
    const json& output = doc.at("output");
    if (!output.is_object()) {
      val.add("output", "expected an object");
    } else {
      val.check_keys(output, "output", {"directory", "sample_interval", "probes"});
      scenario.output.directory =
          val.text(output, "output", "directory", scenario.output.directory);
      scenario.output.sample_interval =
          val.number(output, "output", "sample_interval", 0.0);
      if (scenario.output.sample_interval < 0.0) {
        val.add("output.sample_interval", "must be nonnegative");
      }
      if (output.contains("probes")) {
        const json& probes = output.at("probes");
        if (!probes.is_array()) {
          val.add("output.probes", "expected an array");
        } else {
          for (size_t k = 0; k < probes.size(); ++k) {
            const std::string path = "output.probes[" + std::to_string(k) + "]";
            const json& p = probes.at(k);
            if (!p.is_object()) {
              val.add(path, "expected an object");
              continue;
            }
            val.check_keys(p, path, {"pipe", "x"});
            Probe probe;
            probe.pipe_label = val.text(p, path, "pipe", "", true);
            probe.x = val.number(p, path, "x", 0.0, true);
            bool found = false;
            for (size_t i = 0; i < scenario.network.pipes.size(); ++i) {
              if (scenario.network.pipes[i].spec.label == probe.pipe_label) {
                const GridPipe& pipe = scenario.network.pipes[i];
                probe.pipe = static_cast<int>(i);
                if (probe.x < 0.0 || probe.x > pipe.length) {
                  val.add(path + ".x", "outside [0, length]");
                } else {
                  probe.cell = std::min(static_cast<int>(probe.x / pipe.dx()),
                                        pipe.cells - 1);
                }
                found = true;
                break;
              }
            }
            if (!found) {
              val.add(path + ".pipe", "unknown pipe label '" + probe.pipe_label + "'");
            }
            scenario.output.probes.push_back(std::move(probe));
          }
        }
      }
    }
  }

  // Cross-field checks that need the junction mode.
  if (scenario.network.scheme == JunctionScheme::MergedPair) {
    if (scenario.network.pipes.size() != 2) {
      val.add("junction.mode", "merged_pair requires exactly 2 pipes");
    } else {
      const GridPipe& a = scenario.network.pipes[0];
      const GridPipe& b = scenario.network.pipes[1];
      if (a.spec.gas.gamma != b.spec.gas.gamma ||
          a.spec.gas.c_v != b.spec.gas.c_v || a.spec.nu_norm != b.spec.nu_norm) {
        val.add("junction.mode",
                "merged_pair requires both pipes to share gamma, c_v and nu_norm");
      }
    }
  } else {
    for (size_t i = 0; i < scenario.network.pipes.size(); ++i) {
      const GridPipe& pipe = scenario.network.pipes[i];
      if (pipe.cons.empty()) continue;
      const GasState trace = pipe.cell_state(0);
      const std::string path = "pipes[" + std::to_string(i) + "]";
      if (trace.u == 0.0) {
        if (!pipe.junction_class) {
          val.add(path + ".flow_class",
                  "required: zero junction-end velocity is not classifiable");
        }
      } else if (pipe.junction_class) {
        const FlowClass derived =
            trace.u > 0.0 ? FlowClass::Outgoing : FlowClass::Incoming;
        if (derived != *pipe.junction_class) {
          val.add(path + ".flow_class",
                  "contradicts the sign of the junction-end velocity");
        }
      }
    }
  }

  if (!val.violations.empty()) {
    std::ostringstream os;
    os << "scenario validation failed:";
    for (const std::string& v : val.violations) os << "\n  " << v;
    throw ConfigError(os.str());
  }
  return scenario;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(path + ": cannot open file");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

namespace {

json scenario_json(const Scenario& scenario) {
  json doc = json::object();
  json pipes = json::array();
  for (const GridPipe& pipe : scenario.network.pipes) {
    json p = json::object();
    p["label"] = pipe.spec.label;
    p["nu_norm"] = pipe.spec.nu_norm;
    p["gamma"] = pipe.spec.gas.gamma;
    p["c_v"] = pipe.spec.gas.c_v;
    p["length"] = pipe.length;
    p["cells"] = pipe.cells;
    p["far_end"] = pipe.far_end == FarEndBC::Outflow ? "outflow" : "reflective";
    if (pipe.junction_class) {
      p["flow_class"] =
          *pipe.junction_class == FlowClass::Incoming ? "incoming" : "outgoing";
    }
    json init = json::object();
    if (pipe.initial_spec.size() == 1) {
      init["rho"] = pipe.initial_spec[0].state.rho;
      init["u"] = pipe.initial_spec[0].state.u;
      init["p"] = pipe.initial_spec[0].state.p;
    } else {
      json segments = json::array();
      for (const InitialSegment& seg : pipe.initial_spec) {
        json s = json::object();
        s["x_from"] = seg.x_from;
        s["x_to"] = seg.x_to;
        s["rho"] = seg.state.rho;
        s["u"] = seg.state.u;
        s["p"] = seg.state.p;
        segments.push_back(std::move(s));
      }
      init["segments"] = std::move(segments);
    }
    p["initial"] = std::move(init);
    pipes.push_back(std::move(p));
  }
  doc["pipes"] = std::move(pipes);

  const char* mode = "entropy_mix";
  switch (scenario.network.scheme) {
    case JunctionScheme::PressureEqual:
      mode = "pressure";
      break;
    case JunctionScheme::DynamicPressureEqual:
      mode = "dynamic_pressure";
      break;
    case JunctionScheme::MergedPair:
      mode = "merged_pair";
      break;
    default:
      break;
  }
  doc["junction"] = {{"mode", mode}};
  doc["run"] = {
      {"end_time", scenario.end_time},
      {"cfl", scenario.cfl},
      {"splitting", scenario.splitting == Splitting::Lie ? "lie" : "strang"},
      {"source",
       {{"gravity", scenario.source.gravity},
        {"friction_factor", scenario.source.friction_factor},
        {"diameter", scenario.source.diameter}}},
  };
  json output = json::object();
  output["directory"] = scenario.output.directory;
  output["sample_interval"] = scenario.output.sample_interval;
  if (!scenario.output.probes.empty()) {
    json probes = json::array();
    for (const Probe& probe : scenario.output.probes) {
      probes.push_back({{"pipe", probe.pipe_label}, {"x", probe.x}});
    }
    output["probes"] = std::move(probes);
  }
  doc["output"] = std::move(output);
  return doc;
}

}  // namespace

std::string scenario_to_json(const Scenario& scenario) {
  return scenario_json(scenario).dump(2);
}

void write_diagnostics_csv(std::ostream& os,
                           std::span<const DiagnosticsRecord> records) {
  os << "time,mass,energy,entropy,junction_mass_flux,junction_energy_flux,"
        "junction_entropy_flux,max_mach\n";
  for (const DiagnosticsRecord& r : records) {
    os << fmt17(r.time) << ',' << fmt17(r.total_mass) << ','
       << fmt17(r.total_energy) << ',' << fmt17(r.total_entropy) << ','
       << fmt17(r.junction_mass_flux) << ',' << fmt17(r.junction_energy_flux)
       << ',' << fmt17(r.junction_entropy_flux) << ',' << fmt17(r.max_mach)
       << '\n';
  }
}

void write_profile_csv(std::ostream& os, const GridPipe& pipe,
                       std::span<const GasState> states) {
  os << "x,rho,u,p,s,h\n";
  for (size_t i = 0; i < states.size(); ++i) {
    const GasState& s = states[i];
    os << fmt17(pipe.cell_center(static_cast<int>(i))) << ',' << fmt17(s.rho)
       << ',' << fmt17(s.u) << ',' << fmt17(s.p) << ','
       << fmt17(entropy(s, pipe.spec.gas)) << ','
       << fmt17(enthalpy(s, pipe.spec.gas)) << '\n';
  }
}

void write_probes_csv(std::ostream& os, std::span<const Probe> probes,
                      std::span<const std::vector<double>> rows) {
  os << "time";
  for (const Probe& probe : probes) {
    const std::string tag = probe.pipe_label + "_x" + fmt17(probe.x);
    os << ',' << tag << "_rho," << tag << "_u," << tag << "_p";
  }
  os << '\n';
  for (const std::vector<double>& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << fmt17(row[i]);
    }
    os << '\n';
  }
}

std::string run_metadata_json(const Scenario& scenario, const RunResult& result,
                              double wall_seconds) {
  json doc = json::object();
  doc["version"] = kVersion;
  doc["config"] = scenario_json(scenario);
  doc["tolerances"] = {
      {"star_pressure_residual_rel", 1e-12},
      {"junction_residual_rel", 1e-11},
  };
  doc["steps"] = result.steps;
  doc["end_time_reached"] = result.time;
  doc["completed"] = result.completed;
  if (!result.error_kind.empty()) {
    doc["error_kind"] = result.error_kind;
    doc["error_message"] = result.error_message;
  }
  doc["wall_time_s"] = wall_seconds;
  json snapshots = json::array();
  for (size_t k = 0; k < result.snapshots.size(); ++k) {
    snapshots.push_back({{"index", k}, {"time", result.snapshots[k].time}});
  }
  doc["snapshots"] = std::move(snapshots);
  return doc.dump(2);
}

void write_output_bundle(const std::string& directory, const Scenario& scenario,
                         const RunResult& result, double wall_seconds,
                         const std::string& diagnostics_name) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  const fs::path dir(directory);

  {
    std::ofstream os(dir / diagnostics_name);
    write_diagnostics_csv(os, result.samples);
  }
  for (size_t k = 0; k < result.snapshots.size(); ++k) {
    const ProfileSnapshot& snap = result.snapshots[k];
    for (size_t pi = 0; pi < snap.per_pipe.size(); ++pi) {
      const GridPipe& pipe = result.network.pipes[pi];
      std::ofstream os(dir / ("profile_" + std::to_string(k) + "_" +
                              pipe.spec.label + ".csv"));
      write_profile_csv(os, pipe, snap.per_pipe[pi]);
    }
  }
  if (!scenario.output.probes.empty()) {
    std::ofstream os(dir / "probes.csv");
    write_probes_csv(os, scenario.output.probes, result.probe_rows);
  }
  {
    std::ofstream os(dir / "run_metadata.json");
    os << run_metadata_json(scenario, result, wall_seconds) << '\n';
  }
}

}  // namespace pipenet
