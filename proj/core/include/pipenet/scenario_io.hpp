#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "pipenet/simulation.hpp"

namespace pipenet {

inline constexpr const char* kVersion = "0.1.0";

/// Parse and validate a scenario document. Collects every schema and physics
/// violation (with its config path) into one ConfigError.
Scenario parse_scenario(const std::string& text);

/// parse_scenario on the contents of a file.
Scenario load_scenario(const std::string& path);

/// Canonical echo of a scenario with all defaults materialised. Reloading
/// the echoed document reproduces the identical scenario.
std::string scenario_to_json(const Scenario& scenario);

/// Fixed-column diagnostics table: time, mass, energy, entropy,
/// junction_mass_flux, junction_energy_flux, junction_entropy_flux,
/// max_mach. Numeric fields carry 17 significant digits.
void write_diagnostics_csv(std::ostream& os,
                           std::span<const DiagnosticsRecord> records);

/// Per-pipe profile at one sample time: x, rho, u, p, s, h.
void write_profile_csv(std::ostream& os, const GridPipe& pipe,
                       std::span<const GasState> states);

/// Probe time series: time, then rho/u/p per probe.
void write_probes_csv(std::ostream& os, std::span<const Probe> probes,
                      std::span<const std::vector<double>> rows);

/// Run metadata document: config echo, solver tolerances, version, wall
/// time, step count, and the snapshot index.
std::string run_metadata_json(const Scenario& scenario, const RunResult& result,
                              double wall_seconds);

/// Write the complete output bundle of a run into a directory (created if
/// missing): diagnostics CSV, per-pipe profile CSVs per snapshot, probes CSV
/// when probes exist, and run_metadata.json.
void write_output_bundle(const std::string& directory, const Scenario& scenario,
                         const RunResult& result, double wall_seconds,
                         const std::string& diagnostics_name = "diagnostics.csv");

}  // namespace pipenet
