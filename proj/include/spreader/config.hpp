#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "spreader/calibration.hpp"
#include "spreader/optimizer.hpp"
#include "spreader/simulation.hpp"

namespace spreader {

/// Contents of a scenario file: the experiment plus the optimizer settings.
struct ScenarioFile {
  Scenario scenario;
  OptimizerSettings optimizer;
};

/// Contents of a calibration file: regression coefficients and machine limits.
struct MachineFile {
  CalibrationModel calibration;
  ControlConstraints constraints;
};

/// Parse YAML text. Relative paths (prescription csv) resolve against base_dir.
/// Errors are ConfigError with the dotted name of the offending field.
ScenarioFile parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {});
ScenarioFile load_scenario(const std::filesystem::path& path);

MachineFile parse_calibration(const std::string& text);
MachineFile load_calibration(const std::filesystem::path& path);

/// Effective configuration as YAML; parse_scenario / parse_calibration read it back.
std::string to_yaml(const ScenarioFile& file);
std::string to_yaml(const MachineFile& file);

/// 64-bit FNV-1a, used to fingerprint the effective configuration.
std::uint64_t fnv1a(const std::string& text);

/// Columns: k,t,x,y,phi,D_l,D_r,rpm_l,rpm_r,deposit_mass,cost
void write_trace_csv(std::ostream& out, const RunRecord& record);

/// YAML summary with final cost, runtime, controller and the effective config.
void write_summary(std::ostream& out, const RunRecord& record, const ScenarioFile& scenario,
                   const MachineFile& machine);

std::string to_string(DepositScaling scaling);
DepositScaling parse_scaling(const std::string& name);
std::string to_string(TriangleSupport support);
TriangleSupport parse_triangle_support(const std::string& name);
std::string to_string(Integrator integrator);
Integrator parse_integrator(const std::string& name);

}  // namespace spreader
