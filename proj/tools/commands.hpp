#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace pipenet::cli {

// Exit codes are a stable contract:
//   0 success
//   1 usage, file, or scenario validation error
//   2 junction solver did not converge
//   3 flow reversal at the junction
//   4 degenerate inflow (net incoming mass flux numerically zero)
//   5 supersonic junction star state
//   6 invalid junction problem (index sets, mode restrictions)
//   7 flow classification failure (sonic or ambiguous traces)
//   8 runtime numerics failure (vacuum or invalid cell)
int exit_code_for_error_kind(const std::string& kind);

int cmd_solve_junction(const std::string& config_path, std::ostream& out,
                       std::ostream& err);

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 bool mode_compare, std::ostream& out, std::ostream& err);

int cmd_shock_tube(const std::string& config_path, const std::string& out_dir,
                   std::ostream& out, std::ostream& err);

int cmd_verify(std::uint64_t seed, int trials, std::ostream& out,
               std::ostream& err);

}  // namespace pipenet::cli
