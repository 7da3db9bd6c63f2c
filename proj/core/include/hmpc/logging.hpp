#pragma once

#include <string>

#include "hmpc/sim.hpp"

namespace hmpc {

/// Version tag for the log/summary column layout; echoed in run manifests.
inline constexpr const char* kLogSchemaVersion = "1";

/// Fixed column order:
/// t, q_0.., qd_0.., u_qd_0.., u_qdd_0.., p_x..z, o_w..z, pref_x..z,
/// oref_w..z, ep_x..z, eo_x..z, qp_status, solve_time_us
std::string log_csv_header(int n_joints);

/// Whole log as CSV. Timing is opt-in: the wall-clock column breaks
/// run-to-run byte reproducibility, so it defaults to zeros.
std::string log_csv(const ExecutionLog& log, bool include_timing = false);

/// Per-axis box statistics (axis, median, q1, q3, iqr, whisker_lo,
/// whisker_hi, outliers, max).
std::string summary_csv(const ExecutionLog& log);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace hmpc
