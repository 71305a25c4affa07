#pragma once

// Plain-text output. Numbers use 17 significant digits so values round-trip;
// lines end in LF and nothing depends on the locale.

#include "riskhjb/ergodic_solver.hpp"
#include "riskhjb/hjb_solver.hpp"
#include "riskhjb/simulation.hpp"

#include <filesystem>
#include <string>

namespace riskhjb {

std::string format_number(double v);

/// Writes bytes as given (no newline translation). Throws ConfigError on I/O failure.
void write_text(const std::filesystem::path& path, const std::string& content);

/// Columns t, x1..xn, value. Every `time_stride`-th slice plus the last.
std::string value_field_csv(const ValueField& field, std::size_t time_stride = 1);

/// Columns t, x1..xn, h1..hm.
std::string strategy_field_csv(const StrategyField& field, std::size_t time_stride = 1);

/// Columns x1..xn, u_hat, rate, h1..hm.
std::string ergodic_csv(const ErgodicSolution& sol, const StrategyField& strategy);

/// Columns horizon, rate_mean, rate_std, rate_min, cauchy, qbu_lhs_max.
std::string checkpoint_csv(const std::vector<CheckpointRecord>& history);

/// Columns x1..xn, U, B1..Bn, Q11, Q12, .., Qnn, lhs.
std::string qbu_csv(const QBUDiagnostic& diag, const Grid& grid);

/// Columns rank, name, value, std_error, diff, joint_se, ess, n_paths, horizon.
std::string comparison_csv(const ComparisonTable& table);

/// Columns t, path, x1..xn[, log_wealth].
std::string paths_csv(const PathBundle& bundle);

}  // namespace riskhjb
