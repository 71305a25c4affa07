#pragma once

#include "config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace riskhjb::cli {

enum ExitCode : int { ok = 0, usage_error = 1, numerical_failure = 2, assumption_failure = 3 };

int cmd_check(const RunConfig& cfg, std::ostream& out);
int cmd_solve(const RunConfig& cfg, std::ostream& out);
int cmd_simulate(const RunConfig& cfg, std::ostream& out);
int cmd_evaluate(const RunConfig& cfg, std::ostream& out);
int cmd_compare(const RunConfig& cfg, std::ostream& out);
int cmd_oracle_compare(const RunConfig& cfg, std::ostream& out);

/// Full command line handling; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace riskhjb::cli
