#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "crowdloss/cli/config.hpp"

namespace crowdloss::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,     // bad arguments or configuration
  kExitFailed = 2,    // a tolerance or acceptance check failed
  kExitAborted = 3,   // numerical abort
};

struct CommandOptions {
  bool svg = false;
};

// Each command writes its CSVs under cfg.out and a short summary to `log`.
int cmd_gradcheck(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_simulate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_nms_sweep(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_anchor_demo(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_eval(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);

/// Full command line (args[0] is the program name). Errors are reported on
/// `err` and mapped to an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crowdloss::cli
