#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "cpdemod/harness.hpp"

namespace cpdemod::cli {

enum class Command { run, frame, selftest };

struct CliArgs {
  Command command = Command::run;
  ExperimentConfig config;
  std::string out = "results.csv";
  std::optional<std::string> dat;
  // `frame` only
  Method frame_method = Method::cv;
  LearnerKind frame_learner = LearnerKind::frequentist;
  std::size_t frame_index = 0;
  // `selftest` only
  std::ptrdiff_t mutate_quantile_rank = 0;
};

/// Parse failure or --help. `code` is the process exit status and `message`
/// what should be printed (usage text included).
struct CliExit : std::runtime_error {
  CliExit(int code, const std::string& message) : std::runtime_error(message), code(code) {}
  int code;
};

/// CONFORMAL_DEMOD_SEED, when set, overrides --seed.
CliArgs parse_args(int argc, const char* const* argv);

int cmd_run(const CliArgs& args, std::ostream& out);
int cmd_frame(const CliArgs& args, std::ostream& out);
int cmd_selftest(const CliArgs& args, std::ostream& out);

/// Entry point: parse, dispatch, map errors to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cpdemod::cli
