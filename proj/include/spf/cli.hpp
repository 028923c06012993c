#ifndef SPF_CLI_HPP_
#define SPF_CLI_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spf::cli {

// Exit codes per failure class.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitRuntime = 4;

struct CommandResult {
  int exit_code = kExitOk;
  std::optional<std::filesystem::path> report_path;
  std::string message;
};

// Output root: $SPF_OUT when set, else "spf_out".
std::filesystem::path default_output_root();

/**
 * Parses and runs one `spf` invocation (args excludes the program name):
 *
 *   convert  --kind --src --dst [--split]
 *   train    [--config] --manifest [--val-manifest] [--out] training flags
 *   adapt    [--config] --natural-manifest --target-manifest [--out]
 *            training flags, --grl-lambda, --grl-schedule, --grl-ramp-steps
 *   predict  --checkpoint --input --out
 *   evaluate --predictions --manifest --report [--quantile] [--simplify]
 *   render   --image --scanpaths... --out
 *
 * Errors are printed to stderr and mapped onto the exit codes above.
 */
CommandResult run(const std::vector<std::string>& args);

int main(int argc, char** argv);

}  // namespace spf::cli

#endif  // SPF_CLI_HPP_
