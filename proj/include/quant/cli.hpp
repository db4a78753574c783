#pragma once
#include <string>
#include <vector>

namespace quant::cli {

// quant <fetch|train|backtest|report|selftest> [--config FILE] [--seed N]
//       [--variant NAME] [--out DIR]
// Exit codes: 0 success, 1 domain error, 2 usage error.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace quant::cli
