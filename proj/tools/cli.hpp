#pragma once

#include <string>
#include <vector>

namespace sheetcap::cli {

/// Exit codes of run().
enum ExitCode : int { Ok = 0, Failure = 1, ConfigProblem = 2, VerificationFailed = 3 };

/// Entry point of the sheetcap command line tool.
int run(int argc, const char* const* argv);

/// Convenience overload for tests.
int run(const std::vector<std::string>& args);

}  // namespace sheetcap::cli
