#pragma once

namespace grcl::cli {

/// Parses argv and executes one subcommand. Returns the process exit
/// status: 0 success, 1 usage error, 2 runtime failure.
int run(int argc, char** argv);

}  // namespace grcl::cli
