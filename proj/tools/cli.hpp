#pragma once
// Command-line front end: every pipeline stage as a subcommand. Exit codes:
// 0 success, 1 domain error (bad data, failed run), 2 usage error.
#include <string>
#include <vector>

namespace bofspot {

// `args` excludes the binary name, e.g. {"gen-corpus", "--out", "corpus/"}.
int run_cli(std::vector<std::string> args);

}  // namespace bofspot
