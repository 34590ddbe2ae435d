#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rnadesign/structure.hpp"

namespace rnadesign {

// One CLI invocation (args excludes argv[0]). Returns the process exit code:
// 0 success, 1 internal error, 2 input validation failure. Human-readable
// logging goes to `err`; machine-readable output goes to files only.
int run_cli(const std::vector<std::string>& args, std::ostream& err);

// All *.pdb files under dir (sorted), grouped into ensembles by sequence.
std::vector<Ensemble> load_corpus_dir(const std::string& dir);

}  // namespace rnadesign
