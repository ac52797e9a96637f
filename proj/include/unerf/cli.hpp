#pragma once

#include <iostream>

namespace unerf {

// Subcommands: gen-scene, train, render, eval, bench, gradcheck. Options may
// also come from a TOML/INI file given with --config, one [section] per
// subcommand. Returns the process exit status.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace unerf
