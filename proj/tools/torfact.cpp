// SPDX-License-Identifier: Apache-2.0
//
// torfact: factor near-identity torus diffeomorphisms into compositions of
// flows of function-rescaled family fields.  Subcommands are wired up in
// cli.hpp; this translation unit only owns main().

#include "torfact/cli.hpp"

int main(int argc, char** argv) { return torfact::cli_main(argc, argv); }
