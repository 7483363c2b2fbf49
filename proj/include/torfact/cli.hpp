// SPDX-License-Identifier: Apache-2.0
#ifndef TORFACT_CLI_HPP
#define TORFACT_CLI_HPP

#include <cstdio>

namespace torfact {

inline int cli_main(int, char**) {
  std::puts("torfact: not wired yet");
  return 1;
}

}  // namespace torfact

#endif  // TORFACT_CLI_HPP
