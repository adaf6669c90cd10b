// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#include <vector>

#include "xmodal/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return xmodal::run_cli(args);
}
