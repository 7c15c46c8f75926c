// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "depscreen/cli.h"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return depscreen::run_cli(args, std::cout, std::cerr);
}
