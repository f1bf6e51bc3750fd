// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include <iostream>
#include <string>
#include <vector>

#include "segravir/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return segravir::cli::Run(args, std::cout, std::cerr);
}
