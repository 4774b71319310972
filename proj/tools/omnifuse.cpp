// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "omnifuse/cli/commands.hpp"

int main(int argc, char** argv) {
  return omnifuse::cli::run_cli({argv, argv + argc}, std::cout, std::cerr);
}
