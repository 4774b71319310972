// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "omnifuse/cli/config.hpp"

namespace omnifuse::cli {

/// A stage was started before one of its parent checkpoints exists.
class LineageError : public std::runtime_error {
 public:
  LineageError(const std::string& stage, const std::string& missing);
  const std::string& stage() const { return stage_; }
  const std::string& missing() const { return missing_; }

 private:
  std::string stage_;
  std::string missing_;
};

/// Runs one command line (args[0] is the program name). Results go to `out`;
/// log lines and the JSON error object go to `err`. Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const Environment& env = Environment::from_process());

}  // namespace omnifuse::cli
