// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#ifndef SEGRAVIR_CLI_HPP_
#define SEGRAVIR_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace segravir::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,      // bad flags, bad or unknown config keys
  kExitData = 2,       // missing/malformed inputs, I/O failures
  kExitNumerical = 3,  // non-finite losses or gradients
};

// Runs `segravir <args...>` in-process. `args` excludes the program name.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Per-command defaults; every accepted key appears here.
nlohmann::json default_config(const std::string& command);

// Overlays `user` onto `base`. Throws InvalidArgument on unknown keys or
// type mismatches, naming the dotted key path.
void merge_config(nlohmann::json& base, const nlohmann::json& user,
                  const std::string& path = "");

// "a.b.c=value": value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

}  // namespace segravir::cli

#endif  // SEGRAVIR_CLI_HPP_
