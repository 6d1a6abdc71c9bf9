#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cnv/tensor.hpp"

namespace cnv::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,
  kValidationError = 2,
  kEquivalenceFailure = 3,
};

// Entry point shared by the cnvsim binary and the tests. `args` excludes the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "8x8x32" -> {8, 8, 32}.
Extent3 parse_dims(std::string_view text);

// Flat `key = value` lines (blank lines and # comments ignored). Keys are
// flag names without the leading dashes.
std::vector<std::pair<std::string, std::string>> parse_config(std::string_view text);

}  // namespace cnv::cli
