#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmft/gradcheck.hpp"

namespace mmft {

/// Named gradient-check targets: "op:<name>" for single tensor operations,
/// "module:<name>" for layers, fusion blocks and losses, and "model" for the
/// reduced 64x64 network trained on the full loss.
std::vector<std::string> gradcheck_scopes();

/// Builds the scope's random inputs and parameters from `seed` and compares
/// reverse-mode gradients with central differences. Throws ValidationError for
/// an unknown scope. options.seed is replaced by `seed`.
GradCheckReport run_gradcheck(const std::string& scope, std::uint64_t seed, GradCheckOptions options = {});

}  // namespace mmft
