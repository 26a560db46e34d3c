#pragma once

#include "jnpdl/config.hpp"

#include <iosfwd>

namespace jnpdl {

void run_train(const ExperimentConfig& config, std::ostream& out, std::ostream& err);
void run_eval(const ExperimentConfig& config, std::ostream& out);
void run_eval_set(const ExperimentConfig& config, std::ostream& out);
void run_code(const ExperimentConfig& config, std::ostream& out);
void run_synth(const ExperimentConfig& config, std::ostream& out);
void run_inspect(const ExperimentConfig& config, std::ostream& out);

/// Parses the command line and dispatches. Returns 0 on success, 1 on
/// invalid input or usage, 2 on numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace jnpdl
