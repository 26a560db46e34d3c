#pragma once

#include "jnpdl/classify.hpp"
#include "jnpdl/synthetic.hpp"
#include "jnpdl/trainer.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace jnpdl {

/// Everything a CLI command can be configured with.
struct ExperimentConfig {
  Hyperparams hyper;
  SetMode set_mode = SetMode::l2_fast;
  SyntheticSpec synth;

  std::string train_path;
  std::string test_path;
  std::string sets_path;
  std::string input_path;
  std::string model_path;
  std::string trace_path;
  std::string metrics_path;
  std::string output_path;

  /// Classifier settings derived from the hyperparameters. An unset lambda2
  /// resolves to 0.001 * N / 700 for `training_samples` N.
  ClassifierParams classifier(Index training_samples) const;
};

/// Names of all accepted keys, in documentation order.
const std::vector<std::string>& config_key_names();

/// One-line description of a key.
const std::string& config_key_help(const std::string& key);

/// Sets one key. Unknown keys and malformed values raise ValidationError.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Parses flat key=value lines. Blank lines and '#' comments are ignored;
/// unknown or repeated keys are errors.
std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in, const std::string& source);

/// Applies every line of a config file on top of `config`.
void load_config(const std::string& path, ExperimentConfig& config);

}  // namespace jnpdl
