#include "jnpdl/cli.hpp"

#include "jnpdl/io.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <map>
#include <ostream>

namespace jnpdl {

namespace {

void need(const std::string& value, const std::string& key, const std::string& command) {
  require(!value.empty(), command + ": missing required setting '" + key + "'");
}

Hyperparams expand_atoms(Hyperparams h, Index num_classes) {
  if (h.atoms_per_class.size() == 1) h.atoms_per_class.assign(static_cast<std::size_t>(num_classes), h.atoms_per_class[0]);
  return h;
}

Classifier<double> make_classifier(const TrainedModel<double>& model, const ExperimentConfig& config) {
  return Classifier<double>(model, config.classifier(model.coding.coeffs.cols()));
}

void check_dim(const Eigen::MatrixXd& features, const TrainedModel<double>& model, const std::string& source) {
  require(features.rows() == model.projection.input_dim(),
          source + ": samples have " + std::to_string(features.rows()) + " features, model expects " +
              std::to_string(model.projection.input_dim()));
}

}  // namespace

void run_train(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  need(config.train_path, "train", "train");
  need(config.model_path, "model", "train");
  std::vector<std::string> warnings;
  const auto data = load_dataset(config.train_path, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";

  const auto model = train(data, expand_atoms(config.hyper, data.num_classes));
  save_model(config.model_path, model);
  if (!config.trace_path.empty()) write_file_atomic(config.trace_path, trace_csv(model.objective_trace));
  for (const auto& [iter, rise] : model.monotonicity_violations) {
    err << "warning: objective rose by " << format_double(double(rise)) << " (relative) at iteration " << iter << "\n";
  }
  const auto& last = model.objective_trace.back();
  out << "samples=" << data.size() << " classes=" << data.num_classes << " dim=" << data.dim() << "\n";
  out << "iterations=" << model.objective_trace.size() - 1 << " converged=" << (model.converged ? "true" : "false")
      << "\n";
  out << "objective=" << format_double(last.total) << " eta=" << format_double(model.hyperparams.eta.value_or(0.0))
      << "\n";
}

void run_eval(const ExperimentConfig& config, std::ostream& out) {
  need(config.model_path, "model", "eval");
  need(config.test_path, "test", "eval");
  const auto model = load_model(config.model_path);
  const auto table = read_labeled_csv(config.test_path);
  check_dim(table.features, model, config.test_path);
  const auto truth = to_model_labels(table, model.num_classes());
  const auto classifier = make_classifier(model, config);
  std::vector<Index> predicted;
  predicted.reserve(truth.size());
  for (Index j = 0; j < table.features.cols(); ++j) {
    predicted.push_back(classifier.classify_sample(table.features.col(j)).label);
  }
  const auto metrics = compute_metrics(truth, predicted, model.num_classes());
  if (!config.metrics_path.empty()) write_file_atomic(config.metrics_path, metrics_json(metrics));
  out << "accuracy=" << format_double(metrics.accuracy) << " samples=" << truth.size() << "\n";
}

void run_eval_set(const ExperimentConfig& config, std::ostream& out) {
  need(config.model_path, "model", "eval-set");
  need(config.sets_path, "sets", "eval-set");
  const auto model = load_model(config.model_path);
  const auto sets = read_frame_sets(config.sets_path);
  const auto classifier = make_classifier(model, config);
  std::vector<Index> truth, predicted;
  Index frames = 0, frames_correct = 0;
  for (std::size_t i = 0; i < sets.frames.size(); ++i) {
    check_dim(sets.frames[i], model, config.sets_path);
    const long long label = sets.labels[i];
    require(label >= 1 && label <= model.num_classes(),
            config.sets_path + ": label " + std::to_string(label) + " outside the model's classes");
    const auto result = classifier.classify_set(sets.frames[i]);
    truth.push_back(static_cast<Index>(label - 1));
    predicted.push_back(result.label);
    frames += static_cast<Index>(result.frame_labels.size());
    for (Index l : result.frame_labels) frames_correct += l == label - 1;
  }
  const auto metrics = compute_metrics(truth, predicted, model.num_classes());
  const double frame_accuracy = double(frames_correct) / double(frames);
  if (!config.metrics_path.empty()) {
    write_file_atomic(config.metrics_path, metrics_json(metrics, {{"frame_accuracy", frame_accuracy}}));
  }
  out << "accuracy=" << format_double(metrics.accuracy) << " sets=" << truth.size()
      << " frame_accuracy=" << format_double(frame_accuracy) << "\n";
}

void run_code(const ExperimentConfig& config, std::ostream& out) {
  need(config.model_path, "model", "code");
  need(config.input_path, "input", "code");
  const auto model = load_model(config.model_path);
  const auto table = read_labeled_csv(config.input_path);
  check_dim(table.features, model, config.input_path);
  const auto classifier = make_classifier(model, config);
  std::string csv;
  for (Index j = 0; j < table.features.cols(); ++j) {
    const Eigen::VectorXd x = classifier.code(table.features.col(j), config.set_mode);
    csv += std::to_string(table.labels[j]);
    for (Index a = 0; a < x.size(); ++a) csv += "," + format_double(x(a));
    csv += "\n";
  }
  if (config.output_path.empty()) {
    out << csv;
  } else {
    write_file_atomic(config.output_path, csv);
  }
}

void run_synth(const ExperimentConfig& config, std::ostream& out) {
  need(config.output_path, "output", "synth");
  const auto data = generate_synthetic(config.synth);
  save_dataset(config.output_path, data);
  out << "wrote " << data.size() << " samples, " << data.num_classes << " classes, dim " << data.dim() << "\n";
}

void run_inspect(const ExperimentConfig& config, std::ostream& out) {
  need(config.model_path, "model", "inspect");
  const auto h = load_model_header(config.model_path);
  auto list = [](const std::vector<std::uint32_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  out << "s=" << h.s << "\ns_p=" << h.s_p << "\nq=" << h.q << "\natoms=" << h.atoms << "\nclasses=" << h.classes
      << "\nsamples=" << h.samples << "\natoms_per_class=" << list(h.atoms_per_class)
      << "\nsamples_per_class=" << list(h.samples_per_class) << "\n";
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint non-negative projection and dictionary learning"};
  app.require_subcommand(1, 1);

  struct Command {
    const char* name;
    const char* help;
    void (*run)(const ExperimentConfig&, std::ostream&, std::ostream&);
  };
  static const Command commands[] = {
      {"train", "learn a model from a labeled CSV",
       [](const ExperimentConfig& c, std::ostream& o, std::ostream& e) { run_train(c, o, e); }},
      {"eval", "classify labeled samples and report accuracy",
       [](const ExperimentConfig& c, std::ostream& o, std::ostream&) { run_eval(c, o); }},
      {"eval-set", "classify frame sets by majority vote",
       [](const ExperimentConfig& c, std::ostream& o, std::ostream&) { run_eval_set(c, o); }},
      {"code", "export coding coefficients of samples",
       [](const ExperimentConfig& c, std::ostream& o, std::ostream&) { run_code(c, o); }},
      {"synth", "write a synthetic labeled dataset",
       [](const ExperimentConfig& c, std::ostream& o, std::ostream&) { run_synth(c, o); }},
      {"inspect", "print the header of a model file",
       [](const ExperimentConfig& c, std::ostream& o, std::ostream&) { run_inspect(c, o); }},
  };

  std::string config_path;
  std::map<std::string, std::string> flags;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& command : commands) {
    CLI::App* sub = app.add_subcommand(command.name, command.help);
    sub->add_option("--config", config_path, "key=value config file; flags override its values");
    for (const auto& key : config_key_names()) sub->add_option("--" + key, flags[key], config_key_help(key));
    subs.emplace_back(sub, &command);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    for (const auto& [sub, command] : subs) {
      if (!sub->parsed()) continue;
      ExperimentConfig config;
      if (!config_path.empty()) load_config(config_path, config);
      for (const auto& key : config_key_names()) {
        if (sub->count("--" + key) > 0) apply_setting(config, key, flags[key]);
      }
      command->run(config, out, err);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace jnpdl
