#include "jnpdl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace jnpdl {

namespace {

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

struct KeySpec {
  std::string name;
  std::string help;
  Setter set;
};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  if constexpr (std::is_floating_point_v<T>) {
    if (begin != end && *begin == '+') ++begin;
  }
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  require(ec == std::errc() && ptr == end && begin != end, "config: bad value '" + text + "' for " + key);
  if constexpr (std::is_floating_point_v<T>) {
    require(std::isfinite(value), "config: non-finite value for " + key);
  }
  return value;
}

double non_negative(const std::string& key, const std::string& text) {
  const double v = parse_number<double>(key, text);
  require(v >= 0, "config: " + key + " must be non-negative");
  return v;
}

double positive(const std::string& key, const std::string& text) {
  const double v = parse_number<double>(key, text);
  require(v > 0, "config: " + key + " must be positive");
  return v;
}

Index count(const std::string& key, const std::string& text, Index minimum) {
  const auto v = parse_number<long long>(key, text);
  require(v >= minimum, "config: " + key + " must be at least " + std::to_string(minimum));
  return static_cast<Index>(v);
}

bool boolean(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ValidationError("config: " + key + " must be true or false");
}

std::vector<Index> index_list(const std::string& key, const std::string& text) {
  std::vector<Index> out;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(count(key, trim(item), 1));
  require(!out.empty(), "config: " + key + " needs at least one value");
  return out;
}

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"alpha1", "weight of the projection term",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.alpha1 = non_negative("alpha1", v); }},
      {"alpha2", "weight of the coefficient graph term",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.alpha2 = non_negative("alpha2", v); }},
      {"alpha3", "l1 weight on training coefficients",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.alpha3 = non_negative("alpha3", v); }},
      {"beta", "weight of the projection graph traces",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.beta = non_negative("beta", v); }},
      {"lambda1", "l1 weight for test-time coding",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.lambda1 = non_negative("lambda1", v); }},
      {"lambda2", "ridge weight (default 0.001*N/700)",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.lambda2 = non_negative("lambda2", v); }},
      {"sigma", "weight of the class-mean distance in sample scores",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.sigma = non_negative("sigma", v); }},
      {"eta", "ridge on training coefficients (default: smallest bounded value)",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.eta = non_negative("eta", v); }},
      {"k1", "intra-class neighbors", [](ExperimentConfig& c, const std::string& v) { c.hyper.k1 = count("k1", v, 1); }},
      {"k2", "inter-class neighbors of the coefficient graph",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.k2 = count("k2", v, 1); }},
      {"k_projection_penalty", "shortest inter-class pairs per class of the projection graph",
       [](ExperimentConfig& c, const std::string& v) {
         c.hyper.k_projection_penalty = count("k_projection_penalty", v, 1);
       }},
      {"s_p", "projected dimension (0: input dimension)",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.s_p = count("s_p", v, 0); }},
      {"q", "rows of the embedding part of P (0: s_p/2)",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.q = count("q", v, 0); }},
      {"T", "maximum outer iterations", [](ExperimentConfig& c, const std::string& v) { c.hyper.T = count("T", v, 1); }},
      {"tol", "relative change of the objective that stops training",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.tol = positive("tol", v); }},
      {"seed", "random seed",
       [](ExperimentConfig& c, const std::string& v) {
         c.hyper.seed = parse_number<std::uint64_t>("seed", v);
         c.synth.seed = c.hyper.seed;
       }},
      {"atoms_per_class", "atoms per class: one value for all classes or one per class",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.atoms_per_class = index_list("atoms_per_class", v); }},
      {"preliminary_iters", "iterations without the coefficient graph term before building it",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.preliminary_iters = count("preliminary_iters", v, 0); }},
      {"projection_steps", "P/M alternations per outer iteration",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.projection_steps = count("projection_steps", v, 1); }},
      {"coder_sweeps", "maximum coefficient sweeps per outer iteration",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.coder_sweeps = count("coder_sweeps", v, 1); }},
      {"coder_tol", "relative change that stops the coefficient sweeps",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.coder_tol = positive("coder_tol", v); }},
      {"learn_projection", "false keeps P and M at their initial values",
       [](ExperimentConfig& c, const std::string& v) { c.hyper.learn_projection = boolean("learn_projection", v); }},
      {"threads", "worker threads (1: sequential reference mode)",
       [](ExperimentConfig& c, const std::string& v) {
         c.hyper.threads = static_cast<unsigned>(count("threads", v, 1));
       }},
      {"set_mode", "frame classifier for sets and coefficient export: l1 or l2_fast",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "l1") {
           c.set_mode = SetMode::l1;
         } else if (v == "l2_fast") {
           c.set_mode = SetMode::l2_fast;
         } else {
           throw ValidationError("config: set_mode must be l1 or l2_fast");
         }
       }},
      {"train", "training dataset CSV", [](ExperimentConfig& c, const std::string& v) { c.train_path = v; }},
      {"test", "test dataset CSV", [](ExperimentConfig& c, const std::string& v) { c.test_path = v; }},
      {"sets", "frame-set CSV (set_id,label,features)",
       [](ExperimentConfig& c, const std::string& v) { c.sets_path = v; }},
      {"input", "samples to code (CSV)", [](ExperimentConfig& c, const std::string& v) { c.input_path = v; }},
      {"model", "model container path", [](ExperimentConfig& c, const std::string& v) { c.model_path = v; }},
      {"trace", "objective trace CSV output", [](ExperimentConfig& c, const std::string& v) { c.trace_path = v; }},
      {"metrics", "metrics JSON output", [](ExperimentConfig& c, const std::string& v) { c.metrics_path = v; }},
      {"output", "output file", [](ExperimentConfig& c, const std::string& v) { c.output_path = v; }},
      {"classes", "synthetic: number of classes",
       [](ExperimentConfig& c, const std::string& v) { c.synth.classes = count("classes", v, 1); }},
      {"per_class", "synthetic: samples per class",
       [](ExperimentConfig& c, const std::string& v) { c.synth.per_class = count("per_class", v, 1); }},
      {"dim", "synthetic: feature dimension",
       [](ExperimentConfig& c, const std::string& v) { c.synth.dim = count("dim", v, 1); }},
      {"separation", "synthetic: norm of the class means",
       [](ExperimentConfig& c, const std::string& v) { c.synth.separation = non_negative("separation", v); }},
      {"split", "synthetic: sample stream; same seed, different split gives a fresh draw of the same classes",
       [](ExperimentConfig& c, const std::string& v) { c.synth.split = parse_number<std::uint64_t>("split", v); }},
      {"correlation", "synthetic: shared noise correlation in [0, 1)",
       [](ExperimentConfig& c, const std::string& v) {
         c.synth.correlation = non_negative("correlation", v);
         require(c.synth.correlation < 1, "config: correlation must be below 1");
       }},
  };
  return table;
}

const KeySpec& find_key(const std::string& key) {
  for (const auto& k : key_table()) {
    if (k.name == key) return k;
  }
  throw ValidationError("config: unknown key '" + key + "'");
}

}  // namespace

ClassifierParams ExperimentConfig::classifier(Index training_samples) const {
  ClassifierParams p;
  p.sigma = hyper.sigma;
  p.lambda1 = hyper.lambda1;
  p.lambda2 = hyper.lambda2.value_or(0.001 * double(training_samples) / 700.0);
  p.set_mode = set_mode;
  p.threads = hyper.threads;
  return p;
}

const std::vector<std::string>& config_key_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.push_back(k.name);
    return out;
  }();
  return names;
}

const std::string& config_key_help(const std::string& key) { return find_key(key).help; }

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  find_key(key).set(config, trim(value));
}

std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const std::string ctx = source + ":" + std::to_string(number) + ": ";
    const auto eq = t.find('=');
    require(eq != std::string::npos, ctx + "expected key=value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    require(!key.empty(), ctx + "empty key");
    try {
      find_key(key);
    } catch (const ValidationError& e) {
      throw ValidationError(ctx + e.what());
    }
    require(seen.insert(key).second, ctx + "key '" + key + "' given twice");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

void load_config(const std::string& path, ExperimentConfig& config) {
  std::ifstream in(path);
  require(in.good(), "cannot open config '" + path + "'");
  for (const auto& [key, value] : parse_config(in, path)) {
    try {
      apply_setting(config, key, value);
    } catch (const ValidationError& e) {
      throw ValidationError(path + ": " + e.what());
    }
  }
}

}  // namespace jnpdl
