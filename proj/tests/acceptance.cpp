// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "jnpdl/classify.hpp"
#include "jnpdl/cli.hpp"
#include "jnpdl/io.hpp"
#include "jnpdl/synthetic.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace jnpdl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<Index> random_labels(std::mt19937_64& rng, Index n, Index classes) {
  std::vector<Index> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[i] = i % classes;
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

Outcome laplacian_suite() {
  Outcome o;
  std::mt19937_64 rng(1);
  double worst_row = 0, worst_eig = 0, worst_identity = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 4 + trial % 17;
    const Index classes = 2 + trial % 3;
    const Eigen::MatrixXd f = oracle::random_matrix(1 + trial % 6, n, rng);
    const auto labels = random_labels(rng, n, classes);
    GraphParams p;
    p.k_intrinsic = 1 + trial % 4;
    p.k_penalty = 1 + trial % 7;
    p.metric = trial % 2 ? Metric::correlation : Metric::euclidean;
    p.penalty_selection = trial % 3 ? PenaltySelection::per_sample : PenaltySelection::per_class_pairs;
    const auto g = trial % 2 ? build_intrinsic_graph(f, labels, p) : build_penalty_graph(f, labels, p);
    worst_row = std::max(worst_row, g.laplacian.rowwise().sum().cwiseAbs().maxCoeff());
    worst_eig = std::min(worst_eig, oracle::min_eigenvalue(g.laplacian));
    const Eigen::MatrixXd z = oracle::random_matrix(3, n, rng);
    const double spread = oracle::pair_spread(z, g.similarity);
    const double trace = 2 * laplacian_trace<double>(z, g.laplacian);
    worst_identity = std::max(worst_identity, std::abs(spread - trace) / std::max(1.0, std::abs(spread)));
  }
  o.check(worst_row <= 1e-10, "row sum " + fmt("%.3g", worst_row));
  o.check(worst_eig >= -1e-10, "min eigenvalue " + fmt("%.3g", worst_eig));
  o.check(worst_identity <= 1e-8, "quadratic form " + fmt("%.3g", worst_identity));
  o.detail = o.pass ? "200 graphs, max |row sum| " + fmt("%.2g", worst_row) + ", min eig " + fmt("%.2g", worst_eig) +
                          ", max rel identity error " + fmt("%.2g", worst_identity)
                    : o.detail;
  return o;
}

Outcome lasso_oracle() {
  Outcome o;
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<Index> atoms(1, 6), dims(1, 5);
  std::uniform_real_distribution<double> lam(0.01, 0.5);
  double worst_gap = 0, worst_kkt = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index a = atoms(rng), s = dims(rng);
    const Eigen::MatrixXd d = oracle::unit_columns(oracle::random_matrix(s, a, rng));
    const Eigen::VectorXd z = oracle::random_matrix(s, 1, rng);
    const double lambda = lam(rng);
    const Eigen::VectorXd x = code_l1<double>(z, Dictionary<double>{d, ranges_from_counts({a})}, lambda);
    const Eigen::VectorXd ref = oracle::lasso_by_sign_patterns(2 * d.transpose() * d, 2 * d.transpose() * z, lambda);
    auto value = [&](const Eigen::VectorXd& v) { return (z - d * v).squaredNorm() + lambda * v.lpNorm<1>(); };
    worst_gap = std::max(worst_gap, std::abs(value(x) - value(ref)));
    worst_kkt = std::max(worst_kkt, fixture::lasso_kkt(d, z, lambda, x));
  }
  o.check(worst_gap <= 1e-6, "objective gap " + fmt("%.3g", worst_gap));
  o.check(worst_kkt <= 1e-6, "KKT residual " + fmt("%.3g", worst_kkt));
  if (o.pass) o.detail = "100 instances, max objective gap " + fmt("%.2g", worst_gap) + ", max KKT " + fmt("%.2g", worst_kkt);
  return o;
}

Outcome ridge_oracle() {
  Outcome o;
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Index> atoms(1, 12), dims(1, 10);
  std::uniform_real_distribution<double> lam(1e-3, 1.0);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index a = atoms(rng), s = dims(rng);
    const Eigen::MatrixXd d = oracle::unit_columns(oracle::random_matrix(s, a, rng));
    const Eigen::VectorXd z = oracle::random_matrix(s, 1, rng);
    const double lambda = lam(rng);
    const Eigen::VectorXd x = code_l2<double>(z, Dictionary<double>{d, ranges_from_counts({a})}, lambda);
    const Eigen::VectorXd ref = oracle::ridge_dense(d, z, lambda);
    worst = std::max(worst, (x - ref).cwiseAbs().maxCoeff());
  }
  o.check(worst <= 1e-10, "max deviation " + fmt("%.3g", worst));
  if (o.pass) o.detail = "100 instances, max deviation " + fmt("%.2g", worst);
  return o;
}

Outcome descent_suite() {
  Outcome o;
  ProjectionParams pp;
  double worst_p = -1e300, worst_d = -1e300, worst_x = -1e300;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto in = fixture::make_instance(seed, 6, 4, 2, {5, 4, 3}, {2, 2, 1});
    in.projection.M = oracle::unit_columns(in.projection.M);
    const auto rp = update_projection(in.projection, in.samples, in.dict, in.coding, in.graphs, pp);
    worst_p = std::max(worst_p, rp.objective_pre_renormalization - rp.objective_before);

    const Eigen::MatrixXd z = in.projection.P * in.samples;
    const auto rd = update_dictionary(in.dict, z, in.coding);
    worst_d = std::max(worst_d, rd.objective_after - rd.objective_before);

    CoderParams cp;
    cp.eta = double(minimal_coefficient_ridge(in.graphs.laplacians(), cp.alpha2));
    cp.max_iters = 5;
    const auto rx = update_training_coeffs(z, in.dict, in.graphs.laplacians(), in.coding, cp);
    const double after = coefficient_objective(z, in.dict, in.graphs.laplacians(), rx.coding, cp.alpha2, cp.alpha3, cp.eta);
    const double before =
        coefficient_objective(z, in.dict, in.graphs.laplacians(), in.coding, cp.alpha2, cp.alpha3, cp.eta);
    worst_x = std::max(worst_x, after - before);
  }
  o.check(worst_p <= 1e-10, "projection rose by " + fmt("%.3g", worst_p));
  o.check(worst_d <= 1e-10, "dictionary rose by " + fmt("%.3g", worst_d));
  o.check(worst_x <= 1e-10, "coefficients rose by " + fmt("%.3g", worst_x));

  double worst_rel = -1e300;
  Index shortest = 1000;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Hyperparams h;
    h.seed = seed;
    h.T = 30;
    h.tol = 1e-300;
    h.lambda1 = 0.05;
    const auto model = train(fixture::blobs(100 + seed, 2, 5, 6, 0.5), h);
    shortest = std::min<Index>(shortest, static_cast<Index>(model.objective_trace.size()) - 1);
    for (std::size_t t = 1; t < model.objective_trace.size(); ++t) {
      const double prev = model.objective_trace[t - 1].total;
      worst_rel = std::max(worst_rel, (model.objective_trace[t].total - prev) / std::abs(prev));
    }
  }
  o.check(worst_rel <= 1e-8, "train objective rose by " + fmt("%.3g", worst_rel) + " relative");
  if (o.pass) {
    o.detail = "worst change: P " + fmt("%.2g", worst_p) + ", D " + fmt("%.2g", worst_d) + ", X " +
               fmt("%.2g", worst_x) + "; train (20 seeds, >= " + std::to_string(shortest) + " iterations) " +
               fmt("%.2g", worst_rel) + " relative";
  }
  return o;
}

Outcome nonnegativity() {
  Outcome o;
  double min_p = 1e300, min_m = 1e300, m_norm = 0, d_norm = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto in = fixture::make_instance(seed, 6, 4, 2, {5, 5}, {2, 2});
    in.projection.M = oracle::unit_columns(in.projection.M);
    ProjectionModel<double> model = in.projection;
    Dictionary<double> dict = in.dict;
    for (int it = 0; it < 40; ++it) {
      model = update_projection(model, in.samples, dict, in.coding, in.graphs, ProjectionParams{}).model;
      dict = update_dictionary(dict, Eigen::MatrixXd(model.P * in.samples), in.coding).dictionary;
      min_p = std::min(min_p, model.P.minCoeff());
      min_m = std::min(min_m, model.M.minCoeff());
      m_norm = std::max(m_norm, (model.M.colwise().norm().array() - 1).abs().maxCoeff());
      d_norm = std::max(d_norm, (dict.atoms.colwise().norm().array() - 1).abs().maxCoeff());
    }
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Hyperparams h;
    h.seed = seed;
    h.T = 15;
    const auto model = train(fixture::blobs(200 + seed, 3, 6, 8), h);
    min_p = std::min(min_p, model.projection.P.minCoeff());
    min_m = std::min(min_m, model.projection.M.minCoeff());
    m_norm = std::max(m_norm, (model.projection.M.colwise().norm().array() - 1).abs().maxCoeff());
    d_norm = std::max(d_norm, (model.dictionary.atoms.colwise().norm().array() - 1).abs().maxCoeff());
  }
  o.check(min_p >= 0, "min P entry " + fmt("%.3g", min_p));
  o.check(min_m >= 0, "min M entry " + fmt("%.3g", min_m));
  o.check(m_norm <= 1e-10, "M column norm error " + fmt("%.3g", m_norm));
  o.check(d_norm <= 1e-10, "atom norm error " + fmt("%.3g", d_norm));
  if (o.pass) {
    o.detail = "min P " + fmt("%.3g", min_p) + ", min M " + fmt("%.3g", min_m) + ", norm errors M " +
               fmt("%.2g", m_norm) + ", D " + fmt("%.2g", d_norm);
  }
  return o;
}

Outcome gradient_checks() {
  Outcome o;
  double worst_p = 0, worst_m = 0, worst_d = 0, worst_x = 0;
  ProjectionParams pp;
  pp.alpha1 = 1.0;
  pp.beta = 0.7;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = fixture::make_instance(1000 + seed, 5, 4, 2, {3, 3}, {2, 2});
    const auto& p = in.projection.P;
    const auto& m = in.projection.M;
    const Index q = in.projection.q;
    const ProjectionProblem<double> problem(in.samples, in.dict, in.coding, in.graphs, pp);
    const auto [p_pos, p_neg] = problem.p_gradient_parts(p, m, q);
    const auto [m_pos, m_neg] = problem.m_gradient_parts(p, m);
    worst_p = std::max(worst_p, oracle::relative_error(2 * (p_pos - p_neg), oracle::numeric_gradient(
        [&](const Eigen::MatrixXd& v) { return fixture::projection_objective_oracle(in, v, m, q, 1.0, 0.7); }, p)));
    worst_m = std::max(worst_m, oracle::relative_error(2 * (m_pos - m_neg), oracle::numeric_gradient(
        [&](const Eigen::MatrixXd& v) { return fixture::projection_objective_oracle(in, p, v, q, 1.0, 0.7); }, m)));

    const Eigen::MatrixXd z = p * in.samples;
    const auto labels = in.labels;
    const auto atom_class = in.atom_class();
    worst_d = std::max(worst_d, oracle::relative_error(dictionary_gradient(in.dict, z, in.coding), oracle::numeric_gradient(
        [&](const Eigen::MatrixXd& d) { return oracle::reconstruction(z, d, in.coding.coeffs, labels, atom_class); },
        in.dict.atoms)));

    const auto graphs = in.graphs.laplacians();
    const double eta = 0.4;
    worst_x = std::max(worst_x, oracle::relative_error(coefficient_gradient(z, in.dict, graphs, in.coding, 1.0, eta),
        oracle::numeric_gradient(
            [&](const Eigen::MatrixXd& x) { return fixture::coefficient_smooth_oracle(in, z, x, graphs, 1.0, eta); },
            in.coding.coeffs)));
  }
  o.check(worst_p <= 1e-4, "P gradient error " + fmt("%.3g", worst_p));
  o.check(worst_m <= 1e-4, "M gradient error " + fmt("%.3g", worst_m));
  o.check(worst_d <= 1e-4, "D gradient error " + fmt("%.3g", worst_d));
  o.check(worst_x <= 1e-4, "X gradient error " + fmt("%.3g", worst_x));
  if (o.pass) {
    o.detail = "20 points each, max relative error P " + fmt("%.2g", worst_p) + ", M " + fmt("%.2g", worst_m) +
               ", D " + fmt("%.2g", worst_d) + ", X " + fmt("%.2g", worst_x);
  }
  return o;
}

std::pair<LabeledDataset<double>, LabeledDataset<double>> synthetic_pair(SyntheticSpec spec, Index test_per_class) {
  const auto train_set = generate_synthetic(spec);
  spec.split = 1;
  spec.per_class = test_per_class;
  return {train_set, generate_synthetic(spec)};
}

double sample_accuracy(const TrainedModel<double>& model, const LabeledDataset<double>& test, double lambda1) {
  ClassifierParams cp;
  cp.lambda1 = lambda1;
  cp.lambda2 = *model.hyperparams.lambda2;
  const Classifier<double> classifier(model, cp);
  Index correct = 0;
  for (Index j = 0; j < test.size(); ++j) correct += classifier.classify_sample(test.features.col(j)).label == test.labels[j];
  return double(correct) / double(test.size());
}

constexpr double kSyntheticLambda1 = 0.05;

Outcome separable_end_to_end() {
  Outcome o;
  SyntheticSpec spec;
  spec.classes = 3;
  spec.dim = 20;
  spec.per_class = 30;
  spec.separation = 10;
  spec.seed = 7;
  const auto [train_set, test_set] = synthetic_pair(spec, 30);
  Hyperparams h;
  h.T = 30;
  h.lambda1 = kSyntheticLambda1;
  const auto model = train(train_set, h);
  const double acc = sample_accuracy(model, test_set, kSyntheticLambda1);
  o.check(acc >= 0.95, "test accuracy " + fmt("%.4f", acc));
  if (o.pass) o.detail = "test accuracy " + fmt("%.4f", acc) + " on 90 held-out samples";
  return o;
}

Outcome joint_vs_fixed() {
  Outcome o;
  double sum = 0, learned_sum = 0, frozen_sum = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSpec spec;
    spec.classes = 3;
    spec.dim = 20;
    spec.per_class = 20;
    spec.separation = 2;
    spec.correlation = 0.6;
    spec.seed = seed;
    const auto [train_set, test_set] = synthetic_pair(spec, 20);
    Hyperparams h;
    h.seed = seed;
    h.T = 30;
    h.lambda1 = kSyntheticLambda1;
    const double learned = sample_accuracy(train(train_set, h), test_set, kSyntheticLambda1);
    h.learn_projection = false;
    const double frozen = sample_accuracy(train(train_set, h), test_set, kSyntheticLambda1);
    sum += learned - frozen;
    learned_sum += learned;
    frozen_sum += frozen;
  }
  o.check(sum / 10 >= 0, "mean difference " + fmt("%.4f", sum / 10));
  o.detail = "mean accuracy learned " + fmt("%.4f", learned_sum / 10) + ", frozen " + fmt("%.4f", frozen_sum / 10) +
             ", mean difference " + fmt("%+.4f", sum / 10);
  return o;
}

Outcome set_voting() {
  Outcome o;
  SyntheticSpec spec;
  spec.classes = 3;
  spec.dim = 20;
  spec.per_class = 30;
  spec.separation = 10;
  spec.seed = 9;
  const auto [train_set, frames] = synthetic_pair(spec, 150);
  Hyperparams h;
  h.T = 30;
  h.lambda1 = kSyntheticLambda1;
  const auto model = train(train_set, h);
  double set_acc = 0, frame_acc = 0;
  Index sets = 0;
  for (SetMode mode : {SetMode::l2_fast, SetMode::l1}) {
    ClassifierParams cp;
    cp.lambda1 = kSyntheticLambda1;
    cp.lambda2 = *model.hyperparams.lambda2;
    cp.set_mode = mode;
    const Classifier<double> classifier(model, cp);
    Index set_correct = 0, frame_correct = 0, mode_sets = 0, mode_frames = 0;
    for (Index c = 0; c < 3; ++c)
      for (Index start = 0; start < 150; start += 50) {
        const Eigen::MatrixXd set = frames.features.middleCols(c * 150 + start, 50);
        const auto r = classifier.classify_set(set);
        std::vector<Index> counts(3, 0);
        for (Index j = 0; j < 50; ++j) {
          const Index l = mode == SetMode::l1 ? classifier.classify_sample(set.col(j)).label
                                              : classifier.classify_frame_fast(set.col(j)).label;
          ++counts[l];
          frame_correct += l == c;
        }
        const Index modal = static_cast<Index>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        o.check(r.label == modal, "set label differs from the modal frame label");
        set_correct += r.label == c;
        ++mode_sets;
        mode_frames += 50;
      }
    const double sa = double(set_correct) / double(mode_sets), fa = double(frame_correct) / double(mode_frames);
    o.check(sa >= fa, "set accuracy " + fmt("%.4f", sa) + " below frame accuracy " + fmt("%.4f", fa));
    set_acc += sa / 2;
    frame_acc += fa / 2;
    sets += mode_sets;
  }
  if (o.pass) {
    o.detail = std::to_string(sets) + " sets of 50 frames (l2_fast and l1), mean set accuracy " + fmt("%.4f", set_acc) +
               ", frame accuracy " + fmt("%.4f", frame_acc);
  }
  return o;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "jnpdl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome reproducibility() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / ("jnpdl_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto at = [&](const std::string& name) { return (dir / name).string(); };
  std::ofstream(at("run.cfg")) << "seed = 3\nT = 20\nlambda1 = 0.05\nthreads = 1\n";
  o.check(cli({"synth", "--output", at("train.csv"), "--seed", "3", "--per_class", "20"}) == 0, "synth failed");
  o.check(cli({"synth", "--output", at("test.csv"), "--seed", "3", "--split", "1", "--per_class", "20"}) == 0,
          "synth failed");
  for (const char* run : {"a", "b"}) {
    const std::string r = run;
    o.check(cli({"train", "--config", at("run.cfg"), "--train", at("train.csv"), "--model", at("model_" + r + ".bin")}) ==
                0,
            "train failed");
    o.check(cli({"eval", "--config", at("run.cfg"), "--model", at("model_" + r + ".bin"), "--test", at("test.csv"),
                 "--metrics", at("metrics_" + r + ".json")}) == 0,
            "eval failed");
  }
  const std::string model_a = slurp(at("model_a.bin")), metrics_a = slurp(at("metrics_a.json"));
  o.check(!model_a.empty() && model_a == slurp(at("model_b.bin")), "model containers differ");
  o.check(!metrics_a.empty() && metrics_a == slurp(at("metrics_b.json")), "metrics differ");
  if (o.pass) {
    o.detail = "model " + std::to_string(model_a.size()) + " bytes and metrics " + std::to_string(metrics_a.size()) +
               " bytes identical";
  }
  fs::remove_all(dir);
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double time_limit;  ///< seconds, 0 for none
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "laplacian suite", 5, laplacian_suite},
      {2, "lasso oracle", 10, lasso_oracle},
      {3, "ridge oracle", 0, ridge_oracle},
      {4, "descent suite", 120, descent_suite},
      {5, "non-negativity and unit norms", 0, nonnegativity},
      {6, "gradient checks", 0, gradient_checks},
      {7, "separable synthetic end to end", 60, separable_end_to_end},
      {8, "joint vs fixed projection", 0, joint_vs_fixed},
      {9, "image-set voting", 0, set_voting},
      {10, "reproducibility", 0, reproducibility},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double elapsed = seconds_since(start);
    if (c.time_limit > 0 && elapsed >= c.time_limit) {
      o.check(false, "runtime " + fmt("%.2f", elapsed) + " s over the " + fmt("%.0f", c.time_limit) + " s limit");
    }
    std::printf("%s %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), elapsed);
    std::fflush(stdout);
    failures += !o.pass;
  }
  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
