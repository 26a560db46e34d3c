#pragma once

#include "jnpdl/dataset.hpp"
#include "jnpdl/trainer.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace jnpdl {

/// Rows of a labeled CSV file exactly as written (labels as in the file).
struct CsvTable {
  Eigen::MatrixXd features;  ///< one sample per column
  std::vector<long long> labels;
};

/// Parses "label,f1,...,fs" rows. Blank lines and lines starting with '#' are skipped.
CsvTable read_labeled_csv(std::istream& in, const std::string& source);
CsvTable read_labeled_csv(const std::string& path);

/// Dataset for training. Labels must be positive; if they are not exactly
/// 1..K they are relabeled in ascending order and a warning is appended.
LabeledDataset<double> to_training_dataset(const CsvTable& table, std::vector<std::string>* warnings = nullptr);

/// Test samples for a model with `num_classes` classes; labels must lie in 1..K.
/// Returns zero-based labels. Classes may be absent.
std::vector<Index> to_model_labels(const CsvTable& table, Index num_classes);

LabeledDataset<double> load_dataset(const std::string& path, std::vector<std::string>* warnings = nullptr);

/// Writes labels one-based, features with 17 significant digits.
void save_dataset(const std::string& path, const LabeledDataset<double>& data);

/// Frames grouped into sets: rows "set_id,label,f1,...,fs".
struct FrameSets {
  std::vector<long long> set_ids;      ///< in order of first appearance
  std::vector<long long> labels;       ///< per set, as in the file
  std::vector<Eigen::MatrixXd> frames; ///< per set, one frame per column
};

FrameSets read_frame_sets(std::istream& in, const std::string& source);
FrameSets read_frame_sets(const std::string& path);

/// Fixed-size part of the model container.
struct ModelHeader {
  std::uint32_t s = 0;
  std::uint32_t s_p = 0;
  std::uint32_t q = 0;
  std::uint32_t atoms = 0;
  std::uint32_t classes = 0;
  std::uint32_t samples = 0;
  std::vector<std::uint32_t> atoms_per_class;
  std::vector<std::uint32_t> samples_per_class;
};

/// Binary model container: magic "JNPDL1\n", little-endian uint32 header,
/// then little-endian float64 row-major P, M, D, X and the class means (K x A).
void write_model(std::ostream& out, const TrainedModel<double>& model);
TrainedModel<double> read_model(std::istream& in, const std::string& source);
ModelHeader read_model_header(std::istream& in, const std::string& source);

void save_model(const std::string& path, const TrainedModel<double>& model);
TrainedModel<double> load_model(const std::string& path);
ModelHeader load_model_header(const std::string& path);

/// Objective trace as CSV with header iter,R,Gp,Gc,l1,total.
std::string trace_csv(const std::vector<ObjectiveTerms<double>>& trace);

/// Accuracy summary over zero-based true and predicted labels.
struct Metrics {
  Index num_classes = 0;
  std::vector<std::vector<Index>> confusion;  ///< [true][predicted]
  double accuracy = 0;
  std::vector<double> per_class;  ///< NaN for classes without test samples
};

Metrics compute_metrics(const std::vector<Index>& truth, const std::vector<Index>& predicted, Index num_classes);

/// JSON object with keys "accuracy", "per_class" (null for empty classes) and
/// "confusion", plus any extra numeric fields given.
std::string metrics_json(const Metrics& metrics, const std::vector<std::pair<std::string, double>>& extra = {});

/// 17 significant digits; reads back to the same double.
std::string format_double(double value);

/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace jnpdl
