#include "jnpdl/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unistd.h>

namespace jnpdl {

namespace {

constexpr char kMagic[] = "JNPDL1\n";
constexpr std::size_t kMagicSize = sizeof(kMagic) - 1;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

double parse_double(const std::string& text, const std::string& context) {
  double value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  require(ec == std::errc() && ptr == end && begin != end, context + "malformed number '" + text + "'");
  require(std::isfinite(value), context + "non-finite value '" + text + "'");
  return value;
}

long long parse_integer(const std::string& text, const std::string& context) {
  long long value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  require(ec == std::errc() && ptr == end && begin != end, context + "malformed integer '" + text + "'");
  return value;
}

bool skip_line(const std::string& line) {
  const std::string t = trim(line);
  return t.empty() || t.front() == '#';
}

/// Reads rows of `leading` integer fields followed by at least one float.
struct RawRows {
  std::vector<std::vector<long long>> keys;
  std::vector<std::vector<double>> values;
};

RawRows read_rows(std::istream& in, const std::string& source, std::size_t leading) {
  RawRows rows;
  std::string line;
  std::size_t number = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++number;
    if (skip_line(line)) continue;
    const auto fields = split_fields(line);
    const std::string ctx = where(source, number);
    require(fields.size() > leading, ctx + "expected at least " + std::to_string(leading + 1) + " fields");
    if (width == 0) width = fields.size();
    require(fields.size() == width, ctx + "expected " + std::to_string(width) + " fields, found " +
                                        std::to_string(fields.size()));
    std::vector<long long> key;
    for (std::size_t i = 0; i < leading; ++i) key.push_back(parse_integer(fields[i], ctx));
    std::vector<double> values;
    values.reserve(fields.size() - leading);
    for (std::size_t i = leading; i < fields.size(); ++i) values.push_back(parse_double(fields[i], ctx));
    rows.keys.push_back(std::move(key));
    rows.values.push_back(std::move(values));
  }
  require(!rows.values.empty(), source + ": no data rows");
  return rows;
}

std::ifstream open_input(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  require(in.good(), "cannot open '" + path + "'");
  return in;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
  }
}

class Reader {
public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    require(static_cast<std::size_t>(in_.gcount()) == n, source_ + ": truncated model file");
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
  }
  double f64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
  }
  Eigen::MatrixXd matrix(Index rows, Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) m(i, j) = f64();
    }
    require(m.allFinite(), source_ + ": non-finite value in model file");
    return m;
  }
  void expect_end() {
    require(in_.peek() == std::char_traits<char>::eof(), source_ + ": trailing bytes after model data");
  }
  const std::string& source() const { return source_; }

private:
  std::istream& in_;
  std::string source_;
};

ModelHeader read_header(Reader& r) {
  char magic[kMagicSize];
  r.bytes(magic, kMagicSize);
  require(std::memcmp(magic, kMagic, kMagicSize) == 0, r.source() + ": not a model file (bad magic)");
  ModelHeader h;
  h.s = r.u32();
  h.s_p = r.u32();
  h.q = r.u32();
  h.atoms = r.u32();
  h.classes = r.u32();
  h.samples = r.u32();
  require(h.s >= 1 && h.s_p >= 2 && h.q >= 1 && h.q < h.s_p && h.classes >= 1,
          r.source() + ": invalid model header");
  for (std::uint32_t c = 0; c < h.classes; ++c) h.atoms_per_class.push_back(r.u32());
  for (std::uint32_t c = 0; c < h.classes; ++c) h.samples_per_class.push_back(r.u32());
  std::uint64_t atoms = 0, samples = 0;
  for (auto a : h.atoms_per_class) atoms += a;
  for (auto n : h.samples_per_class) samples += n;
  require(atoms == h.atoms && samples == h.samples, r.source() + ": per-class counts disagree with totals");
  return h;
}

std::vector<Index> to_index(const std::vector<std::uint32_t>& v) { return {v.begin(), v.end()}; }

std::uint32_t checked_u32(Index v, const char* what) {
  require(v >= 0 && v <= Index(std::numeric_limits<std::uint32_t>::max()),
          std::string("model: ") + what + " does not fit the container header");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

CsvTable read_labeled_csv(std::istream& in, const std::string& source) {
  const RawRows rows = read_rows(in, source, 1);
  CsvTable t;
  const auto n = static_cast<Index>(rows.values.size());
  const auto s = static_cast<Index>(rows.values.front().size());
  t.features.resize(s, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < s; ++i) t.features(i, j) = rows.values[j][i];
    t.labels.push_back(rows.keys[j][0]);
  }
  return t;
}

CsvTable read_labeled_csv(const std::string& path) {
  auto in = open_input(path);
  return read_labeled_csv(in, path);
}

LabeledDataset<double> to_training_dataset(const CsvTable& table, std::vector<std::string>* warnings) {
  std::vector<long long> distinct(table.labels);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  require(distinct.front() >= 1, "dataset: labels must be positive integers");
  const bool contiguous = distinct.back() == static_cast<long long>(distinct.size());
  if (!contiguous && warnings) {
    warnings->push_back("dataset: labels are not 1.." + std::to_string(distinct.size()) +
                        "; relabeled in ascending order");
  }
  std::vector<Index> labels;
  labels.reserve(table.labels.size());
  for (long long l : table.labels) {
    labels.push_back(static_cast<Index>(std::lower_bound(distinct.begin(), distinct.end(), l) - distinct.begin()));
  }
  return make_dataset<double>(table.features, std::move(labels), static_cast<Index>(distinct.size()));
}

std::vector<Index> to_model_labels(const CsvTable& table, Index num_classes) {
  std::vector<Index> labels;
  labels.reserve(table.labels.size());
  for (long long l : table.labels) {
    require(l >= 1 && l <= num_classes, "dataset: label " + std::to_string(l) + " outside 1.." +
                                            std::to_string(num_classes) + " of the model");
    labels.push_back(static_cast<Index>(l - 1));
  }
  return labels;
}

LabeledDataset<double> load_dataset(const std::string& path, std::vector<std::string>* warnings) {
  return to_training_dataset(read_labeled_csv(path), warnings);
}

void save_dataset(const std::string& path, const LabeledDataset<double>& data) {
  std::string out;
  char buf[40];
  for (Index j = 0; j < data.size(); ++j) {
    out += std::to_string(data.labels[j] + 1);
    for (Index i = 0; i < data.dim(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%.17g", data.features(i, j));
      out += buf;
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

FrameSets read_frame_sets(std::istream& in, const std::string& source) {
  const RawRows rows = read_rows(in, source, 2);
  std::map<long long, std::size_t> slot;
  std::vector<std::vector<std::size_t>> members;
  FrameSets sets;
  for (std::size_t r = 0; r < rows.keys.size(); ++r) {
    const long long id = rows.keys[r][0];
    const long long label = rows.keys[r][1];
    auto [it, inserted] = slot.emplace(id, sets.set_ids.size());
    if (inserted) {
      sets.set_ids.push_back(id);
      sets.labels.push_back(label);
      members.emplace_back();
    }
    require(sets.labels[it->second] == label,
            source + ": set " + std::to_string(id) + " has frames with different labels");
    members[it->second].push_back(r);
  }
  const auto s = static_cast<Index>(rows.values.front().size());
  for (const auto& m : members) {
    Eigen::MatrixXd frames(s, static_cast<Index>(m.size()));
    for (std::size_t j = 0; j < m.size(); ++j) {
      for (Index i = 0; i < s; ++i) frames(i, static_cast<Index>(j)) = rows.values[m[j]][i];
    }
    sets.frames.push_back(std::move(frames));
  }
  return sets;
}

FrameSets read_frame_sets(const std::string& path) {
  auto in = open_input(path);
  return read_frame_sets(in, path);
}

void write_model(std::ostream& out, const TrainedModel<double>& model) {
  const auto& p = model.projection;
  const auto& d = model.dictionary;
  const auto& x = model.coding;
  const Index k = d.num_classes();
  require(x.num_classes() == k && model.class_means.cols() == k && model.class_means.rows() == d.num_atoms(),
          "model: inconsistent class layout");
  check_projection_model(p);
  out.write(kMagic, kMagicSize);
  put_u32(out, checked_u32(p.input_dim(), "s"));
  put_u32(out, checked_u32(p.output_dim(), "s_p"));
  put_u32(out, checked_u32(p.q, "q"));
  put_u32(out, checked_u32(d.num_atoms(), "atom count"));
  put_u32(out, checked_u32(k, "class count"));
  put_u32(out, checked_u32(x.coeffs.cols(), "sample count"));
  for (const auto& r : d.class_ranges) put_u32(out, checked_u32(r.size, "atom count"));
  for (const auto& r : x.sample_ranges) put_u32(out, checked_u32(r.size, "sample count"));
  put_matrix(out, p.P);
  put_matrix(out, p.M);
  put_matrix(out, d.atoms);
  put_matrix(out, x.coeffs);
  put_matrix(out, model.class_means.transpose());
}

ModelHeader read_model_header(std::istream& in, const std::string& source) {
  Reader r(in, source);
  return read_header(r);
}

TrainedModel<double> read_model(std::istream& in, const std::string& source) {
  Reader r(in, source);
  const ModelHeader h = read_header(r);
  TrainedModel<double> model;
  model.projection.q = h.q;
  model.projection.P = r.matrix(h.s_p, h.s);
  model.projection.M = r.matrix(h.s, h.s_p);
  model.dictionary.atoms = r.matrix(h.s_p, h.atoms);
  model.dictionary.class_ranges = ranges_from_counts(to_index(h.atoms_per_class));
  model.coding.coeffs = r.matrix(h.atoms, h.samples);
  model.coding.sample_ranges = ranges_from_counts(to_index(h.samples_per_class));
  model.coding.atom_ranges = model.dictionary.class_ranges;
  model.class_means = r.matrix(h.classes, h.atoms).transpose();
  r.expect_end();
  check_projection_model(model.projection);
  return model;
}

void save_model(const std::string& path, const TrainedModel<double>& model) {
  std::ostringstream out(std::ios::binary);
  write_model(out, model);
  write_file_atomic(path, out.str());
}

TrainedModel<double> load_model(const std::string& path) {
  auto in = open_input(path, std::ios::binary);
  return read_model(in, path);
}

ModelHeader load_model_header(const std::string& path) {
  auto in = open_input(path, std::ios::binary);
  return read_model_header(in, path);
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string trace_csv(const std::vector<ObjectiveTerms<double>>& trace) {
  std::string out = "iter,R,Gp,Gc,l1,total\n";
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto& e = trace[t];
    out += std::to_string(t);
    for (double v : {e.R, e.Gp, e.Gc, e.l1, e.total}) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

Metrics compute_metrics(const std::vector<Index>& truth, const std::vector<Index>& predicted, Index num_classes) {
  require(truth.size() == predicted.size(), "metrics: label vectors differ in length");
  require(!truth.empty(), "metrics: no samples");
  Metrics m;
  m.num_classes = num_classes;
  m.confusion.assign(static_cast<std::size_t>(num_classes), std::vector<Index>(static_cast<std::size_t>(num_classes), 0));
  Index correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] >= 0 && truth[i] < num_classes && predicted[i] >= 0 && predicted[i] < num_classes,
            "metrics: label out of range");
    ++m.confusion[truth[i]][predicted[i]];
    correct += truth[i] == predicted[i];
  }
  m.accuracy = double(correct) / double(truth.size());
  for (Index c = 0; c < num_classes; ++c) {
    Index total = 0;
    for (Index v : m.confusion[c]) total += v;
    m.per_class.push_back(total == 0 ? std::numeric_limits<double>::quiet_NaN()
                                     : double(m.confusion[c][c]) / double(total));
  }
  return m;
}

std::string metrics_json(const Metrics& metrics, const std::vector<std::pair<std::string, double>>& extra) {
  nlohmann::ordered_json j;
  j["accuracy"] = metrics.accuracy;
  j["per_class"] = nlohmann::ordered_json::array();
  for (double v : metrics.per_class) {
    if (std::isnan(v)) {
      j["per_class"].push_back(nullptr);
    } else {
      j["per_class"].push_back(v);
    }
  }
  j["confusion"] = metrics.confusion;
  for (const auto& [key, value] : extra) j[key] = value;
  return j.dump(2) + "\n";
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out.good()) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw ValidationError("write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ValidationError("cannot replace '" + path + "'");
  }
}

}  // namespace jnpdl
