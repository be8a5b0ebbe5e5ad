#include "fedlwf/data_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fedlwf/errors.hpp"
#include "fedlwf/random.hpp"

namespace fedlwf {

const std::vector<std::string>& humaid_label_names() {
  static const std::vector<std::string> names = {
      "caution_and_advice",
      "displaced_people_and_evacuations",
      "infrastructure_and_utility_damage",
      "injured_or_dead_people",
      "missing_or_found_people",
      "not_humanitarian",
      "other_relevant_information",
      "requests_or_urgent_needs",
      "rescue_volunteering_or_donation_effort",
      "sympathy_and_support",
  };
  return names;
}

Dataset::Dataset(Matrix features, std::vector<int> labels, std::size_t n_classes,
                 std::vector<std::string> label_names)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      n_classes_(n_classes),
      label_names_(std::move(label_names)) {
  if (n_classes_ < 1) throw DataError("dataset needs at least one class");
  if (labels_.empty()) throw DataError("dataset is empty");
  if (features_.rows() != labels_.size()) {
    throw DataError("dataset has " + std::to_string(features_.rows()) + " feature rows but " +
                    std::to_string(labels_.size()) + " labels");
  }
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    if (labels_[r] < 0 || static_cast<std::size_t>(labels_[r]) >= n_classes_) {
      throw DataError("row " + std::to_string(r) + ": label " + std::to_string(labels_[r]) +
                      " outside [0, " + std::to_string(n_classes_) + ")");
    }
  }
  if (!features_.all_finite()) throw DataError("dataset contains non-finite features");
  if (label_names_.empty()) {
    if (n_classes_ == humaid_label_names().size()) {
      label_names_ = humaid_label_names();
    } else {
      for (std::size_t c = 0; c < n_classes_; ++c) label_names_.push_back("class_" + std::to_string(c));
    }
  } else if (label_names_.size() != n_classes_) {
    throw DataError("expected " + std::to_string(n_classes_) + " label names, got " +
                    std::to_string(label_names_.size()));
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw DataError("subset index " + std::to_string(i) + " out of range");
    labels.push_back(labels_[i]);
  }
  return Dataset(gather_rows(features_, indices), std::move(labels), n_classes_, label_names_);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_full(std::string_view text, T& value) {
  text = trim(text);
  if (text.empty()) return false;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc{} && ptr == end;
}

std::string where(std::string_view source, std::size_t line_no) {
  return std::string(source) + ":" + std::to_string(line_no);
}

}  // namespace

Dataset parse_embedding_csv(std::istream& in, std::string_view source) {
  std::size_t n_classes = 10;
  std::size_t dim = 0;
  bool have_header = false;
  std::vector<double> values;
  std::vector<int> labels;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    if (!have_header) {
      if (line.front() == '#') {
        std::string_view body = trim(std::string_view(line).substr(1));
        constexpr std::string_view key = "n_classes=";
        if (body.starts_with(key)) {
          std::size_t k = 0;
          if (!parse_full(body.substr(key.size()), k) || k < 1) {
            throw FormatError(where(source, line_no) + ": invalid n_classes comment");
          }
          n_classes = k;
        }
        continue;
      }
      const auto fields = split_fields(line);
      bool ok = fields.size() >= 2 && trim(fields[0]) == "label";
      for (std::size_t c = 1; ok && c < fields.size(); ++c) {
        ok = trim(fields[c]) == "e" + std::to_string(c - 1);
      }
      if (!ok) throw FormatError(where(source, line_no) + ": malformed header, expected label,e0,e1,...");
      dim = fields.size() - 1;
      have_header = true;
      continue;
    }

    const std::size_t row = labels.size();
    const auto fields = split_fields(line);
    if (fields.size() != dim + 1) {
      throw FormatError(where(source, line_no) + ": row " + std::to_string(row) + " has " +
                        std::to_string(fields.size() - 1) + " values, header declares " +
                        std::to_string(dim));
    }
    int label = 0;
    if (!parse_full(fields[0], label)) {
      throw DataError(where(source, line_no) + ": row " + std::to_string(row) +
                      ", col 0: label is not an integer");
    }
    if (label < 0 || static_cast<std::size_t>(label) >= n_classes) {
      throw DataError(where(source, line_no) + ": row " + std::to_string(row) + ", col 0: label " +
                      std::to_string(label) + " outside [0, " + std::to_string(n_classes) + ")");
    }
    labels.push_back(label);
    for (std::size_t c = 1; c <= dim; ++c) {
      double v = 0.0;
      if (!parse_full(fields[c], v) || !std::isfinite(v)) {
        throw DataError(where(source, line_no) + ": row " + std::to_string(row) + ", col " +
                        std::to_string(c) + ": not a finite number");
      }
      values.push_back(v);
    }
  }
  if (!have_header) throw FormatError(std::string(source) + ": missing header line");
  if (labels.empty()) throw DataError(std::string(source) + ": no data rows");
  const std::size_t n = labels.size();
  return Dataset(Matrix(n, dim, std::move(values)), std::move(labels), n_classes);
}

Dataset load_embedding_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_embedding_csv(in, path.string());
}

void write_embedding_csv(const Dataset& data, std::ostream& out) {
  out << "# n_classes=" << data.n_classes() << '\n';
  out << "label";
  for (std::size_t c = 0; c < data.dim(); ++c) out << ",e" << c;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < data.size(); ++r) {
    out << data.labels()[r];
    for (double v : data.features().row(r)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

void write_embedding_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_embedding_csv(data, out);
  if (!out) throw IoError("write failed for " + path.string());
}

Matrix synth_centers(const SynthSpec& spec) {
  Matrix centers(spec.n_classes, spec.dim);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    Rng rng(mix_seed(spec.center_seed, c));
    auto row = centers.row(c);
    double norm2 = 0.0;
    for (double& x : row) {
      x = standard_normal(rng);
      norm2 += x * x;
    }
    const double scale = spec.center_scale / std::sqrt(norm2);
    for (double& x : row) x *= scale;
  }
  return centers;
}

Dataset synth_gaussian(const SynthSpec& spec) {
  if (spec.n_per_class < 1 || spec.n_classes < 1 || spec.dim < 1) {
    throw ConfigError("synth_gaussian: n_per_class, n_classes and dim must be >= 1");
  }
  if (!(spec.noise_sigma >= 0.0)) throw ConfigError("synth_gaussian: noise_sigma must be >= 0");

  const Matrix centers = synth_centers(spec);
  const std::size_t n = spec.n_per_class * spec.n_classes;
  Matrix features(n, spec.dim);
  std::vector<int> labels(n);
  Rng rng(spec.sample_seed);
  std::size_t r = 0;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    const auto center = centers.row(c);
    for (std::size_t i = 0; i < spec.n_per_class; ++i, ++r) {
      labels[r] = static_cast<int>(c);
      auto row = features.row(r);
      for (std::size_t d = 0; d < spec.dim; ++d) {
        row[d] = center[d] + spec.noise_sigma * standard_normal(rng);
      }
    }
  }
  return Dataset(std::move(features), std::move(labels), spec.n_classes);
}

EventSplits split_dataset(const Dataset& data, SplitFractions f, std::uint64_t seed,
                          std::string name) {
  if (!(f.train > 0.0 && f.valid > 0.0 && f.test > 0.0)) {
    throw ConfigError("split fractions must all be positive");
  }
  if (std::abs(f.train + f.valid + f.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  const std::size_t n = data.size();
  // The epsilon keeps e.g. 0.29 * 100 from flooring to 28.
  const auto floor_count = [n](double frac) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_valid = floor_count(f.valid);
  const std::size_t n_test = floor_count(f.test);
  if (n_valid == 0 || n_test == 0 || n_valid + n_test >= n) {
    throw ConfigError("split of " + std::to_string(n) + " rows leaves an empty split (valid=" +
                      std::to_string(n_valid) + ", test=" + std::to_string(n_test) + ")");
  }
  const std::size_t n_train = n - n_valid - n_test;

  const auto perm = permutation(n, seed);
  const std::span<const std::size_t> all(perm);
  EventSplits out;
  out.name = std::move(name);
  out.train = data.subset(all.subspan(0, n_train));
  out.valid = data.subset(all.subspan(n_train, n_valid));
  out.test = data.subset(all.subspan(n_train + n_valid, n_test));
  return out;
}

std::vector<Batch> batch_iter(const Dataset& data, std::size_t batch_size, std::size_t epoch,
                              std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  const auto perm = permutation(data.size(), mix_seed(seed, epoch));
  std::vector<Batch> batches;
  batches.reserve((perm.size() + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < perm.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, perm.size() - start);
    Batch b;
    b.indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(start + len));
    b.features = gather_rows(data.features(), b.indices);
    b.labels.reserve(len);
    for (std::size_t i : b.indices) b.labels.push_back(data.labels()[i]);
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace fedlwf
