#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedlwf/matrix.hpp"

namespace fedlwf {

/// The ten humanitarian categories, ids 0..9 in their canonical order.
[[nodiscard]] const std::vector<std::string>& humaid_label_names();

/// Embedding rows with integer labels in [0, n_classes).
class Dataset {
 public:
  Dataset() = default;
  /// Validates rows == labels, N >= 1 and every label in range. Empty
  /// `label_names` selects the humanitarian names for 10 classes and
  /// "class_<k>" otherwise.
  Dataset(Matrix features, std::vector<int> labels, std::size_t n_classes,
          std::vector<std::string> label_names = {});

  [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return features_.cols(); }
  [[nodiscard]] std::size_t n_classes() const noexcept { return n_classes_; }
  [[nodiscard]] const Matrix& features() const noexcept { return features_; }
  [[nodiscard]] const std::vector<int>& labels() const noexcept { return labels_; }
  [[nodiscard]] const std::vector<std::string>& label_names() const noexcept { return label_names_; }

  [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  Matrix features_;
  std::vector<int> labels_;
  std::size_t n_classes_ = 0;
  std::vector<std::string> label_names_;
};

struct EventSplits {
  std::string name;
  Dataset train;
  Dataset valid;
  Dataset test;
};

// Embedding CSV:
//   # comment lines (optional), including "# n_classes=<k>" (default 10)
//   label,e0,e1,...,e{dim-1}
//   <int label>,<float>,...
[[nodiscard]] Dataset load_embedding_csv(const std::filesystem::path& path);
[[nodiscard]] Dataset parse_embedding_csv(std::istream& in, std::string_view source = "<stream>");
/// Writes 17 significant digits so a reload is bitwise lossless.
void write_embedding_csv(const Dataset& data, const std::filesystem::path& path);
void write_embedding_csv(const Dataset& data, std::ostream& out);

struct SynthSpec {
  std::size_t n_per_class = 50;
  std::size_t n_classes = 10;
  std::size_t dim = 32;
  double center_scale = 3.0;
  double noise_sigma = 1.0;
  std::uint64_t center_seed = 0;
  std::uint64_t sample_seed = 0;
};

/// Isotropic Gaussian clusters. Class c is centered at center_scale times a
/// unit-normalized Gaussian draw keyed by (center_seed, c). Rows are grouped
/// by class.
[[nodiscard]] Dataset synth_gaussian(const SynthSpec& spec);
/// The class centers synth_gaussian uses, as an n_classes x dim matrix.
[[nodiscard]] Matrix synth_centers(const SynthSpec& spec);

struct SplitFractions {
  double train = 0.7;
  double valid = 0.1;
  double test = 0.2;
};

/// Seeded shuffle, then contiguous cut. Valid/test get floor(f * N), train
/// gets the remainder. Throws ConfigError if any split would be empty.
[[nodiscard]] EventSplits split_dataset(const Dataset& data, SplitFractions fractions,
                                        std::uint64_t seed, std::string name = {});

struct Batch {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::size_t> indices;  // source rows in `data`
};

/// ceil(N / batch_size) batches over a permutation keyed by (seed, epoch).
/// The last batch may be short.
[[nodiscard]] std::vector<Batch> batch_iter(const Dataset& data, std::size_t batch_size,
                                            std::size_t epoch, std::uint64_t seed);

}  // namespace fedlwf
