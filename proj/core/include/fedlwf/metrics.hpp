#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedlwf/data_io.hpp"
#include "fedlwf/nn.hpp"

namespace fedlwf {

enum class Split { train, valid, test };

[[nodiscard]] std::string_view to_string(Split split) noexcept;
[[nodiscard]] Split parse_split(std::string_view text);

struct EvalRecord {
  std::size_t event = 0;
  std::size_t round = 0;   // 0 for centralized runs
  std::size_t epoch = 0;   // training epochs completed on `event`
  Split split = Split::valid;
  std::size_t target_event = 0;
  double loss = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

using MetricsLog = std::vector<EvalRecord>;

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Mean cross-entropy and argmax accuracy (ties go to the lowest class).
[[nodiscard]] Evaluation evaluate(const ModelParams& params, const Dataset& data);

/// Index of the largest entry; first one wins on ties.
[[nodiscard]] std::size_t argmax(std::span<const double> row) noexcept;

/// a[i][j]: accuracy on event j after finishing event i. Rows may hold
/// entries for j > i as well.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(std::vector<std::vector<double>> rows);

  void add_row(std::vector<double> row);
  [[nodiscard]] std::size_t events_completed() const noexcept { return rows_.size(); }
  [[nodiscard]] double at(std::size_t after_event, std::size_t target) const;
  [[nodiscard]] const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::vector<double>> rows_;
};

/// Mean over j < last of  max_{i >= j} a[i][j] - a[last][j].
[[nodiscard]] double forgetting(const AccuracyMatrix& m);
/// Mean of a[upto-1][0..upto).
[[nodiscard]] double cumulative_mean(const AccuracyMatrix& m, std::size_t upto);

/// printf-style %.*g with `digits` significant digits.
[[nodiscard]] std::string format_double(double value, int digits);

enum class ExportFormat { csv, json };

[[nodiscard]] ExportFormat parse_export_format(std::string_view text);

/// Columns event,round,epoch,split,target_event,loss,accuracy; floats at 9
/// significant digits.
[[nodiscard]] std::string metrics_to_csv(const MetricsLog& log);
[[nodiscard]] std::string metrics_to_json(const MetricsLog& log);
void export_metrics(const MetricsLog& log, const std::filesystem::path& path, ExportFormat format);

[[nodiscard]] MetricsLog parse_metrics_csv(std::string_view text);
[[nodiscard]] MetricsLog parse_metrics_json(std::string_view text);
[[nodiscard]] MetricsLog read_metrics(const std::filesystem::path& path, ExportFormat format);

}  // namespace fedlwf
