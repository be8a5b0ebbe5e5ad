#include "fedlwf/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fedlwf/errors.hpp"
#include "fedlwf/losses.hpp"

namespace fedlwf {

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "valid") return Split::valid;
  if (text == "test") return Split::test;
  throw FormatError("unknown split '" + std::string(text) + "'");
}

std::size_t argmax(std::span<const double> row) noexcept {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

Evaluation evaluate(const ModelParams& params, const Dataset& data) {
  params.validate();
  if (data.dim() != params.in_dim()) {
    throw ShapeError("evaluate: data has dim " + std::to_string(data.dim()) +
                     ", model expects " + std::to_string(params.in_dim()));
  }
  if (data.n_classes() > params.n_classes()) {
    throw ShapeError("evaluate: data has " + std::to_string(data.n_classes()) +
                     " classes, model outputs " + std::to_string(params.n_classes()));
  }
  constexpr std::size_t kChunk = 1024;
  const std::size_t n = data.size();
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t len = std::min(kChunk, n - start);
    idx.resize(len);
    for (std::size_t i = 0; i < len; ++i) idx[i] = start + i;
    const Matrix logits = predict_logits(params, gather_rows(data.features(), idx));
    const std::span<const int> labels(data.labels().data() + start, len);
    loss_sum += softmax_xent(logits, labels).loss * static_cast<double>(len);
    for (std::size_t i = 0; i < len; ++i) {
      if (argmax(logits.row(i)) == static_cast<std::size_t>(labels[i])) ++correct;
    }
  }
  return {loss_sum / static_cast<double>(n),
          static_cast<double>(correct) / static_cast<double>(n)};
}

AccuracyMatrix::AccuracyMatrix(std::vector<std::vector<double>> rows) {
  for (auto& r : rows) add_row(std::move(r));
}

void AccuracyMatrix::add_row(std::vector<double> row) {
  if (row.size() < rows_.size() + 1) {
    throw ConfigError("accuracy row " + std::to_string(rows_.size()) + " needs at least " +
                      std::to_string(rows_.size() + 1) + " entries");
  }
  for (double a : row) {
    if (!(a >= 0.0 && a <= 1.0)) throw DataError("accuracy entries must lie in [0, 1]");
  }
  rows_.push_back(std::move(row));
}

double AccuracyMatrix::at(std::size_t after_event, std::size_t target) const {
  if (after_event >= rows_.size() || target >= rows_[after_event].size()) {
    throw ConfigError("accuracy matrix has no entry (" + std::to_string(after_event) + ", " +
                      std::to_string(target) + ")");
  }
  return rows_[after_event][target];
}

double forgetting(const AccuracyMatrix& m) {
  const std::size_t n = m.events_completed();
  if (n < 2) throw ConfigError("forgetting needs at least 2 completed events");
  const std::size_t last = n - 1;
  double total = 0.0;
  for (std::size_t j = 0; j < last; ++j) {
    double best = m.at(j, j);
    for (std::size_t i = j + 1; i <= last; ++i) best = std::max(best, m.at(i, j));
    total += best - m.at(last, j);
  }
  return total / static_cast<double>(last);
}

double cumulative_mean(const AccuracyMatrix& m, std::size_t upto) {
  if (upto == 0) throw ConfigError("cumulative_mean: upto must be >= 1");
  if (upto > m.events_completed()) {
    throw ConfigError("cumulative_mean: only " + std::to_string(m.events_completed()) +
                      " events completed, asked for " + std::to_string(upto));
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < upto; ++j) sum += m.at(upto - 1, j);
  return sum / static_cast<double>(upto);
}

std::string format_double(double value, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return buf;
}

ExportFormat parse_export_format(std::string_view text) {
  if (text == "csv") return ExportFormat::csv;
  if (text == "json") return ExportFormat::json;
  throw ConfigError("unknown export format '" + std::string(text) + "'");
}

namespace {

constexpr std::string_view kCsvHeader = "event,round,epoch,split,target_event,loss,accuracy";
constexpr int kDigits = 9;

double rounded(double v) { return std::strtod(format_double(v, kDigits).c_str(), nullptr); }

void check_record(const EvalRecord& r, std::size_t index) {
  if (!(r.loss >= 0.0) || !(r.accuracy >= 0.0 && r.accuracy <= 1.0)) {
    throw DataError("metrics record " + std::to_string(index) + " has loss/accuracy out of range");
  }
}

}  // namespace

std::string metrics_to_csv(const MetricsLog& log) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : log) {
    out += std::to_string(r.event) + ',' + std::to_string(r.round) + ',' +
           std::to_string(r.epoch) + ',' + std::string(to_string(r.split)) + ',' +
           std::to_string(r.target_event) + ',' + format_double(r.loss, kDigits) + ',' +
           format_double(r.accuracy, kDigits) + '\n';
  }
  return out;
}

std::string metrics_to_json(const MetricsLog& log) {
  auto arr = nlohmann::json::array();
  for (const auto& r : log) {
    arr.push_back({{"event", r.event},
                   {"round", r.round},
                   {"epoch", r.epoch},
                   {"split", std::string(to_string(r.split))},
                   {"target_event", r.target_event},
                   {"loss", rounded(r.loss)},
                   {"accuracy", rounded(r.accuracy)}});
  }
  return arr.dump(1) + '\n';
}

void export_metrics(const MetricsLog& log, const std::filesystem::path& path, ExportFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (format == ExportFormat::csv ? metrics_to_csv(log) : metrics_to_json(log));
  if (!out) throw IoError("write failed for " + path.string());
}

MetricsLog parse_metrics_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw FormatError("metrics csv: missing or wrong header");
  }
  MetricsLog log;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw FormatError("metrics csv line " + std::to_string(line_no) + ": expected 7 fields");
    try {
      EvalRecord r;
      r.event = std::stoull(f[0]);
      r.round = std::stoull(f[1]);
      r.epoch = std::stoull(f[2]);
      r.split = parse_split(f[3]);
      r.target_event = std::stoull(f[4]);
      r.loss = std::stod(f[5]);
      r.accuracy = std::stod(f[6]);
      check_record(r, log.size());
      log.push_back(r);
    } catch (const std::logic_error&) {
      throw FormatError("metrics csv line " + std::to_string(line_no) + ": unparsable field");
    }
  }
  return log;
}

MetricsLog parse_metrics_json(std::string_view text) {
  MetricsLog log;
  try {
    const auto arr = nlohmann::json::parse(text);
    if (!arr.is_array()) throw FormatError("metrics json: expected an array");
    for (const auto& j : arr) {
      EvalRecord r;
      r.event = j.at("event").get<std::size_t>();
      r.round = j.at("round").get<std::size_t>();
      r.epoch = j.at("epoch").get<std::size_t>();
      r.split = parse_split(j.at("split").get<std::string>());
      r.target_event = j.at("target_event").get<std::size_t>();
      r.loss = j.at("loss").get<double>();
      r.accuracy = j.at("accuracy").get<double>();
      check_record(r, log.size());
      log.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics json: ") + e.what());
  }
  return log;
}

MetricsLog read_metrics(const std::filesystem::path& path, ExportFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return format == ExportFormat::csv ? parse_metrics_csv(ss.str()) : parse_metrics_json(ss.str());
}

}  // namespace fedlwf
