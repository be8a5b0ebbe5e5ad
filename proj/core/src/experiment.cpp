#include "fedlwf/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "fedlwf/errors.hpp"

namespace fedlwf {

using nlohmann::json;

namespace {

// Reads one JSON object, converting values with key-path error messages and
// rejecting keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be an object");
  }

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError("missing key " + key_path(key));
    return j_.at(key);
  }

  std::size_t count(const std::string& key) {
    const json& v = at(key);
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::size_t>();
    throw ConfigError(key_path(key) + " must be a non-negative integer");
  }

  std::uint64_t seed(const std::string& key) { return count(key); }

  double number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(key_path(key) + " must be a number");
    return v.get<double>();
  }

  std::string text(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(key_path(key) + " must be a string");
    return v.get<std::string>();
  }

  ObjectReader object(const std::string& key) { return ObjectReader(at(key), key_path(key)); }

  [[nodiscard]] std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.contains(item.key())) throw ConfigError("unknown key " + key_path(item.key()));
    }
  }

 private:
  [[nodiscard]] std::string label() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

// Re-throws a library ConfigError with the dot-path of the key it concerns.
template <typename F>
void checked(const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

SplitFractions read_fractions(ObjectReader r) {
  SplitFractions f;
  f.train = r.number("train");
  f.valid = r.number("valid");
  f.test = r.number("test");
  r.finish();
  return f;
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.is_absolute() || base.empty()) return p;
  return (base / p).lexically_normal();
}

std::string partition_name(PartitionKind kind) {
  return kind == PartitionKind::iid ? "iid" : "label_skew";
}

}  // namespace

json default_config_json() {
  json events = json::array();
  for (int e = 0; e < 3; ++e) {
    events.push_back({{"name", "event" + std::to_string(e)},
                      {"n_per_class", 50},
                      {"center_scale", 3.0},
                      {"noise_sigma", 1.0},
                      {"center_seed", 1 + e},
                      {"sample_seed", 101 + e},
                      {"split_seed", 201 + e},
                      {"fractions", {{"train", 0.6}, {"valid", 0.2}, {"test", 0.2}}}});
  }
  return {
      {"mode", "central_cl"},
      {"model", {{"depth", 3}, {"width", 100}, {"in_dim", 32}, {"n_classes", 10}}},
      {"fed",
       {{"n_clients", 3},
        {"rounds", 4},
        {"local_epochs", 5},
        {"partition", "iid"},
        {"alpha", 0.5},
        {"threads", 1}}},
      {"train",
       {{"epochs", 20},
        {"batch_size", 32},
        {"lr", 0.001},
        {"beta1", 0.9},
        {"beta2", 0.999},
        {"eps", 1e-8},
        {"l2", 1e-4},
        {"lambda0", 1.0},
        {"temperature", 2.0},
        {"seed", 0}}},
      {"data", {{"synthetic", {{"events", events}}}}},
      {"output", {{"dir", "out"}, {"formats", {"csv"}}}},
  };
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  ObjectReader root(j, "");
  checked("mode", [&] { cfg.mode = parse_mode(root.text("mode")); });

  {
    ObjectReader m = root.object("model");
    cfg.model.depth = m.count("depth");
    cfg.model.width = m.count("width");
    cfg.model.in_dim = m.count("in_dim");
    cfg.model.n_classes = m.count("n_classes");
    m.finish();
  }
  {
    ObjectReader f = root.object("fed");
    cfg.fed.n_clients = f.count("n_clients");
    cfg.fed.rounds = f.count("rounds");
    cfg.fed.local_epochs = f.count("local_epochs");
    const std::string kind = f.text("partition");
    if (kind == "iid") {
      cfg.fed.partition.kind = PartitionKind::iid;
    } else if (kind == "label_skew") {
      cfg.fed.partition.kind = PartitionKind::label_skew;
    } else {
      throw ConfigError("fed.partition must be iid or label_skew, got '" + kind + "'");
    }
    cfg.fed.partition.alpha = f.number("alpha");
    cfg.fed.threads = f.count("threads");
    f.finish();
  }
  {
    ObjectReader t = root.object("train");
    TrainConfig& tc = cfg.fed.train;
    tc.epochs = t.count("epochs");
    tc.batch_size = t.count("batch_size");
    tc.hyper.lr = t.number("lr");
    tc.hyper.beta1 = t.number("beta1");
    tc.hyper.beta2 = t.number("beta2");
    tc.hyper.eps = t.number("eps");
    tc.hyper.l2 = t.number("l2");
    tc.lwf.lambda0 = t.number("lambda0");
    tc.lwf.temperature = t.number("temperature");
    tc.lwf.enabled = uses_lwf(cfg.mode);
    tc.seed = t.seed("seed");
    t.finish();
  }
  {
    ObjectReader d = root.object("data");
    const bool synth = d.has("synthetic");
    const bool files = d.has("files");
    if (synth == files) throw ConfigError("data must contain exactly one of data.synthetic or data.files");
    if (synth) {
      ObjectReader s = d.object("synthetic");
      const json& events = s.at("events");
      if (!events.is_array() || events.empty()) {
        throw ConfigError("data.synthetic.events must be a non-empty array");
      }
      for (std::size_t i = 0; i < events.size(); ++i) {
        ObjectReader e(events[i], "data.synthetic.events." + std::to_string(i));
        SyntheticEventSpec spec;
        spec.name = e.text("name");
        spec.n_per_class = e.count("n_per_class");
        spec.center_scale = e.number("center_scale");
        spec.noise_sigma = e.number("noise_sigma");
        spec.center_seed = e.seed("center_seed");
        spec.sample_seed = e.seed("sample_seed");
        spec.split_seed = e.seed("split_seed");
        spec.fractions = read_fractions(e.object("fractions"));
        e.finish();
        cfg.data.synthetic.push_back(std::move(spec));
      }
      s.finish();
    } else {
      const json& events = d.at("files");
      if (!events.is_array() || events.empty()) throw ConfigError("data.files must be a non-empty array");
      for (std::size_t i = 0; i < events.size(); ++i) {
        ObjectReader e(events[i], "data.files." + std::to_string(i));
        FileEventSpec spec;
        spec.name = e.text("name");
        spec.train = resolve(e.text("train"), base_dir);
        spec.valid = resolve(e.text("valid"), base_dir);
        spec.test = resolve(e.text("test"), base_dir);
        e.finish();
        for (const auto& [key, p] : {std::pair{"train", &spec.train}, std::pair{"valid", &spec.valid},
                                     std::pair{"test", &spec.test}}) {
          if (!std::filesystem::exists(*p)) {
            throw ConfigError("data.files." + std::to_string(i) + "." + key + ": file not found: " +
                              p->string());
          }
        }
        cfg.data.files.push_back(std::move(spec));
      }
    }
    d.finish();
  }
  {
    ObjectReader o = root.object("output");
    cfg.output.dir = o.text("dir");
    const json& formats = o.at("formats");
    if (!formats.is_array()) throw ConfigError("output.formats must be an array");
    cfg.output.formats.clear();
    for (const auto& f : formats) {
      if (!f.is_string()) throw ConfigError("output.formats entries must be strings");
      checked("output.formats", [&] { cfg.output.formats.push_back(parse_export_format(f.get<std::string>())); });
    }
    o.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (model.depth < 2) throw ConfigError("model.depth must be >= 2");
  if (model.width < 1) throw ConfigError("model.width must be >= 1");
  if (model.in_dim < 1) throw ConfigError("model.in_dim must be >= 1");
  if (model.n_classes < 2) throw ConfigError("model.n_classes must be >= 2");
  if (fed.n_clients < 1) throw ConfigError("fed.n_clients must be >= 1");
  if (fed.rounds < 1) throw ConfigError("fed.rounds must be >= 1");
  if (fed.local_epochs < 1) throw ConfigError("fed.local_epochs must be >= 1");
  if (fed.threads < 1) throw ConfigError("fed.threads must be >= 1");
  if (fed.partition.kind == PartitionKind::label_skew && !(fed.partition.alpha > 0.0)) {
    throw ConfigError("fed.alpha must be > 0");
  }
  const TrainConfig& t = fed.train;
  if (t.epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (t.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  checked("train", [&] {
    t.hyper.validate();
    t.lwf.validate();
  });
  if (data.synthetic.empty() == data.files.empty()) {
    throw ConfigError("data must contain exactly one of data.synthetic or data.files");
  }
  for (std::size_t i = 0; i < data.synthetic.size(); ++i) {
    const auto& e = data.synthetic[i];
    const std::string key = "data.synthetic.events." + std::to_string(i);
    if (e.n_per_class < 1) throw ConfigError(key + ".n_per_class must be >= 1");
    if (!(e.noise_sigma >= 0.0)) throw ConfigError(key + ".noise_sigma must be >= 0");
  }
  if (output.formats.empty()) throw ConfigError("output.formats must not be empty");
}

json ExperimentConfig::to_json() const {
  const TrainConfig& t = fed.train;
  json data_j;
  if (!data.synthetic.empty()) {
    json events = json::array();
    for (const auto& e : data.synthetic) {
      events.push_back({{"name", e.name},
                        {"n_per_class", e.n_per_class},
                        {"center_scale", e.center_scale},
                        {"noise_sigma", e.noise_sigma},
                        {"center_seed", e.center_seed},
                        {"sample_seed", e.sample_seed},
                        {"split_seed", e.split_seed},
                        {"fractions",
                         {{"train", e.fractions.train},
                          {"valid", e.fractions.valid},
                          {"test", e.fractions.test}}}});
    }
    data_j["synthetic"] = {{"events", events}};
  } else {
    json events = json::array();
    for (const auto& e : data.files) {
      events.push_back({{"name", e.name},
                        {"train", e.train.string()},
                        {"valid", e.valid.string()},
                        {"test", e.test.string()}});
    }
    data_j["files"] = events;
  }
  json formats = json::array();
  for (auto f : output.formats) formats.push_back(f == ExportFormat::csv ? "csv" : "json");

  return {
      {"mode", std::string(to_string(mode))},
      {"model",
       {{"depth", model.depth},
        {"width", model.width},
        {"in_dim", model.in_dim},
        {"n_classes", model.n_classes}}},
      {"fed",
       {{"n_clients", fed.n_clients},
        {"rounds", fed.rounds},
        {"local_epochs", fed.local_epochs},
        {"partition", partition_name(fed.partition.kind)},
        {"alpha", fed.partition.alpha},
        {"threads", fed.threads}}},
      {"train",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"lr", t.hyper.lr},
        {"beta1", t.hyper.beta1},
        {"beta2", t.hyper.beta2},
        {"eps", t.hyper.eps},
        {"l2", t.hyper.l2},
        {"lambda0", t.lwf.lambda0},
        {"temperature", t.lwf.temperature},
        {"seed", t.seed}}},
      {"data", data_j},
      {"output", {{"dir", output.dir.string()}, {"formats", formats}}},
  };
}

void apply_override(json& config, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));

  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string seg = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (node->is_object()) {
      if (!node->contains(seg)) throw ConfigError("unknown key " + key);
      node = &(*node)[seg];
    } else if (node->is_array()) {
      std::size_t idx = 0;
      auto [ptr, ec] = std::from_chars(seg.data(), seg.data() + seg.size(), idx);
      if (ec != std::errc{} || ptr != seg.data() + seg.size() || idx >= node->size()) {
        throw ConfigError("unknown key " + key);
      }
      node = &(*node)[idx];
    } else {
      throw ConfigError("unknown key " + key);
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }

  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  *node = std::move(value);
}

ExperimentConfig load_experiment_config(const std::optional<std::filesystem::path>& path,
                                        std::span<const std::string> overrides,
                                        std::optional<std::uint64_t> seed) {
  json config = default_config_json();
  std::filesystem::path base_dir;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config " + path->string());
    json user = json::parse(in, nullptr, false, true);
    if (user.is_discarded() || !user.is_object()) {
      throw ConfigError("config " + path->string() + " is not a JSON object");
    }
    // data is replaced wholesale so a file-based config does not inherit the
    // synthetic defaults; everything else merges key by key.
    if (user.contains("data")) {
      config["data"] = user["data"];
      user.erase("data");
    }
    config.merge_patch(user);
    base_dir = std::filesystem::absolute(*path).parent_path();
  }
  for (const auto& o : overrides) apply_override(config, o);
  if (seed) config["train"]["seed"] = *seed;
  return ExperimentConfig::from_json(config, base_dir);
}

std::vector<EventSplits> load_events(const ExperimentConfig& config) {
  std::vector<EventSplits> events;
  for (const auto& e : config.data.synthetic) {
    SynthSpec spec;
    spec.n_per_class = e.n_per_class;
    spec.n_classes = config.model.n_classes;
    spec.dim = config.model.in_dim;
    spec.center_scale = e.center_scale;
    spec.noise_sigma = e.noise_sigma;
    spec.center_seed = e.center_seed;
    spec.sample_seed = e.sample_seed;
    events.push_back(split_dataset(synth_gaussian(spec), e.fractions, e.split_seed, e.name));
  }
  for (const auto& e : config.data.files) {
    EventSplits s;
    s.name = e.name;
    s.train = load_embedding_csv(e.train);
    s.valid = load_embedding_csv(e.valid);
    s.test = load_embedding_csv(e.test);
    events.push_back(std::move(s));
  }
  return events;
}

json ExperimentResult::summary_json(const ExperimentConfig& config) const {
  const auto& seq = sequence;
  const std::size_t last = seq.test_accuracy.events_completed() - 1;
  return {
      {"mode", std::string(to_string(config.mode))},
      {"events", event_names},
      {"final_test_accuracy", seq.test_accuracy.rows()[last]},
      {"final_train_accuracy", seq.train_accuracy.rows()[last]},
      {"final_test_loss", seq.test_loss[last]},
      {"cumulative_mean_test_accuracy", test_accuracy},
      {"cumulative_mean_train_accuracy", train_accuracy},
      {"mean_test_loss", test_loss},
      {"forgetting", forgetting ? json(*forgetting) : json(nullptr)},
      {"test_accuracy_matrix", seq.test_accuracy.rows()},
      {"train_accuracy_matrix", seq.train_accuracy.rows()},
      {"seed", config.fed.train.seed},
      {"warnings", seq.warnings},
  };
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::span<const EventSplits> events) {
  config.validate();
  ExperimentResult r;
  r.sequence = run_event_sequence(events, config.model, config.fed, config.mode);
  for (const auto& e : events) r.event_names.push_back(e.name);
  const std::size_t n = events.size();
  r.test_accuracy = cumulative_mean(r.sequence.test_accuracy, n);
  r.train_accuracy = cumulative_mean(r.sequence.train_accuracy, n);
  const auto& losses = r.sequence.test_loss.back();
  double loss_sum = 0.0;
  for (double l : losses) loss_sum += l;
  r.test_loss = loss_sum / static_cast<double>(losses.size());
  if (n >= 2) r.forgetting = forgetting(r.sequence.test_accuracy);
  return r;
}

void write_run_outputs(const ExperimentConfig& config, const ExperimentResult& result,
                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  export_metrics(result.sequence.log, dir / "metrics.csv", ExportFormat::csv);
  if (std::find(config.output.formats.begin(), config.output.formats.end(), ExportFormat::json) !=
      config.output.formats.end()) {
    export_metrics(result.sequence.log, dir / "metrics.json", ExportFormat::json);
  }
  const auto write_json = [&](const std::filesystem::path& p, const json& j) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + p.string());
  };
  write_json(dir / "summary.json", result.summary_json(config));
  write_json(dir / "resolved-config.json", config.to_json());
}

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "depth") return SweepAxis::depth;
  if (text == "clients") return SweepAxis::clients;
  throw ConfigError("unknown sweep axis '" + std::string(text) + "' (expected depth or clients)");
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, std::span<const EventSplits> events,
                            SweepAxis axis, std::span<const std::size_t> values,
                            std::span<const std::uint64_t> seeds) {
  if (values.empty()) throw ConfigError("sweep needs at least one axis value");
  std::vector<std::uint64_t> seed_list(seeds.begin(), seeds.end());
  if (seed_list.empty()) seed_list.push_back(base.fed.train.seed);

  std::vector<SweepRow> rows;
  for (std::size_t v : values) {
    ExperimentConfig cfg = base;
    if (axis == SweepAxis::depth) {
      cfg.model.depth = v;
    } else {
      cfg.fed.n_clients = v;
    }
    SweepRow row{v, 0.0, 0.0, 0.0};
    for (std::uint64_t s : seed_list) {
      cfg.fed.train.seed = s;
      const ExperimentResult r = run_experiment(cfg, events);
      row.train_accuracy += r.train_accuracy;
      row.test_accuracy += r.test_accuracy;
      row.test_loss += r.test_loss;
    }
    const double k = static_cast<double>(seed_list.size());
    row.train_accuracy /= k;
    row.test_accuracy /= k;
    row.test_loss /= k;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::string out = "axis_value,train_accuracy,test_accuracy,test_loss\n";
  for (const auto& r : rows) {
    out += std::to_string(r.axis_value) + ',' + format_double(r.train_accuracy, 9) + ',' +
           format_double(r.test_accuracy, 9) + ',' + format_double(r.test_loss, 9) + '\n';
  }
  return out;
}

std::vector<BaselineRow> baselines(const ExperimentConfig& base, std::span<const EventSplits> events) {
  std::vector<BaselineRow> rows;
  for (Mode mode : {Mode::central_only, Mode::central_cl, Mode::fed_only, Mode::fed_cl}) {
    ExperimentConfig cfg = base;
    cfg.mode = mode;
    cfg.fed.train.lwf.enabled = uses_lwf(mode);
    const ExperimentResult r = run_experiment(cfg, events);
    rows.push_back({mode, r.train_accuracy, r.test_accuracy});
  }
  return rows;
}

std::string baselines_to_csv(std::span<const BaselineRow> rows) {
  std::string out = "mode,train_accuracy,test_accuracy\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.mode)) + ',' + format_double(r.train_accuracy, 9) + ',' +
           format_double(r.test_accuracy, 9) + '\n';
  }
  return out;
}

std::vector<std::filesystem::path> generate_synthetic_files(const ExperimentConfig& config,
                                                            const std::filesystem::path& dir) {
  if (config.data.synthetic.empty()) {
    throw ConfigError("gen-synth needs a data.synthetic section");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto& event : load_events(config)) {
    for (const auto& [suffix, data] : {std::pair{"train", &event.train}, std::pair{"valid", &event.valid},
                                       std::pair{"test", &event.test}}) {
      const auto path = dir / (event.name + "_" + suffix + ".csv");
      write_embedding_csv(*data, path);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace fedlwf
