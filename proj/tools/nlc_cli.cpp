// nlc: coverage, fuzzing and tooling front end.
//
//   nlc fit       train.nlct --out warm.nlcs [criterion flags]
//   nlc coverage  test.nlct [--state warm.nlcs] [criterion flags]
//   nlc fuzz      (--model m.json | --runner "cmd" | --toy) --seeds seeds.csv ...
//   nlc bench     [--m 1024 --batches 4 --batch-size 256]
//   nlc synth     toy | classifier | variant | trace ...
//   nlc inspect   file.nlct | file.nlcs
//
// Exit codes: 0 ok, 2 usage, 3 format/data, 4 runner failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "nlc/nlc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Logging

enum class Level { error = 0, warn, info, debug };

Level log_level() {
  static const Level level = [] {
    const char* env = std::getenv("NLC_LOG");
    const std::string v = env ? env : "";
    if (v == "error") return Level::error;
    if (v == "info") return Level::info;
    if (v == "debug") return Level::debug;
    return Level::warn;
  }();
  return level;
}

void log(Level lv, const std::string& msg) {
  static constexpr const char* tags[] = {"error", "warn", "info", "debug"};
  if (lv <= log_level()) std::cerr << '[' << tags[static_cast<int>(lv)] << "] " << msg << '\n';
}

// ---------------------------------------------------------------------------
// CSV inputs: one input per line, "label,v0,v1,...". '#' starts a comment.

struct CsvData {
  nlc::RowMatrix x;
  std::vector<std::uint32_t> y;
};

CsvData read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) nlc::fail(nlc::Errc::io, "cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::vector<std::uint32_t> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
        if (first) {
          if (v < 0 || v != std::floor(v)) throw std::invalid_argument(cell);
          labels.push_back(static_cast<std::uint32_t>(v));
        } else {
          row.push_back(v);
        }
      } catch (const std::logic_error&) {
        nlc::fail(nlc::Errc::format, path + ":" + std::to_string(lineno) + ": bad value '" + cell + "'");
      }
      first = false;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      nlc::fail(nlc::Errc::format, path + ":" + std::to_string(lineno) + ": expected " +
                                       std::to_string(rows.front().size()) + " values, got " + std::to_string(row.size()));
    }
    if (row.empty()) nlc::fail(nlc::Errc::format, path + ":" + std::to_string(lineno) + ": no values after the label");
    rows.push_back(std::move(row));
  }
  CsvData d;
  d.y = std::move(labels);
  d.x.resize(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) d.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return d;
}

void write_csv(const fs::path& path, const nlc::RowMatrix& x, const std::vector<std::uint32_t>& y) {
  std::ofstream out(path);
  out.precision(17);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    out << y[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < x.cols(); ++c) out << ',' << x(r, c);
    out << '\n';
  }
  if (!out) nlc::fail(nlc::Errc::io, "failed writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) nlc::fail(nlc::Errc::io, "failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Criterion flags shared by fit, coverage and fuzz.

struct CriterionFlags {
  std::string kind = "nlc";
  double t = 0.0;
  std::size_t k = 0;
  double cc_t = 0.0;
  std::string layers;
  bool class_conditional = false;
  std::size_t classes = 0;
  CLI::App* app = nullptr;

  void add(CLI::App* sub) {
    app = sub;
    sub->add_option("--criterion", kind, "nlc, nc, ncs, kmnc, nbc, snac, tknc, tknp or cc");
    sub->add_option("--t", t, "NC / NCS threshold");
    sub->add_option("--k", k, "KMNC segments or TKNC / TKNP top-k");
    sub->add_option("--cc-t", cc_t, "CC distance threshold");
    sub->add_option("--layers", layers, "comma-separated CC layers");
    sub->add_flag("--class-conditional", class_conditional, "one covariance per class (NLC)");
    sub->add_option("--classes", classes, "class count for --class-conditional");
  }

  bool set(const char* name) const { return app->count(name) > 0; }

  // Applies only the flags given on the command line.
  void apply(nlc::CriterionConfig& cfg) const {
    if (set("--criterion")) cfg.kind = nlc::parse_kind(kind);
    if (set("--t")) cfg.t = t;
    if (set("--k")) cfg.k = k;
    if (set("--cc-t")) cfg.cc_t = cc_t;
    if (set("--layers")) cfg.layers = nlc::split_list(layers);
    if (set("--class-conditional")) cfg.class_conditional = class_conditional;
    if (set("--classes")) cfg.class_count = classes;
  }

  nlc::CriterionConfig config() const {
    nlc::CriterionConfig cfg;
    apply(cfg);
    return cfg;
  }
};

json per_layer_json(const nlc::Criterion& c) {
  json out = json::array();
  const auto values = c.per_layer();
  const auto& layers = c.layers();
  for (std::size_t l = 0; l < values.size() && l < layers.size(); ++l) {
    out.push_back({{"layer", layers[l].name}, {"value", values[l]}});
  }
  return out;
}

json layers_json(const nlc::LayerList& layers) {
  json out = json::array();
  for (const auto& l : layers) out.push_back({{"name", l.name}, {"neurons", l.neurons}});
  return out;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  CriterionFlags crit;
  std::string trace;
  std::string out;
  std::size_t batch_size = nlc::kDefaultBatchSize;
};

int cmd_fit(const FitArgs& a) {
  auto cfg = a.crit.config();
  nlc::TraceReader reader(a.trace);
  const auto& header = reader.header();
  if (cfg.class_conditional && cfg.class_count == 0) cfg.class_count = header.class_count;

  std::optional<nlc::RangeTable> ranges;
  if (nlc::needs_ranges(cfg.kind)) {
    ranges = nlc::fit_ranges(header.layers, reader.source(a.batch_size));
    reader = nlc::TraceReader(a.trace);
  }
  auto c = nlc::Criterion::create(cfg, header.layers, ranges);
  std::uint64_t seen = 0;
  while (auto b = reader.next_batch(a.batch_size)) {
    c.update(*b);
    seen += b->size();
  }
  nlc::save_state(a.out, c);
  log(Level::info, "fit " + std::string(nlc::kind_name(cfg.kind)) + " on " + std::to_string(seen) + " inputs");
  std::cout << json{{"criterion", nlc::kind_name(c.kind())}, {"inputs", seen}, {"value", c.value()}, {"state", a.out}}.dump(2)
            << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// coverage

struct CoverageArgs {
  CriterionFlags crit;
  std::string trace;
  std::string state;
  std::string out;
  std::size_t batch_size = nlc::kDefaultBatchSize;
};

int cmd_coverage(const CoverageArgs& a) {
  nlc::TraceReader reader(a.trace);
  const auto& header = reader.header();
  std::optional<double> warm;
  nlc::Criterion c;
  if (!a.state.empty()) {
    c = nlc::load_state(a.state);
    if (c.layers() != header.layers) {
      nlc::fail(nlc::Errc::shape_mismatch, "trace layers differ from the layers stored in '" + a.state + "'");
    }
    warm = c.value();
  } else {
    auto cfg = a.crit.config();
    if (cfg.class_conditional && cfg.class_count == 0) cfg.class_count = header.class_count;
    if (nlc::needs_ranges(cfg.kind)) {
      nlc::fail(nlc::Errc::not_fitted, std::string(nlc::kind_name(cfg.kind)) +
                                            " needs ranges from training data; run 'nlc fit' and pass --state");
    }
    c = nlc::Criterion::create(cfg, header.layers);
  }
  std::uint64_t seen = 0;
  while (auto b = reader.next_batch(a.batch_size)) {
    c.update(*b);
    seen += b->size();
  }
  if (!a.out.empty()) nlc::save_state(a.out, c);
  json j{{"criterion", nlc::kind_name(c.kind())}, {"inputs", seen}, {"value", c.value()}, {"per_layer", per_layer_json(c)}};
  if (warm) {
    j["warm_value"] = *warm;
    j["delta"] = c.value() - *warm;
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// fuzz

struct FuzzArgs {
  CriterionFlags crit;
  std::string model;
  std::string runner;
  bool toy = false;
  std::string seeds;
  std::string train;
  std::string state;
  std::string config;
  std::string out;
  std::size_t max_iterations = 0;
  std::size_t num = 0;
  double alpha = 0, beta = 0, rel_eps = 0;
  std::uint64_t seed = 0;
  std::string mode;
  bool speculative = false;
  bool no_oracle = false;
  int timeout_ms = 30000;
  CLI::App* app = nullptr;

  bool set(const char* name) const { return app->count(name) > 0; }
};

std::vector<nlc::SeedEntry> seeds_from(const nlc::RowMatrix& x, const std::vector<std::uint32_t>& y,
                                       const nlc::ModelInfo& info) {
  if (static_cast<std::size_t>(x.cols()) != info.input_dim()) {
    nlc::fail(nlc::Errc::shape_mismatch, "seed inputs have " + std::to_string(x.cols()) + " values, model expects " +
                                             std::to_string(info.input_dim()));
  }
  std::vector<nlc::SeedEntry> out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto label = y[static_cast<std::size_t>(r)];
    if (label >= info.classes) nlc::fail(nlc::Errc::format, "seed label " + std::to_string(label) + " >= class count");
    out.push_back({nlc::row_to_image(x, r, info.input_shape), label, static_cast<std::size_t>(r), {}});
  }
  return out;
}

nlc::ActivationBatch run_all(nlc::Runner& runner, const nlc::RowMatrix& x, const std::vector<std::uint32_t>& y) {
  const auto& info = runner.info();
  nlc::ActivationBatch b;
  for (const auto& l : info.layers) {
    b.layers.emplace_back(x.rows(), static_cast<Eigen::Index>(l.neurons));
  }
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto run = runner.run(nlc::row_to_image(x, r, info.input_shape));
    for (std::size_t l = 0; l < run.activations.size(); ++l) {
      for (std::size_t j = 0; j < run.activations[l].size(); ++j) b.layers[l](r, static_cast<Eigen::Index>(j)) = run.activations[l][j];
    }
  }
  b.labels = y;
  return b;
}

int cmd_fuzz(const FuzzArgs& a) {
  nlc::FuzzConfig cfg;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) nlc::fail(nlc::Errc::io, "cannot open '" + a.config + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = nlc::parse_fuzz_config(ss.str(), cfg);
  }
  a.crit.apply(cfg.criterion);
  if (a.set("--max-iterations")) cfg.max_iterations = a.max_iterations;
  if (a.set("--num")) cfg.num = a.num;
  if (a.set("--alpha")) cfg.validity.alpha = a.alpha;
  if (a.set("--beta")) cfg.validity.beta = a.beta;
  if (a.set("--rel-eps")) cfg.rel_eps = a.rel_eps;
  if (a.set("--seed")) cfg.seed = a.seed;
  if (a.set("--mode")) nlc::apply_fuzz_key(cfg, "mode", a.mode);
  if (a.speculative) cfg.speculative = true;
  if (a.no_oracle) cfg.check_oracle = false;
  cfg.check();

  const int sources = int(!a.model.empty()) + int(!a.runner.empty()) + int(a.toy);
  if (sources != 1) nlc::fail(nlc::Errc::invalid_argument, "give exactly one of --model, --runner, --toy");

  std::unique_ptr<nlc::Runner> runner;
  std::optional<CsvData> seed_data, train_data;
  if (a.toy) {
    const auto toy = nlc::make_blind_spot_toy();
    runner = std::make_unique<nlc::MlpRunner>(toy.model);
    seed_data = CsvData{toy.seeds.x, toy.seeds.y};
    train_data = CsvData{toy.train.x, toy.train.y};
  } else if (!a.model.empty()) {
    runner = std::make_unique<nlc::MlpRunner>(nlc::load_mlp(a.model));
  } else {
    runner = std::make_unique<nlc::ExternalRunner>(a.runner, std::chrono::milliseconds(a.timeout_ms));
  }
  const auto& info = runner->info();
  if (!a.seeds.empty()) seed_data = read_csv(a.seeds);
  if (!a.train.empty()) train_data = read_csv(a.train);
  if (!seed_data) nlc::fail(nlc::Errc::invalid_argument, "--seeds is required unless --toy is given");
  const auto seeds = seeds_from(seed_data->x, seed_data->y, info);
  log(Level::info, "loaded " + std::to_string(seeds.size()) + " seeds");

  nlc::Criterion criterion;
  if (!a.state.empty()) {
    criterion = nlc::load_state(a.state);
  } else {
    if (cfg.criterion.class_conditional && cfg.criterion.class_count == 0) cfg.criterion.class_count = info.classes;
    std::optional<nlc::ActivationBatch> warm;
    if (train_data) warm = run_all(*runner, train_data->x, train_data->y);
    std::optional<nlc::RangeTable> ranges;
    if (nlc::needs_ranges(cfg.criterion.kind)) {
      if (!warm) nlc::fail(nlc::Errc::not_fitted, "range-based criteria need --train or --state");
      ranges = nlc::fit_ranges(info.layers, std::vector<nlc::ActivationBatch>{*warm});
    }
    criterion = nlc::Criterion::create(cfg.criterion, info.layers, ranges);
    if (warm) {
      criterion.update(*warm);
      log(Level::info, "warm start on " + std::to_string(warm->size()) + " training inputs");
    }
  }

  auto result = nlc::run_fuzz(cfg, *runner, criterion, seeds);
  const auto report = nlc::report_to_json(result.report);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_json(fs::path(a.out) / "report.json", report);
    nlc::save_state((fs::path(a.out) / "final.nlcs").string(), criterion);
    if (result.report.complete) nlc::write_corpus(fs::path(a.out) / "corpus", result, seeds.size(), *runner);
  }
  std::cout << report.dump(2) << '\n';
  if (!result.report.complete) nlc::fail(nlc::Errc::runner, result.report.error);
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::size_t m = 1024;
  std::size_t batches = 4;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  std::size_t absorbed = 1000;
  std::size_t trials = 20;
};

int cmd_bench(const BenchArgs& a) {
  const auto r = nlc::run_bench(a.m, a.batches, a.batch_size, a.seed, a.absorbed, a.trials);
  json cost = json::array();
  for (const auto& p : r.cost) cost.push_back({{"absorbed_batches", p.absorbed}, {"median_merge_us", p.median_us}});
  json j{{"m", r.m},           {"batches", r.batches},       {"batch_size", r.batch_size}, {"matrix_ms", r.matrix_ms},
         {"loop_ms", r.loop_ms}, {"ratio", r.ratio},           {"rel_error", r.rel_error},   {"equal", r.equal},
         {"merge_cost", cost}};
  if (r.cost.size() == 2 && r.cost[0].median_us > 0) j["cost_ratio"] = r.cost[1].median_us / r.cost[0].median_us;
  std::cout << j.dump(2) << '\n';
  return r.equal ? 0 : 3;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 7;
  // classifier
  std::size_t classes = 4, per_class = 250, test_per_class = 250, dim = 16, epochs = 2000;
  double separation = 3.0, lr = 0.5, target = 0.95;
  std::vector<std::size_t> hidden{32};
  // variant
  std::string input;
  std::string variant = "x1";
  double bound = 0.1;
  std::size_t sources = 100;
  // trace
  std::string model;
  std::string runner;
  bool no_labels = false;
};

int cmd_synth_toy(const SynthArgs& a) {
  const auto toy = nlc::make_blind_spot_toy(a.seed);
  fs::create_directories(a.out);
  nlc::save_mlp((fs::path(a.out) / "model.json").string(), toy.model);
  write_csv(fs::path(a.out) / "train.csv", toy.train.x, toy.train.y);
  write_csv(fs::path(a.out) / "seeds.csv", toy.seeds.x, toy.seeds.y);
  std::cout << json{{"model", "model.json"}, {"train", toy.train.size()}, {"seeds", toy.seeds.size()},
                    {"train_accuracy", nlc::accuracy(toy.model, toy.train)}}.dump(2)
            << '\n';
  return 0;
}

int cmd_synth_classifier(const SynthArgs& a) {
  nlc::Rng rng(a.seed);
  const auto train = nlc::make_gaussian_classifier_data(a.classes, a.per_class, a.dim, a.separation, rng);
  const auto test = nlc::make_gaussian_classifier_data(a.classes, a.test_per_class, a.dim, a.separation, rng);
  nlc::TrainConfig tc;
  tc.hidden = a.hidden;
  tc.epochs = a.epochs;
  tc.lr = a.lr;
  tc.target_accuracy = a.target;
  tc.seed = a.seed;
  const auto model = nlc::train_toy_mlp(train, tc);
  fs::create_directories(a.out);
  nlc::save_mlp((fs::path(a.out) / "model.json").string(), model);
  write_csv(fs::path(a.out) / "train.csv", train.x, train.y);
  write_csv(fs::path(a.out) / "test.csv", test.x, test.y);
  std::cout << json{{"model", "model.json"}, {"train", train.size()}, {"test", test.size()},
                    {"train_accuracy", nlc::accuracy(model, train)}, {"test_accuracy", nlc::accuracy(model, test)}}.dump(2)
            << '\n';
  return 0;
}

int cmd_synth_variant(const SynthArgs& a) {
  const auto base = read_csv(a.input);
  nlc::DatasetScheme scheme{nlc::parse_variant(a.variant), a.bound, a.sources};
  const auto set = nlc::make_variant_set(base.x, scheme, a.seed);
  std::vector<std::uint32_t> y;
  for (auto o : set.origin) y.push_back(base.y[o]);
  write_csv(a.out, set.x, y);
  std::cout << json{{"variant", nlc::variant_name(scheme.variant)}, {"inputs", y.size()}, {"out", a.out}}.dump(2) << '\n';
  return 0;
}

int cmd_synth_trace(const SynthArgs& a) {
  if (a.model.empty() == a.runner.empty()) nlc::fail(nlc::Errc::invalid_argument, "give exactly one of --model, --runner");
  std::unique_ptr<nlc::Runner> runner;
  if (!a.model.empty()) runner = std::make_unique<nlc::MlpRunner>(nlc::load_mlp(a.model));
  else runner = std::make_unique<nlc::ExternalRunner>(a.runner);
  const auto data = read_csv(a.input);
  const auto& info = runner->info();
  if (static_cast<std::size_t>(data.x.cols()) != info.input_dim() && data.x.rows() > 0) {
    nlc::fail(nlc::Errc::shape_mismatch, "inputs have " + std::to_string(data.x.cols()) + " values, model expects " +
                                             std::to_string(info.input_dim()));
  }
  nlc::TraceHeader header{info.layers, 0, !a.no_labels, a.no_labels ? 0u : static_cast<std::uint32_t>(info.classes)};
  nlc::TraceWriter w(a.out, header);
  for (Eigen::Index r = 0; r < data.x.rows(); ++r) {
    const auto run = runner->run(nlc::row_to_image(data.x, r, info.input_shape));
    if (a.no_labels) w.write(run.activations);
    else w.write(run.activations, data.y[static_cast<std::size_t>(r)]);
  }
  w.close();
  std::cout << json{{"inputs", data.x.rows()}, {"layers", layers_json(info.layers)}, {"out", a.out}}.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// inspect

int cmd_inspect(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) nlc::fail(nlc::Errc::io, "cannot open '" + path + "'");
  char magic[4] = {};
  in.read(magic, 4);
  in.close();
  const std::string m(magic, 4);
  json j;
  if (m == std::string(nlc::kTraceMagic, 4)) {
    nlc::TraceReader r(path);
    const auto& h = r.header();
    j = {{"format", "nlct"},         {"version", nlc::kTraceVersion}, {"layers", layers_json(h.layers)},
         {"input_count", h.input_count}, {"has_labels", h.has_labels}, {"class_count", h.class_count},
         {"header_bytes", h.header_bytes()}, {"record_bytes", h.record_bytes()}};
  } else if (m == std::string(nlc::kStateMagic, 4)) {
    const auto c = nlc::load_state(path);
    j = {{"format", "nlcs"}, {"version", nlc::kStateVersion}, {"criterion", nlc::kind_name(c.kind())},
         {"layers", layers_json(c.layers())}, {"value", c.value()}, {"per_layer", per_layer_json(c)}};
    if (const auto* s = std::get_if<nlc::NlcState>(&c.state())) {
      j["class_conditional"] = s->class_conditional;
      j["classes"] = s->classes;
      j["inputs"] = s->acc.empty() ? 0 : [&] {
        std::uint64_t n = 0;
        for (const auto& a : s->acc[0]) n += a.count();
        return n;
      }();
    }
  } else {
    nlc::fail(nlc::Errc::format, "'" + path + "' is neither an .nlct trace nor an .nlcs state");
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int exit_code(nlc::Errc c) {
  switch (c) {
    case nlc::Errc::invalid_argument: return 2;
    case nlc::Errc::runner: return 4;
    default: return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural coverage: measure, fuzz, inspect"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit ranges and warm-start a criterion from a training trace");
  fit.crit.add(fit_cmd);
  fit_cmd->add_option("trace", fit.trace, "training .nlct")->required();
  fit_cmd->add_option("--out", fit.out, "state file to write")->required();
  fit_cmd->add_option("--batch-size", fit.batch_size);

  CoverageArgs cov;
  auto* cov_cmd = app.add_subcommand("coverage", "Coverage of a test trace, optionally as a delta over a warm state");
  cov.crit.add(cov_cmd);
  cov_cmd->add_option("trace", cov.trace, "test .nlct")->required();
  cov_cmd->add_option("--state", cov.state, "warm-start .nlcs");
  cov_cmd->add_option("--out", cov.out, "write the updated state here");
  cov_cmd->add_option("--batch-size", cov.batch_size);

  FuzzArgs fz;
  auto* fuzz_cmd = app.add_subcommand("fuzz", "Coverage-guided fuzzing");
  fz.app = fuzz_cmd;
  fz.crit.add(fuzz_cmd);
  fuzz_cmd->add_option("--model", fz.model, "MLP model JSON");
  fuzz_cmd->add_option("--runner", fz.runner, "external runner command line");
  fuzz_cmd->add_flag("--toy", fz.toy, "use the built-in blind-spot toy and its data");
  fuzz_cmd->add_option("--seeds", fz.seeds, "seed inputs (CSV)");
  fuzz_cmd->add_option("--train", fz.train, "training inputs for warm start (CSV)");
  fuzz_cmd->add_option("--state", fz.state, "warm-start .nlcs instead of --train");
  fuzz_cmd->add_option("--config", fz.config, "key=value fuzz config file");
  fuzz_cmd->add_option("--out", fz.out, "directory for report, final state and corpus");
  fuzz_cmd->add_option("--max-iterations", fz.max_iterations);
  fuzz_cmd->add_option("--num", fz.num, "mutation tries per iteration");
  fuzz_cmd->add_option("--alpha", fz.alpha);
  fuzz_cmd->add_option("--beta", fz.beta);
  fuzz_cmd->add_option("--rel-eps", fz.rel_eps);
  fuzz_cmd->add_option("--seed", fz.seed);
  fuzz_cmd->add_option("--mode", fz.mode, "guided or random");
  fuzz_cmd->add_flag("--speculative", fz.speculative);
  fuzz_cmd->add_flag("--no-oracle", fz.no_oracle);
  fuzz_cmd->add_option("--timeout-ms", fz.timeout_ms, "per-request runner timeout");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Matrix-form vs per-element accumulation");
  bench_cmd->add_option("--m", bench.m, "neurons");
  bench_cmd->add_option("--batches", bench.batches);
  bench_cmd->add_option("--batch-size", bench.batch_size);
  bench_cmd->add_option("--seed", bench.seed);
  bench_cmd->add_option("--absorbed", bench.absorbed, "batches absorbed before the late merge timing");
  bench_cmd->add_option("--trials", bench.trials, "timed merges per point (0 skips)");

  SynthArgs syn;
  auto* synth_cmd = app.add_subcommand("synth", "Toy data, models and dataset variants");
  synth_cmd->require_subcommand(1);
  auto* toy_cmd = synth_cmd->add_subcommand("toy", "Blind-spot toy: model.json, train.csv, seeds.csv");
  toy_cmd->add_option("--out", syn.out, "output directory")->required();
  toy_cmd->add_option("--seed", syn.seed);
  auto* cls_cmd = synth_cmd->add_subcommand("classifier", "Gaussian blobs plus a trained MLP");
  cls_cmd->add_option("--out", syn.out, "output directory")->required();
  cls_cmd->add_option("--seed", syn.seed);
  cls_cmd->add_option("--classes", syn.classes);
  cls_cmd->add_option("--per-class", syn.per_class);
  cls_cmd->add_option("--test-per-class", syn.test_per_class);
  cls_cmd->add_option("--dim", syn.dim);
  cls_cmd->add_option("--separation", syn.separation, "center distance in units of sigma");
  cls_cmd->add_option("--hidden", syn.hidden, "hidden widths");
  cls_cmd->add_option("--epochs", syn.epochs);
  cls_cmd->add_option("--lr", syn.lr);
  cls_cmd->add_option("--target-accuracy", syn.target);
  auto* var_cmd = synth_cmd->add_subcommand("variant", "Noisy x1 / x10 copies of a CSV input set");
  var_cmd->add_option("--input", syn.input, "base CSV")->required();
  var_cmd->add_option("--out", syn.out, "output CSV")->required();
  var_cmd->add_option("--variant", syn.variant, "base, x1 or x10");
  var_cmd->add_option("--bound", syn.bound, "uniform noise bound");
  var_cmd->add_option("--sources", syn.sources, "inputs picked for mutation");
  var_cmd->add_option("--seed", syn.seed);
  auto* trace_cmd = synth_cmd->add_subcommand("trace", "Run CSV inputs through a model into an .nlct trace");
  trace_cmd->add_option("--input", syn.input, "input CSV")->required();
  trace_cmd->add_option("--out", syn.out, "output .nlct")->required();
  trace_cmd->add_option("--model", syn.model, "MLP model JSON");
  trace_cmd->add_option("--runner", syn.runner, "external runner command line");
  trace_cmd->add_flag("--no-labels", syn.no_labels, "omit labels from the trace");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print the header of an .nlct or .nlcs file");
  inspect_cmd->add_option("file", inspect_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[usage]: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit);
    if (*cov_cmd) return cmd_coverage(cov);
    if (*fuzz_cmd) return cmd_fuzz(fz);
    if (*bench_cmd) return cmd_bench(bench);
    if (*toy_cmd) return cmd_synth_toy(syn);
    if (*cls_cmd) return cmd_synth_classifier(syn);
    if (*var_cmd) return cmd_synth_variant(syn);
    if (*trace_cmd) return cmd_synth_trace(syn);
    if (*inspect_cmd) return cmd_inspect(inspect_path);
  } catch (const nlc::Error& e) {
    std::cerr << "error[" << nlc::errc_name(e.code()) << "]: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error[io]: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
