#pragma once

// Coverage-guided mutation loop.
//
// Each iteration samples a seed from the pool and tries up to `num`
// mutations. A mutant is admitted to the pool when it passes the validity
// check and strictly increases coverage; the loop then moves on to the next
// iteration. Coverage increase is judged by tentatively absorbing the
// mutant's activations into a snapshot of the criterion and rolling back on
// rejection. Every valid mutant is also checked against the seed's expected
// label and recorded as a fault when the prediction differs.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlc/criteria.hpp"
#include "nlc/error.hpp"
#include "nlc/image.hpp"
#include "nlc/mutate.hpp"
#include "nlc/random.hpp"
#include "nlc/runner.hpp"
#include "nlc/trace.hpp"

namespace nlc {

enum class FuzzMode {
  guided,  // validity + coverage gate
  random,  // gate always passes
};

struct FuzzConfig {
  std::size_t max_iterations = 10'000;
  std::size_t num = 50;  // mutation tries per iteration
  ValidityParams validity;
  double rel_eps = 1e-7;
  CriterionConfig criterion;
  std::vector<MutationOp> ops = default_ops();
  std::uint64_t seed = 0;
  FuzzMode mode = FuzzMode::guided;
  bool check_oracle = true;  // prediction != expected label => fault
  std::size_t trajectory_every = 100;
  bool speculative = false;

  void check() const {
    if (max_iterations == 0) fail(Errc::invalid_argument, "max_iterations must be >= 1");
    if (num == 0) fail(Errc::invalid_argument, "num must be >= 1");
    if (ops.empty()) fail(Errc::invalid_argument, "no mutation operators configured");
    if (!(rel_eps >= 0.0)) fail(Errc::invalid_argument, "rel_eps must be >= 0");
    validity.check();
  }
};

namespace detail {

inline Range parse_range(std::string_view key, std::string_view v) {
  const auto colon = v.find(':');
  if (colon == std::string_view::npos) {
    fail(Errc::invalid_argument, std::string(key) + " expects lo:hi, got '" + std::string(v) + "'");
  }
  Range r{parse_double(key, v.substr(0, colon)), parse_double(key, v.substr(colon + 1))};
  if (r.lo > r.hi) fail(Errc::invalid_argument, std::string(key) + " range is empty");
  return r;
}

}  // namespace detail

/// Applies one fuzz-config key. Criterion keys are forwarded.
inline void apply_fuzz_key(FuzzConfig& cfg, std::string_view key, std::string_view v) {
  if (apply_criterion_key(cfg.criterion, key, v)) return;
  if (key == "max_iterations") cfg.max_iterations = parse_uint(key, v);
  else if (key == "num") cfg.num = parse_uint(key, v);
  else if (key == "alpha") cfg.validity.alpha = parse_double(key, v);
  else if (key == "beta") cfg.validity.beta = parse_double(key, v);
  else if (key == "rel_eps") cfg.rel_eps = parse_double(key, v);
  else if (key == "seed") cfg.seed = parse_uint(key, v);
  else if (key == "speculative") cfg.speculative = parse_bool(key, v);
  else if (key == "oracle") cfg.check_oracle = parse_bool(key, v);
  else if (key == "mode") {
    if (v == "guided") cfg.mode = FuzzMode::guided;
    else if (v == "random") cfg.mode = FuzzMode::random;
    else fail(Errc::invalid_argument, "mode must be guided or random");
  } else if (key == "ops") {
    // Keep any ranges already configured for operators that stay selected.
    std::vector<MutationOp> ops;
    for (const auto& name : split_list(v)) {
      auto op = op_from_name(name);
      for (const auto& existing : cfg.ops) {
        if (existing.index() == op.index()) op = existing;
      }
      ops.push_back(op);
    }
    cfg.ops = std::move(ops);
  } else {
    auto set_op = [&](auto updated) {
      for (auto& op : cfg.ops) {
        if (op.index() == MutationOp(updated).index()) {
          op = updated;
          return;
        }
      }
      cfg.ops.push_back(updated);
    };
    if (key == "contrast_range") set_op(Contrast{detail::parse_range(key, v)});
    else if (key == "brightness_range") set_op(Brightness{detail::parse_range(key, v)});
    else if (key == "translate_max") set_op(Translate{parse_double(key, v)});
    else if (key == "scale_range") set_op(Scale{detail::parse_range(key, v)});
    else if (key == "rotate_max") set_op(Rotate{parse_double(key, v)});
    else if (key == "blur_range") set_op(Blur{detail::parse_range(key, v)});
    else fail(Errc::invalid_argument, "unknown fuzz config key '" + std::string(key) + "'");
  }
}

inline FuzzConfig parse_fuzz_config(std::string_view text, FuzzConfig base = {}) {
  for (const auto& [k, v] : parse_key_values(text)) apply_fuzz_key(base, k, v);
  return base;
}

struct SeedEntry {
  ImageTensor image;
  std::uint32_t expected_label = 0;
  std::size_t origin = 0;              // index of the original seed
  std::vector<std::string> op_chain;   // operators applied, oldest first
};

struct FaultRecord {
  std::size_t iteration = 0;
  std::size_t origin = 0;
  std::uint32_t expected = 0;
  std::uint32_t predicted = 0;
  bool accepted = false;
};

struct TrajectoryPoint {
  std::size_t iteration = 0;
  double coverage = 0.0;
};

struct FuzzReport {
  std::size_t iterations = 0;
  std::size_t evaluated = 0;       // mutants produced
  std::size_t valid = 0;           // mutants passing the validity check
  std::size_t accepted = 0;        // mutants admitted to the pool
  std::size_t faults = 0;          // valid mutants mispredicted
  std::size_t accepted_faults = 0; // admitted mutants mispredicted
  double fault_rate = 0.0;         // faults / valid, percent
  std::vector<std::size_t> fault_histogram;  // by predicted class
  std::size_t fault_classes = 0;
  double entropy = 0.0;
  double initial_coverage = 0.0;
  double final_coverage = 0.0;
  std::vector<TrajectoryPoint> trajectory;
  bool complete = true;
  std::string error;
};

struct FuzzResult {
  FuzzReport report;
  std::vector<SeedEntry> corpus;  // seeds followed by admitted mutants
  std::vector<FaultRecord> faults;
};

/// Distinct predicted classes among faults and the normalized entropy
/// -(1/log|C|) sum p_c log p_c of their distribution. No faults gives (0, 0).
struct FaultDiversity {
  std::size_t classes = 0;
  double entropy = 0.0;
};

inline FaultDiversity report_metrics(const std::vector<std::size_t>& histogram, std::size_t class_count) {
  if (class_count == 0) fail(Errc::invalid_argument, "class count must be >= 1");
  FaultDiversity out;
  std::size_t total = 0;
  for (auto c : histogram) total += c;
  if (total == 0) return out;
  double h = 0.0;
  for (auto c : histogram) {
    if (c == 0) continue;
    ++out.classes;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  out.entropy = class_count > 1 ? h / std::log(static_cast<double>(class_count)) : 0.0;
  return out;
}

/// Optional hook for observing each candidate; used by tests to check
/// rollback soundness. `before` is the state prior to the candidate, `after`
/// the state once the candidate was accepted or rolled back.
struct FuzzObserver {
  std::function<void(const Criterion& before, const Criterion& after, bool accepted)> on_candidate;
};

/// Runs the loop. On a runner failure the partial result is returned with
/// report.complete = false.
///
/// Each iteration draws from its own split of the master generator, and each
/// candidate from its own split of the iteration's, so speculative mode
/// (all `num` candidates mutated and run up front, in parallel when the
/// runner allows it) consumes randomness identically to sequential mode.
inline FuzzResult run_fuzz(const FuzzConfig& config, Runner& runner, Criterion& criterion,
                           const std::vector<SeedEntry>& seeds, const FuzzObserver& observer = {}) {
  config.check();
  if (seeds.empty()) fail(Errc::empty_input, "fuzzing needs at least one seed");
  const auto& info = runner.info();
  if (criterion.layers() != info.layers) fail(Errc::shape_mismatch, "criterion layers differ from the runner handshake");

  FuzzResult result;
  auto& report = result.report;
  report.fault_histogram.assign(info.classes, 0);
  result.corpus = seeds;
  report.initial_coverage = criterion.value();

  const bool guided = config.mode == FuzzMode::guided;

  struct Candidate {
    std::size_t op = 0;
    ImageTensor image;
    bool valid = false;
    RunResult run;
  };
  auto make_candidate = [&](const ImageTensor& parent, Rng rng) {
    Candidate c;
    c.op = static_cast<std::size_t>(rng.below(config.ops.size()));
    c.image = apply(config.ops[c.op], parent, rng);
    c.valid = !guided || is_valid(parent, c.image, config.validity);
    if (c.valid) c.run = runner.run(c.image);
    return c;
  };

  Rng master(config.seed);
  try {
    for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
      Rng iter_rng = master.split();
      const std::size_t pick = static_cast<std::size_t>(iter_rng.below(result.corpus.size()));
      const SeedEntry parent = result.corpus[pick];

      std::vector<Candidate> ahead;
      if (config.speculative) {
        std::vector<Rng> rngs;
        for (std::size_t a = 0; a < config.num; ++a) rngs.push_back(iter_rng.split());
        ahead.resize(config.num);
        if (runner.concurrent()) {
          std::vector<std::future<Candidate>> futures;
          for (std::size_t a = 0; a < config.num; ++a) {
            futures.push_back(std::async(std::launch::async, make_candidate, std::cref(parent.image), rngs[a]));
          }
          for (std::size_t a = 0; a < config.num; ++a) ahead[a] = futures[a].get();
        } else {
          for (std::size_t a = 0; a < config.num; ++a) ahead[a] = make_candidate(parent.image, rngs[a]);
        }
      }

      for (std::size_t attempt = 0; attempt < config.num; ++attempt) {
        Candidate cand = config.speculative ? std::move(ahead[attempt]) : make_candidate(parent.image, iter_rng.split());
        ++report.evaluated;
        if (!cand.valid) continue;
        ++report.valid;

        const RunResult& run = cand.run;
        const bool is_fault = config.check_oracle && run.label != parent.expected_label;
        if (is_fault) {
          ++report.faults;
          ++report.fault_histogram.at(run.label);
        }

        bool accept = true;
        const double before_value = criterion.value();
        std::optional<Criterion> snapshot;
        if (guided || observer.on_candidate) snapshot = criterion.snapshot();
        criterion.update(ActivationBatch::single(run.activations, run.label));
        if (guided) {
          const double after_value = criterion.value();
          const double threshold = before_value + config.rel_eps * std::max(std::abs(before_value), 1e-12);
          accept = after_value > threshold;
          if (!accept) criterion.restore(*snapshot);
        }
        if (observer.on_candidate) observer.on_candidate(*snapshot, criterion, accept);

        if (is_fault) {
          result.faults.push_back({iter, parent.origin, parent.expected_label, run.label, accept});
        }
        if (accept) {
          ++report.accepted;
          if (is_fault) ++report.accepted_faults;
          SeedEntry child{std::move(cand.image), parent.expected_label, parent.origin, parent.op_chain};
          child.op_chain.emplace_back(op_name(config.ops[cand.op]));
          result.corpus.push_back(std::move(child));
          break;
        }
      }
      report.iterations = iter + 1;
      if (config.trajectory_every > 0 && (iter + 1) % config.trajectory_every == 0) {
        report.trajectory.push_back({iter + 1, criterion.value()});
      }
    }
  } catch (const Error& e) {
    if (e.code() != Errc::runner) throw;
    report.complete = false;
    report.error = e.what();
  }

  report.final_coverage = criterion.value();
  if (report.trajectory.empty() || report.trajectory.back().iteration != report.iterations) {
    report.trajectory.push_back({report.iterations, report.final_coverage});
  }
  report.fault_rate = report.valid ? 100.0 * static_cast<double>(report.faults) / static_cast<double>(report.valid) : 0.0;
  const auto div = report_metrics(report.fault_histogram, std::max<std::size_t>(info.classes, 1));
  report.fault_classes = div.classes;
  report.entropy = div.entropy;
  return result;
}

inline nlohmann::json report_to_json(const FuzzReport& r) {
  nlohmann::json j;
  j["iterations"] = r.iterations;
  j["evaluated"] = r.evaluated;
  j["valid"] = r.valid;
  j["accepted"] = r.accepted;
  j["faults"] = r.faults;
  j["accepted_faults"] = r.accepted_faults;
  j["fault_rate"] = r.fault_rate;
  j["fault_histogram"] = r.fault_histogram;
  j["fault_classes"] = r.fault_classes;
  j["entropy"] = r.entropy;
  j["initial_coverage"] = r.initial_coverage;
  j["final_coverage"] = r.final_coverage;
  auto& traj = j["trajectory"] = nlohmann::json::array();
  for (const auto& p : r.trajectory) traj.push_back({{"iteration", p.iteration}, {"coverage", p.coverage}});
  j["complete"] = r.complete;
  if (!r.complete) j["error"] = r.error;
  return j;
}

/// Checks a report document against the published schema; returns the list
/// of problems (empty when valid).
inline std::vector<std::string> validate_report_json(const nlohmann::json& j) {
  std::vector<std::string> problems;
  auto need = [&](const char* key, auto pred, const char* type) {
    if (!j.contains(key)) problems.push_back(std::string("missing ") + key);
    else if (!pred(j.at(key))) problems.push_back(std::string(key) + " is not " + type);
  };
  auto is_uint = [](const nlohmann::json& v) { return v.is_number_unsigned(); };
  auto is_num = [](const nlohmann::json& v) { return v.is_number(); };
  need("iterations", is_uint, "a non-negative integer");
  need("evaluated", is_uint, "a non-negative integer");
  need("valid", is_uint, "a non-negative integer");
  need("accepted", is_uint, "a non-negative integer");
  need("faults", is_uint, "a non-negative integer");
  need("accepted_faults", is_uint, "a non-negative integer");
  need("fault_rate", is_num, "a number");
  need("fault_classes", is_uint, "a non-negative integer");
  need("entropy", is_num, "a number");
  need("initial_coverage", is_num, "a number");
  need("final_coverage", is_num, "a number");
  need("complete", [](const nlohmann::json& v) { return v.is_boolean(); }, "a boolean");
  need("fault_histogram", [](const nlohmann::json& v) { return v.is_array(); }, "an array");
  need("trajectory", [](const nlohmann::json& v) { return v.is_array(); }, "an array");
  if (!problems.empty()) return problems;

  const auto evaluated = j["evaluated"].get<std::size_t>();
  const auto valid = j["valid"].get<std::size_t>();
  const auto accepted = j["accepted"].get<std::size_t>();
  const auto faults = j["faults"].get<std::size_t>();
  if (valid > evaluated) problems.push_back("valid > evaluated");
  if (accepted > valid) problems.push_back("accepted > valid");
  if (faults > valid) problems.push_back("faults > valid");
  if (j["accepted_faults"].get<std::size_t>() > accepted) problems.push_back("accepted_faults > accepted");
  const double e = j["entropy"].get<double>();
  if (!(e >= 0.0 && e <= 1.0 + 1e-12)) problems.push_back("entropy outside [0, 1]");
  std::size_t hist = 0;
  for (const auto& c : j["fault_histogram"]) {
    if (!c.is_number_unsigned()) problems.push_back("fault_histogram entry is not a count");
    else hist += c.get<std::size_t>();
  }
  if (hist != faults) problems.push_back("fault_histogram does not sum to faults");
  for (const auto& p : j["trajectory"]) {
    if (!p.is_object() || !p.contains("iteration") || !p.contains("coverage")) {
      problems.push_back("malformed trajectory point");
      break;
    }
  }
  return problems;
}

/// Writes the pool: one .nlct trace of every entry's activations (labelled
/// with expected labels), one raw f32 file per admitted mutant, and a JSON
/// manifest of provenance chains.
inline void write_corpus(const std::filesystem::path& dir, const FuzzResult& result, std::size_t seed_count,
                         Runner& runner) {
  std::filesystem::create_directories(dir / "inputs");
  const auto& info = runner.info();
  TraceHeader header{info.layers, 0, true, static_cast<std::uint32_t>(info.classes)};
  TraceWriter trace((dir / "corpus.nlct").string(), header);
  nlohmann::json manifest;
  manifest["input_shape"] = info.input_shape;
  auto& entries = manifest["entries"] = nlohmann::json::array();
  for (std::size_t i = 0; i < result.corpus.size(); ++i) {
    const auto& e = result.corpus[i];
    const auto run = runner.run(e.image);
    trace.write(run.activations, e.expected_label);
    nlohmann::json entry{{"index", i}, {"origin", e.origin}, {"expected_label", e.expected_label},
                         {"predicted_label", run.label}, {"ops", e.op_chain}, {"seed", i < seed_count}};
    if (i >= seed_count) {
      const auto name = "mutant_" + std::to_string(i) + ".f32";
      std::ofstream out(dir / "inputs" / name, std::ios::binary);
      for (float v : e.image.data) bytes::write<float>(out, v);
      if (!out) fail(Errc::io, "failed writing corpus input " + name);
      entry["file"] = "inputs/" + name;
    }
    entries.push_back(std::move(entry));
  }
  trace.close();
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << '\n';
  if (!mf) fail(Errc::io, "failed writing corpus manifest");
}

}  // namespace nlc
