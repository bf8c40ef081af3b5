#pragma once

// Coverage criteria over per-layer neuron outputs: NLC plus the eight
// neuron-level baselines (NC, NCS, KMNC, NBC, SNAC, TKNC, TKNP, CC).
//
// Every criterion is an incrementally updatable state with a scalar value.
// Percentage criteria report values in [0, 100]; TKNP and CC report counts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include "nlc/accum.hpp"
#include "nlc/error.hpp"

namespace nlc {

struct LayerMeta {
  std::string name;
  std::size_t neurons = 0;

  bool operator==(const LayerMeta&) const = default;
};

using LayerList = std::vector<LayerMeta>;

inline std::size_t total_neurons(const LayerList& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.neurons;
  return n;
}

inline void validate_layers(const LayerList& layers) {
  if (layers.empty()) fail(Errc::invalid_argument, "layer list is empty");
  std::set<std::string> seen;
  for (const auto& l : layers) {
    if (l.neurons == 0) fail(Errc::invalid_argument, "layer '" + l.name + "' has zero neurons");
    if (!seen.insert(l.name).second) fail(Errc::invalid_argument, "duplicate layer name '" + l.name + "'");
  }
}

/// Outputs of every traced layer for a batch of n inputs.
struct ActivationBatch {
  std::vector<RowMatrix> layers;  // one n x m_l matrix per layer
  std::optional<std::vector<std::uint32_t>> labels;

  std::size_t size() const noexcept { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().rows()); }

  /// Single-input batch from per-layer activation vectors.
  static ActivationBatch single(const std::vector<std::vector<double>>& per_layer,
                                std::optional<std::uint32_t> label = std::nullopt) {
    ActivationBatch b;
    b.layers.reserve(per_layer.size());
    for (const auto& v : per_layer) {
      RowMatrix row(1, static_cast<Eigen::Index>(v.size()));
      for (std::size_t j = 0; j < v.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = v[j];
      b.layers.push_back(std::move(row));
    }
    if (label) b.labels = std::vector<std::uint32_t>{*label};
    return b;
  }
};

inline void check_batch(const LayerList& layers, const ActivationBatch& batch) {
  if (batch.layers.size() != layers.size()) {
    fail(Errc::shape_mismatch, "batch has " + std::to_string(batch.layers.size()) + " layers, expected " +
                                   std::to_string(layers.size()));
  }
  const auto n = batch.size();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& x = batch.layers[l];
    if (static_cast<std::size_t>(x.rows()) != n) {
      fail(Errc::shape_mismatch, "layer '" + layers[l].name + "' has a different row count than layer 0");
    }
    if (static_cast<std::size_t>(x.cols()) != layers[l].neurons) {
      fail(Errc::shape_mismatch, "layer '" + layers[l].name + "' has " + std::to_string(x.cols()) +
                                     " neurons, expected " + std::to_string(layers[l].neurons));
    }
  }
  if (batch.labels && batch.labels->size() != n) fail(Errc::shape_mismatch, "label count differs from batch size");
}

/// Per-neuron [low, high] observed over training inputs.
struct RangeTable {
  std::vector<std::vector<double>> low;
  std::vector<std::vector<double>> high;

  bool operator==(const RangeTable&) const = default;
};

/// Exact per-neuron min/max over a stream of batches.
class RangeFitter {
 public:
  explicit RangeFitter(const LayerList& layers) : layers_(layers) {
    for (const auto& l : layers_) {
      table_.low.emplace_back(l.neurons, std::numeric_limits<double>::infinity());
      table_.high.emplace_back(l.neurons, -std::numeric_limits<double>::infinity());
    }
  }

  void observe(const ActivationBatch& batch) {
    check_batch(layers_, batch);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& x = batch.layers[l];
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          const double v = x(i, j);
          auto& lo = table_.low[l][static_cast<std::size_t>(j)];
          auto& hi = table_.high[l][static_cast<std::size_t>(j)];
          if (v < lo) lo = v;
          if (v > hi) hi = v;
        }
      }
    }
    seen_ += batch.size();
  }

  RangeTable finish() const {
    if (seen_ == 0) fail(Errc::empty_input, "cannot fit ranges on an empty trace");
    return table_;
  }

 private:
  LayerList layers_;
  RangeTable table_;
  std::size_t seen_ = 0;
};

/// `next()` yields std::optional<ActivationBatch>; nullopt ends the stream.
template <std::invocable BatchSource>
RangeTable fit_ranges(const LayerList& layers, BatchSource&& next) {
  RangeFitter fitter(layers);
  while (auto batch = next()) fitter.observe(*batch);
  return fitter.finish();
}

inline RangeTable fit_ranges(const LayerList& layers, const std::vector<ActivationBatch>& batches) {
  RangeFitter fitter(layers);
  for (const auto& b : batches) fitter.observe(b);
  return fitter.finish();
}

// ---------------------------------------------------------------------------
// Configuration

enum class CriterionKind : std::uint8_t { nlc = 1, nc, ncs, kmnc, nbc, snac, tknc, tknp, cc };

inline std::string_view kind_name(CriterionKind k) {
  switch (k) {
    case CriterionKind::nlc: return "nlc";
    case CriterionKind::nc: return "nc";
    case CriterionKind::ncs: return "ncs";
    case CriterionKind::kmnc: return "kmnc";
    case CriterionKind::nbc: return "nbc";
    case CriterionKind::snac: return "snac";
    case CriterionKind::tknc: return "tknc";
    case CriterionKind::tknp: return "tknp";
    case CriterionKind::cc: return "cc";
  }
  return "?";
}

inline CriterionKind parse_kind(std::string_view s) {
  for (auto k : {CriterionKind::nlc, CriterionKind::nc, CriterionKind::ncs, CriterionKind::kmnc, CriterionKind::nbc,
                 CriterionKind::snac, CriterionKind::tknc, CriterionKind::tknp, CriterionKind::cc}) {
    if (kind_name(k) == s) return k;
  }
  fail(Errc::invalid_argument, "unknown criterion '" + std::string(s) + "'");
}

inline bool needs_ranges(CriterionKind k) {
  return k == CriterionKind::kmnc || k == CriterionKind::nbc || k == CriterionKind::snac;
}

struct CriterionConfig {
  CriterionKind kind = CriterionKind::nlc;
  std::optional<double> t;        // NC / NCS threshold
  std::optional<std::size_t> k;   // KMNC segments, TKNC / TKNP top-K
  double cc_t = 0.0;              // CC distance threshold, must be > 0 for CC
  std::vector<std::string> layers;  // CC monitored layers; empty = final hidden layer
  bool class_conditional = false;
  std::size_t class_count = 0;    // required when class_conditional

  double threshold() const {
    if (t) return *t;
    return kind == CriterionKind::ncs ? 0.75 : 0.0;
  }
  std::size_t top_k() const {
    if (k) return *k;
    return kind == CriterionKind::kmnc ? 100 : 10;
  }
};

inline std::vector<std::string> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(sep, start);
    const auto piece = s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!piece.empty()) out.emplace_back(piece);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(std::string(v), &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    fail(Errc::invalid_argument, "bad real for " + std::string(key) + ": '" + std::string(v) + "'");
  }
}

inline std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v.front() == '-') throw std::invalid_argument("negative");
    const auto d = std::stoull(std::string(v), &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    fail(Errc::invalid_argument, "bad integer for " + std::string(key) + ": '" + std::string(v) + "'");
  }
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(Errc::invalid_argument, "bad boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

/// Applies one key=value pair. Returns false for keys this parser does not own.
inline bool apply_criterion_key(CriterionConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "criterion") cfg.kind = parse_kind(value);
  else if (key == "t") cfg.t = parse_double(key, value);
  else if (key == "k") cfg.k = parse_uint(key, value);
  else if (key == "cc_t") cfg.cc_t = parse_double(key, value);
  else if (key == "layers") cfg.layers = split_list(value);
  else if (key == "class_conditional") cfg.class_conditional = parse_bool(key, value);
  else if (key == "classes") cfg.class_count = parse_uint(key, value);
  else return false;
  return true;
}

/// Splits "a=1 b = 2\nc=3" (whitespace, newline or ';' separated, '#' comments)
/// into key/value pairs.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string cleaned;
  cleaned.reserve(text.size());
  bool comment = false;
  for (char c : text) {
    if (c == '#') comment = true;
    if (c == '\n') comment = false;
    if (comment) continue;
    cleaned.push_back(c == ';' ? ' ' : c);
  }
  // Allow "key = value".
  std::string squeezed;
  for (std::size_t i = 0; i < cleaned.size(); ++i) {
    if (cleaned[i] == ' ' || cleaned[i] == '\t') {
      std::size_t j = i;
      while (j < cleaned.size() && (cleaned[j] == ' ' || cleaned[j] == '\t')) ++j;
      const bool before_eq = j < cleaned.size() && cleaned[j] == '=';
      const bool after_eq = !squeezed.empty() && squeezed.back() == '=';
      if (before_eq || after_eq) {
        i = j - 1;
        continue;
      }
    }
    squeezed.push_back(cleaned[i]);
  }
  cleaned = std::move(squeezed);
  std::istringstream is(cleaned);
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0) fail(Errc::invalid_argument, "expected key=value, got '" + token + "'");
    out.emplace_back(token.substr(0, eq), token.substr(eq + 1));
  }
  return out;
}

inline CriterionConfig parse_criterion_config(std::string_view text) {
  CriterionConfig cfg;
  for (const auto& [k, v] : parse_key_values(text)) {
    if (!apply_criterion_key(cfg, k, v)) fail(Errc::invalid_argument, "unknown criterion key '" + k + "'");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// States

struct NlcState {
  LayerList layers;
  bool class_conditional = false;
  std::size_t classes = 1;
  std::vector<std::vector<CovAccumulator>> acc;  // [layer][class slot]

  bool operator==(const NlcState&) const = default;
};

template <bool Rescaled>
struct ThresholdState {
  LayerList layers;
  double t = 0.0;
  std::vector<std::vector<std::uint8_t>> activated;

  bool operator==(const ThresholdState&) const = default;
};
using NcState = ThresholdState<false>;
using NcsState = ThresholdState<true>;

struct KmncState {
  LayerList layers;
  std::size_t k = 0;
  std::optional<RangeTable> ranges;
  std::vector<std::vector<std::uint8_t>> segments;  // [layer][neuron * k + segment]

  bool operator==(const KmncState&) const = default;
};

template <bool UpperOnly>
struct BoundaryState {
  LayerList layers;
  std::optional<RangeTable> ranges;
  std::vector<std::vector<std::uint8_t>> lower;
  std::vector<std::vector<std::uint8_t>> upper;

  bool operator==(const BoundaryState&) const = default;
};
using NbcState = BoundaryState<false>;
using SnacState = BoundaryState<true>;

struct TkncState {
  LayerList layers;
  std::size_t k = 0;
  std::vector<std::vector<std::uint8_t>> flagged;

  bool operator==(const TkncState&) const = default;
};

struct TknpState {
  LayerList layers;
  std::size_t k = 0;
  std::unordered_set<std::uint64_t> patterns;

  bool operator==(const TknpState&) const = default;
};

struct CcState {
  LayerList layers;
  double t = 0.0;
  std::vector<std::size_t> monitored;  // indices into layers
  std::vector<std::vector<std::vector<double>>> centers;  // [monitored slot][cluster] -> center

  bool operator==(const CcState&) const = default;
};

using CriterionState = std::variant<NlcState, NcState, NcsState, KmncState, NbcState, SnacState, TkncState,
                                    TknpState, CcState>;

namespace detail {

inline std::vector<std::vector<std::uint8_t>> zero_flags(const LayerList& layers, std::size_t per_neuron = 1) {
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.emplace_back(l.neurons * per_neuron, std::uint8_t{0});
  return out;
}

inline std::size_t count_set(const std::vector<std::uint8_t>& v) {
  return static_cast<std::size_t>(std::count(v.begin(), v.end(), std::uint8_t{1}));
}

/// Indices of the k largest entries of `row`; ties go to the lower index.
inline void top_k_indices(const double* row, std::size_t m, std::size_t k, std::vector<std::uint32_t>& idx) {
  idx.resize(m);
  std::iota(idx.begin(), idx.end(), 0u);
  const auto kk = std::min(k, m);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(),
                    [row](std::uint32_t a, std::uint32_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
  idx.resize(kk);
}

inline void check_ranges(const LayerList& layers, const RangeTable& r) {
  if (r.low.size() != layers.size() || r.high.size() != layers.size()) {
    fail(Errc::shape_mismatch, "range table layer count does not match");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (r.low[l].size() != layers[l].neurons || r.high[l].size() != layers[l].neurons) {
      fail(Errc::shape_mismatch, "range table width does not match layer '" + layers[l].name + "'");
    }
    for (std::size_t j = 0; j < layers[l].neurons; ++j) {
      if (!(r.low[l][j] <= r.high[l][j])) fail(Errc::invalid_argument, "range table has low > high");
    }
  }
}

inline std::uint64_t fnv1a(std::uint64_t h, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) {
    h ^= (v >> (8 * b)) & 0xffu;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// The KMNC segment an in-range output falls into; -1 when out of range.
inline std::ptrdiff_t kmnc_segment(double x, double low, double high, std::size_t k) {
  if (x < low || x > high) return -1;
  if (x == high) return static_cast<std::ptrdiff_t>(k) - 1;
  const auto seg = static_cast<std::ptrdiff_t>(std::floor(static_cast<double>(k) * (x - low) / (high - low)));
  return std::clamp<std::ptrdiff_t>(seg, 0, static_cast<std::ptrdiff_t>(k) - 1);
}

}  // namespace detail

/// Default CC layer: the final hidden layer, i.e. the second-to-last traced
/// layer when there are at least two, otherwise the only layer.
inline std::size_t default_cc_layer(const LayerList& layers) { return layers.size() >= 2 ? layers.size() - 2 : 0; }

class Criterion {
 public:
  Criterion() = default;
  explicit Criterion(CriterionState state) : state_(std::move(state)) {}

  /// Builds an empty state. Range-based criteria need `ranges` before update.
  static Criterion create(const CriterionConfig& cfg, const LayerList& layers,
                          const std::optional<RangeTable>& ranges = std::nullopt) {
    validate_layers(layers);
    switch (cfg.kind) {
      case CriterionKind::nlc: {
        NlcState s{layers, cfg.class_conditional, 1, {}};
        if (cfg.class_conditional) {
          if (cfg.class_count == 0) fail(Errc::invalid_argument, "class-conditional NLC needs classes > 0");
          s.classes = cfg.class_count;
        }
        for (const auto& l : layers) s.acc.emplace_back(s.classes, CovAccumulator(l.neurons));
        return Criterion(std::move(s));
      }
      case CriterionKind::nc: return Criterion(NcState{layers, cfg.threshold(), detail::zero_flags(layers)});
      case CriterionKind::ncs: return Criterion(NcsState{layers, cfg.threshold(), detail::zero_flags(layers)});
      case CriterionKind::kmnc: {
        const auto k = cfg.top_k();
        if (k == 0) fail(Errc::invalid_argument, "KMNC needs k >= 1");
        KmncState s{layers, k, std::nullopt, detail::zero_flags(layers, k)};
        Criterion c(std::move(s));
        if (ranges) c.fit(*ranges);
        return c;
      }
      case CriterionKind::nbc: {
        Criterion c(NbcState{layers, std::nullopt, detail::zero_flags(layers), detail::zero_flags(layers)});
        if (ranges) c.fit(*ranges);
        return c;
      }
      case CriterionKind::snac: {
        Criterion c(SnacState{layers, std::nullopt, detail::zero_flags(layers), detail::zero_flags(layers)});
        if (ranges) c.fit(*ranges);
        return c;
      }
      case CriterionKind::tknc: {
        const auto k = cfg.top_k();
        if (k == 0) fail(Errc::invalid_argument, "TKNC needs k >= 1");
        for (const auto& l : layers) {
          if (k > l.neurons) {
            fail(Errc::invalid_argument, "TKNC k=" + std::to_string(k) + " exceeds the " + std::to_string(l.neurons) +
                                             " neurons of layer '" + l.name + "'");
          }
        }
        return Criterion(TkncState{layers, k, detail::zero_flags(layers)});
      }
      case CriterionKind::tknp: {
        const auto k = cfg.top_k();
        if (k == 0) fail(Errc::invalid_argument, "TKNP needs k >= 1");
        return Criterion(TknpState{layers, k, {}});
      }
      case CriterionKind::cc: {
        if (!(cfg.cc_t > 0.0)) fail(Errc::invalid_argument, "CC needs a distance threshold cc_t > 0");
        CcState s{layers, cfg.cc_t, {}, {}};
        if (cfg.layers.empty()) {
          s.monitored.push_back(default_cc_layer(layers));
        } else {
          for (const auto& name : cfg.layers) {
            auto it = std::find_if(layers.begin(), layers.end(), [&](const LayerMeta& l) { return l.name == name; });
            if (it == layers.end()) fail(Errc::invalid_argument, "CC layer '" + name + "' is not traced");
            s.monitored.push_back(static_cast<std::size_t>(it - layers.begin()));
          }
        }
        s.centers.resize(s.monitored.size());
        return Criterion(std::move(s));
      }
    }
    fail(Errc::invalid_argument, "unhandled criterion kind");
  }

  CriterionKind kind() const {
    return std::visit(
        [](const auto& s) -> CriterionKind {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, NlcState>) return CriterionKind::nlc;
          else if constexpr (std::is_same_v<S, NcState>) return CriterionKind::nc;
          else if constexpr (std::is_same_v<S, NcsState>) return CriterionKind::ncs;
          else if constexpr (std::is_same_v<S, KmncState>) return CriterionKind::kmnc;
          else if constexpr (std::is_same_v<S, NbcState>) return CriterionKind::nbc;
          else if constexpr (std::is_same_v<S, SnacState>) return CriterionKind::snac;
          else if constexpr (std::is_same_v<S, TkncState>) return CriterionKind::tknc;
          else if constexpr (std::is_same_v<S, TknpState>) return CriterionKind::tknp;
          else return CriterionKind::cc;
        },
        state_);
  }

  const LayerList& layers() const {
    return std::visit([](const auto& s) -> const LayerList& { return s.layers; }, state_);
  }

  const CriterionState& state() const noexcept { return state_; }
  CriterionState& state() noexcept { return state_; }

  /// Installs training ranges; only meaningful for KMNC / NBC / SNAC.
  void fit(const RangeTable& ranges) {
    std::visit(
        [&](auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, KmncState> || std::is_same_v<S, NbcState> || std::is_same_v<S, SnacState>) {
            detail::check_ranges(s.layers, ranges);
            s.ranges = ranges;
          }
        },
        state_);
  }

  bool fitted() const {
    return std::visit(
        [](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, KmncState> || std::is_same_v<S, NbcState> || std::is_same_v<S, SnacState>) {
            return s.ranges.has_value();
          } else {
            return true;
          }
        },
        state_);
  }

  void update(const ActivationBatch& batch) {
    std::visit([&](auto& s) { update_impl(s, batch); }, state_);
  }

  /// Scalar coverage value.
  double value() const {
    return std::visit([](const auto& s) { return value_impl(s); }, state_);
  }

  /// Each layer's contribution to value(); the entries sum to value(). TKNP
  /// patterns span all layers and are not decomposable, so it returns empty.
  std::vector<double> per_layer() const {
    return std::visit([](const auto& s) { return per_layer_impl(s); }, state_);
  }

  Criterion snapshot() const { return *this; }
  void restore(const Criterion& snap) { *this = snap; }

  bool operator==(const Criterion&) const = default;

 private:
  static void update_impl(NlcState& s, const ActivationBatch& batch) {
    check_batch(s.layers, batch);
    if (batch.size() == 0) return;
    if (!s.class_conditional) {
      for (std::size_t l = 0; l < s.layers.size(); ++l) s.acc[l][0].absorb(batch.layers[l]);
      return;
    }
    if (!batch.labels) fail(Errc::invalid_argument, "class-conditional NLC update requires labels");
    std::vector<std::vector<Eigen::Index>> rows(s.classes);
    for (std::size_t i = 0; i < batch.labels->size(); ++i) {
      const auto c = (*batch.labels)[i];
      if (c >= s.classes) {
        fail(Errc::shape_mismatch, "label " + std::to_string(c) + " >= class count " + std::to_string(s.classes));
      }
      rows[c].push_back(static_cast<Eigen::Index>(i));
    }
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
      for (std::size_t c = 0; c < s.classes; ++c) {
        if (rows[c].empty()) continue;
        const RowMatrix part = batch.layers[l](rows[c], Eigen::all);
        s.acc[l][c].absorb(part);
      }
    }
  }

  template <bool Rescaled>
  static void update_impl(ThresholdState<Rescaled>& s, const ActivationBatch& batch) {
    check_batch(s.layers, batch);
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
      const auto& x = batch.layers[l];
      auto& flags = s.activated[l];
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double lo = 0.0;
        double span = 0.0;
        if constexpr (Rescaled) {
          lo = x.row(i).minCoeff();
          span = x.row(i).maxCoeff() - lo;
        }
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          double v = x(i, j);
          if constexpr (Rescaled) v = span > 0.0 ? (v - lo) / span : 0.0;
          if (v > s.t) flags[static_cast<std::size_t>(j)] = 1;
        }
      }
    }
  }

  static void update_impl(KmncState& s, const ActivationBatch& batch) {
    if (!s.ranges) fail(Errc::not_fitted, "KMNC update before fit");
    check_batch(s.layers, batch);
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
      const auto& x = batch.layers[l];
      const auto& lo = s.ranges->low[l];
      const auto& hi = s.ranges->high[l];
      auto& seg = s.segments[l];
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          const auto n = static_cast<std::size_t>(j);
          const auto idx = detail::kmnc_segment(x(i, j), lo[n], hi[n], s.k);
          if (idx >= 0) seg[n * s.k + static_cast<std::size_t>(idx)] = 1;
        }
      }
    }
  }

  template <bool UpperOnly>
  static void update_impl(BoundaryState<UpperOnly>& s, const ActivationBatch& batch) {
    if (!s.ranges) fail(Errc::not_fitted, UpperOnly ? "SNAC update before fit" : "NBC update before fit");
    check_batch(s.layers, batch);
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
      const auto& x = batch.layers[l];
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          const auto n = static_cast<std::size_t>(j);
          const double v = x(i, j);
          if (v > s.ranges->high[l][n]) s.upper[l][n] = 1;
          if (!UpperOnly && v < s.ranges->low[l][n]) s.lower[l][n] = 1;
        }
      }
    }
  }

  static void update_impl(TkncState& s, const ActivationBatch& batch) {
    check_batch(s.layers, batch);
    std::vector<std::uint32_t> idx;
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
      const auto& x = batch.layers[l];
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        detail::top_k_indices(x.row(i).data(), s.layers[l].neurons, s.k, idx);
        for (auto j : idx) s.flagged[l][j] = 1;
      }
    }
  }

  static void update_impl(TknpState& s, const ActivationBatch& batch) {
    check_batch(s.layers, batch);
    std::vector<std::uint32_t> idx;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      std::uint64_t h = 0xcbf29ce484222325ULL;
      for (std::size_t l = 0; l < s.layers.size(); ++l) {
        detail::top_k_indices(batch.layers[l].row(static_cast<Eigen::Index>(i)).data(), s.layers[l].neurons, s.k,
                              idx);
        std::sort(idx.begin(), idx.end());
        for (auto j : idx) h = detail::fnv1a(h, j);
        h = detail::fnv1a(h, 0xffffffffu);  // layer separator
      }
      s.patterns.insert(h);
    }
  }

  static void update_impl(CcState& s, const ActivationBatch& batch) {
    check_batch(s.layers, batch);
    const double t2 = s.t * s.t;
    for (std::size_t slot = 0; slot < s.monitored.size(); ++slot) {
      const auto& x = batch.layers[s.monitored[slot]];
      auto& centers = s.centers[slot];
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double* row = x.row(i).data();
        const auto m = static_cast<std::size_t>(x.cols());
        bool joined = false;
        for (const auto& c : centers) {
          double d2 = 0.0;
          for (std::size_t j = 0; j < m && d2 <= t2; ++j) {
            const double d = row[j] - c[j];
            d2 += d * d;
          }
          if (d2 <= t2) {
            joined = true;
            break;
          }
        }
        if (!joined) centers.emplace_back(row, row + m);
      }
    }
  }

  static std::vector<double> per_layer_impl(const NlcState& s) {
    std::vector<double> out;
    out.reserve(s.layers.size());
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
      const double m = static_cast<double>(s.layers[l].neurons);
      double v = 0.0;
      for (const auto& a : s.acc[l]) v += entrywise_l1(a.cov()) / (m * m);
      out.push_back(v);
    }
    return out;
  }

  template <bool Rescaled>
  static std::vector<double> per_layer_impl(const ThresholdState<Rescaled>& s) {
    return flag_share(s.layers, s.activated, 1.0);
  }

  static std::vector<double> per_layer_impl(const KmncState& s) {
    return flag_share(s.layers, s.segments, static_cast<double>(s.k));
  }

  template <bool UpperOnly>
  static std::vector<double> per_layer_impl(const BoundaryState<UpperOnly>& s) {
    if constexpr (UpperOnly) {
      return flag_share(s.layers, s.upper, 1.0);
    } else {
      auto lo = flag_share(s.layers, s.lower, 2.0);
      const auto hi = flag_share(s.layers, s.upper, 2.0);
      for (std::size_t l = 0; l < lo.size(); ++l) lo[l] += hi[l];
      return lo;
    }
  }

  static std::vector<double> per_layer_impl(const TkncState& s) { return flag_share(s.layers, s.flagged, 1.0); }

  static std::vector<double> per_layer_impl(const TknpState&) { return {}; }

  static std::vector<double> per_layer_impl(const CcState& s) {
    std::vector<double> out(s.layers.size(), 0.0);
    for (std::size_t slot = 0; slot < s.monitored.size(); ++slot) {
      out[s.monitored[slot]] += static_cast<double>(s.centers[slot].size());
    }
    return out;
  }

  // Flag criteria divide once over the whole model so the total is exactly
  // 100 * covered / units.
  static double value_impl(const NlcState& s) {
    const auto parts = per_layer_impl(s);
    return std::accumulate(parts.begin(), parts.end(), 0.0);
  }
  template <bool Rescaled>
  static double value_impl(const ThresholdState<Rescaled>& s) {
    return flag_total(s.layers, {&s.activated}, 1.0);
  }
  static double value_impl(const KmncState& s) { return flag_total(s.layers, {&s.segments}, static_cast<double>(s.k)); }
  template <bool UpperOnly>
  static double value_impl(const BoundaryState<UpperOnly>& s) {
    if constexpr (UpperOnly) return flag_total(s.layers, {&s.upper}, 1.0);
    else return flag_total(s.layers, {&s.lower, &s.upper}, 2.0);
  }
  static double value_impl(const TkncState& s) { return flag_total(s.layers, {&s.flagged}, 1.0); }
  static double value_impl(const TknpState& s) { return static_cast<double>(s.patterns.size()); }
  static double value_impl(const CcState& s) {
    std::size_t n = 0;
    for (const auto& c : s.centers) n += c.size();
    return static_cast<double>(n);
  }

  static double flag_total(const LayerList& layers,
                           std::initializer_list<const std::vector<std::vector<std::uint8_t>>*> sets,
                           double units_per_neuron) {
    std::size_t covered = 0;
    for (const auto* set : sets) {
      for (const auto& f : *set) covered += detail::count_set(f);
    }
    return 100.0 * static_cast<double>(covered) / (static_cast<double>(total_neurons(layers)) * units_per_neuron);
  }

  // 100 * set flags / (total neurons * units per neuron), split by layer.
  static std::vector<double> flag_share(const LayerList& layers, const std::vector<std::vector<std::uint8_t>>& flags,
                                        double units_per_neuron) {
    const double denom = static_cast<double>(total_neurons(layers)) * units_per_neuron;
    std::vector<double> out;
    out.reserve(layers.size());
    for (const auto& f : flags) out.push_back(100.0 * static_cast<double>(detail::count_set(f)) / denom);
    return out;
  }

  CriterionState state_;
};

}  // namespace nlc
