#pragma once

// .nlcs criterion state files.
//
//   magic "NLCS" | version u32 | block_count u32
//   block_count x { neurons u32 | count u64 | mean f64[m] | cov f64[m(m+1)/2] }
//   criterion tag u8 | criterion payload
//
// The leading accumulator section holds NLC covariance state (one block per
// layer, or per layer and class when class-conditional, class-minor). Other
// criteria write block_count = 0 and keep their state in the payload. See
// FORMATS.md for the per-criterion payloads.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nlc/accum.hpp"
#include "nlc/bytes.hpp"
#include "nlc/criteria.hpp"
#include "nlc/error.hpp"

namespace nlc {

inline constexpr char kStateMagic[4] = {'N', 'L', 'C', 'S'};
inline constexpr std::uint32_t kStateVersion = 1;

namespace state_detail {

inline void write_accumulator(std::ostream& os, const CovAccumulator& a) {
  bytes::write<std::uint32_t>(os, static_cast<std::uint32_t>(a.dim()));
  bytes::write<std::uint64_t>(os, a.count());
  for (double v : a.mean()) bytes::write<double>(os, v);
  for (double v : a.cov().packed()) bytes::write<double>(os, v);
}

inline CovAccumulator read_accumulator(std::istream& is) {
  const auto m = bytes::read<std::uint32_t>(is, "accumulator neuron count");
  if (m == 0 || m > (1u << 24)) fail(Errc::format, "implausible accumulator width");
  const auto count = bytes::read<std::uint64_t>(is, "accumulator count");
  std::vector<double> mean(m);
  for (auto& v : mean) v = bytes::read<double>(is, "accumulator mean");
  SymmetricMatrix cov(m);
  for (auto& v : cov.packed()) v = bytes::read<double>(is, "accumulator covariance");
  return CovAccumulator::from_parts(count, std::move(mean), std::move(cov));
}

inline void write_layers(std::ostream& os, const LayerList& layers) {
  bytes::write<std::uint32_t>(os, static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    bytes::write_string(os, l.name);
    bytes::write<std::uint32_t>(os, static_cast<std::uint32_t>(l.neurons));
  }
}

inline LayerList read_layers(std::istream& is) {
  const auto n = bytes::read<std::uint32_t>(is, "layer count");
  if (n == 0 || n > (1u << 20)) fail(Errc::format, "implausible layer count in state");
  LayerList out(n);
  for (auto& l : out) {
    l.name = bytes::read_string(is, "layer name");
    l.neurons = bytes::read<std::uint32_t>(is, "layer neurons");
  }
  try {
    validate_layers(out);
  } catch (const Error& e) {
    fail(Errc::format, e.what());
  }
  return out;
}

inline void write_flags(std::ostream& os, const std::vector<std::vector<std::uint8_t>>& flags) {
  for (const auto& f : flags) os.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size()));
}

inline std::vector<std::vector<std::uint8_t>> read_flags(std::istream& is, const LayerList& layers,
                                                         std::size_t per_neuron = 1) {
  std::vector<std::vector<std::uint8_t>> out;
  for (const auto& l : layers) {
    std::vector<std::uint8_t> f(l.neurons * per_neuron);
    is.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(f.size()));
    if (is.gcount() != static_cast<std::streamsize>(f.size())) fail(Errc::format, "truncated flag table");
    for (auto b : f) {
      if (b > 1) fail(Errc::format, "flag byte out of range");
    }
    out.push_back(std::move(f));
  }
  return out;
}

inline void write_ranges(std::ostream& os, const std::optional<RangeTable>& r) {
  bytes::write<std::uint8_t>(os, r ? 1 : 0);
  if (!r) return;
  for (std::size_t l = 0; l < r->low.size(); ++l) {
    for (double v : r->low[l]) bytes::write<double>(os, v);
    for (double v : r->high[l]) bytes::write<double>(os, v);
  }
}

inline std::optional<RangeTable> read_ranges(std::istream& is, const LayerList& layers) {
  const auto has = bytes::read<std::uint8_t>(is, "range flag");
  if (has == 0) return std::nullopt;
  RangeTable r;
  for (const auto& l : layers) {
    std::vector<double> lo(l.neurons), hi(l.neurons);
    for (auto& v : lo) v = bytes::read<double>(is, "range low");
    for (auto& v : hi) v = bytes::read<double>(is, "range high");
    r.low.push_back(std::move(lo));
    r.high.push_back(std::move(hi));
  }
  detail::check_ranges(layers, r);
  return r;
}

}  // namespace state_detail

inline void write_state(std::ostream& os, const Criterion& c) {
  using namespace state_detail;
  os.write(kStateMagic, 4);
  bytes::write<std::uint32_t>(os, kStateVersion);

  std::vector<const CovAccumulator*> blocks;
  if (const auto* s = std::get_if<NlcState>(&c.state())) {
    for (const auto& per_layer : s->acc) {
      for (const auto& a : per_layer) blocks.push_back(&a);
    }
  }
  bytes::write<std::uint32_t>(os, static_cast<std::uint32_t>(blocks.size()));
  for (const auto* a : blocks) write_accumulator(os, *a);

  bytes::write<std::uint8_t>(os, static_cast<std::uint8_t>(c.kind()));
  write_layers(os, c.layers());
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, NlcState>) {
          bytes::write<std::uint8_t>(os, s.class_conditional ? 1 : 0);
          bytes::write<std::uint32_t>(os, static_cast<std::uint32_t>(s.classes));
        } else if constexpr (std::is_same_v<S, NcState> || std::is_same_v<S, NcsState>) {
          bytes::write<double>(os, s.t);
          write_flags(os, s.activated);
        } else if constexpr (std::is_same_v<S, KmncState>) {
          bytes::write<std::uint32_t>(os, static_cast<std::uint32_t>(s.k));
          write_ranges(os, s.ranges);
          write_flags(os, s.segments);
        } else if constexpr (std::is_same_v<S, NbcState> || std::is_same_v<S, SnacState>) {
          write_ranges(os, s.ranges);
          write_flags(os, s.lower);
          write_flags(os, s.upper);
        } else if constexpr (std::is_same_v<S, TkncState>) {
          bytes::write<std::uint32_t>(os, static_cast<std::uint32_t>(s.k));
          write_flags(os, s.flagged);
        } else if constexpr (std::is_same_v<S, TknpState>) {
          bytes::write<std::uint32_t>(os, static_cast<std::uint32_t>(s.k));
          std::vector<std::uint64_t> sorted(s.patterns.begin(), s.patterns.end());
          std::sort(sorted.begin(), sorted.end());
          bytes::write<std::uint64_t>(os, sorted.size());
          for (auto h : sorted) bytes::write<std::uint64_t>(os, h);
        } else if constexpr (std::is_same_v<S, CcState>) {
          bytes::write<double>(os, s.t);
          bytes::write<std::uint32_t>(os, static_cast<std::uint32_t>(s.monitored.size()));
          for (auto idx : s.monitored) bytes::write<std::uint32_t>(os, static_cast<std::uint32_t>(idx));
          for (const auto& centers : s.centers) {
            bytes::write<std::uint64_t>(os, centers.size());
            for (const auto& c : centers) {
              for (double v : c) bytes::write<double>(os, v);
            }
          }
        }
      },
      c.state());
}

inline Criterion read_state(std::istream& is) {
  using namespace state_detail;
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() != 4 || std::string(magic, 4) != std::string(kStateMagic, 4)) {
    fail(Errc::format, "not an .nlcs state (bad magic)");
  }
  const auto version = bytes::read<std::uint32_t>(is, "state version");
  if (version != kStateVersion) fail(Errc::format, "unsupported state version " + std::to_string(version));
  const auto nblocks = bytes::read<std::uint32_t>(is, "accumulator block count");
  std::vector<CovAccumulator> blocks;
  blocks.reserve(std::min<std::uint32_t>(nblocks, 4096));
  for (std::uint32_t i = 0; i < nblocks; ++i) blocks.push_back(read_accumulator(is));

  const auto tag = bytes::read<std::uint8_t>(is, "criterion tag");
  if (tag < 1 || tag > static_cast<std::uint8_t>(CriterionKind::cc)) {
    fail(Errc::format, "unknown criterion tag " + std::to_string(tag));
  }
  const auto kind = static_cast<CriterionKind>(tag);
  auto layers = read_layers(is);
  if (kind != CriterionKind::nlc && nblocks != 0) fail(Errc::format, "accumulator blocks on a non-NLC state");

  switch (kind) {
    case CriterionKind::nlc: {
      NlcState s;
      s.layers = layers;
      s.class_conditional = bytes::read<std::uint8_t>(is, "class-conditional flag") == 1;
      s.classes = bytes::read<std::uint32_t>(is, "class slots");
      if (s.classes == 0 || (!s.class_conditional && s.classes != 1)) fail(Errc::format, "bad NLC class slot count");
      if (blocks.size() != layers.size() * s.classes) fail(Errc::format, "NLC block count does not match layers");
      std::size_t b = 0;
      for (const auto& l : layers) {
        std::vector<CovAccumulator> slots;
        for (std::size_t c = 0; c < s.classes; ++c, ++b) {
          if (blocks[b].dim() != l.neurons) fail(Errc::format, "accumulator width differs from layer '" + l.name + "'");
          slots.push_back(std::move(blocks[b]));
        }
        s.acc.push_back(std::move(slots));
      }
      return Criterion(std::move(s));
    }
    case CriterionKind::nc:
    case CriterionKind::ncs: {
      const double t = bytes::read<double>(is, "threshold");
      auto flags = read_flags(is, layers);
      if (kind == CriterionKind::nc) return Criterion(NcState{layers, t, std::move(flags)});
      return Criterion(NcsState{layers, t, std::move(flags)});
    }
    case CriterionKind::kmnc: {
      KmncState s;
      s.layers = layers;
      s.k = bytes::read<std::uint32_t>(is, "k");
      if (s.k == 0) fail(Errc::format, "KMNC k = 0");
      s.ranges = read_ranges(is, layers);
      s.segments = read_flags(is, layers, s.k);
      return Criterion(std::move(s));
    }
    case CriterionKind::nbc:
    case CriterionKind::snac: {
      auto ranges = read_ranges(is, layers);
      auto lower = read_flags(is, layers);
      auto upper = read_flags(is, layers);
      if (kind == CriterionKind::nbc) return Criterion(NbcState{layers, ranges, std::move(lower), std::move(upper)});
      return Criterion(SnacState{layers, ranges, std::move(lower), std::move(upper)});
    }
    case CriterionKind::tknc: {
      const auto k = bytes::read<std::uint32_t>(is, "k");
      return Criterion(TkncState{layers, k, read_flags(is, layers)});
    }
    case CriterionKind::tknp: {
      TknpState s;
      s.layers = layers;
      s.k = bytes::read<std::uint32_t>(is, "k");
      const auto n = bytes::read<std::uint64_t>(is, "pattern count");
      for (std::uint64_t i = 0; i < n; ++i) s.patterns.insert(bytes::read<std::uint64_t>(is, "pattern hash"));
      return Criterion(std::move(s));
    }
    case CriterionKind::cc: {
      CcState s;
      s.layers = layers;
      s.t = bytes::read<double>(is, "cc threshold");
      const auto nmon = bytes::read<std::uint32_t>(is, "monitored layer count");
      for (std::uint32_t i = 0; i < nmon; ++i) {
        const auto idx = bytes::read<std::uint32_t>(is, "monitored layer");
        if (idx >= layers.size()) fail(Errc::format, "monitored layer index out of range");
        s.monitored.push_back(idx);
      }
      for (auto idx : s.monitored) {
        const auto n = bytes::read<std::uint64_t>(is, "cluster count");
        std::vector<std::vector<double>> centers;
        for (std::uint64_t c = 0; c < n; ++c) {
          std::vector<double> v(layers[idx].neurons);
          for (auto& x : v) x = bytes::read<double>(is, "cluster center");
          centers.push_back(std::move(v));
        }
        s.centers.push_back(std::move(centers));
      }
      return Criterion(std::move(s));
    }
  }
  fail(Errc::format, "unhandled criterion tag");
}

inline void save_state(const std::string& path, const Criterion& c) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(Errc::io, "cannot open '" + path + "' for writing");
  write_state(os, c);
  os.close();
  if (os.fail()) fail(Errc::io, "failed writing '" + path + "'");
}

inline Criterion load_state(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(Errc::io, "cannot open state '" + path + "'");
  return read_state(is);
}

/// Byte image of a state; handy for bit-identity checks.
inline std::string state_bytes(const Criterion& c) {
  std::ostringstream os(std::ios::binary);
  write_state(os, c);
  return os.str();
}

}  // namespace nlc
