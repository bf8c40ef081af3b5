#pragma once

// .nlct activation traces.
//
//   magic "NLCT" | version u32 | layer_count u32
//   layer_count x { name_len u32 | name bytes | neurons u32 }
//   input_count u64 | has_labels u8 | class_count u32
//   input_count x { layer 0: m_0 x f32 | ... | layer L-1 | [label u32] }
//
// Everything is little-endian. Records are input-major and fixed-size.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlc/bytes.hpp"
#include "nlc/criteria.hpp"
#include "nlc/error.hpp"

namespace nlc {

inline constexpr char kTraceMagic[4] = {'N', 'L', 'C', 'T'};
inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr std::size_t kDefaultBatchSize = 256;

struct TraceHeader {
  LayerList layers;
  std::uint64_t input_count = 0;
  bool has_labels = false;
  std::uint32_t class_count = 0;

  std::size_t record_bytes() const { return total_neurons(layers) * sizeof(float) + (has_labels ? 4 : 0); }

  std::size_t header_bytes() const {
    std::size_t n = 4 + 4 + 4;
    for (const auto& l : layers) n += 4 + l.name.size() + 4;
    return n + 8 + 1 + 4;
  }

  bool operator==(const TraceHeader&) const = default;
};

/// One input's activations, layer by layer.
struct TraceRecord {
  std::vector<std::vector<float>> layers;
  std::optional<std::uint32_t> label;
};

inline void validate_header(const TraceHeader& h) {
  validate_layers(h.layers);
  if (h.has_labels && h.class_count == 0) fail(Errc::format, "labeled trace must declare class_count > 0");
  if (!h.has_labels && h.class_count != 0) fail(Errc::format, "unlabeled trace must have class_count = 0");
}

/// Streams records to disk; the input count in the header is patched on
/// close(), so producers need not know it up front.
class TraceWriter {
 public:
  TraceWriter(const std::string& path, TraceHeader header) : path_(path), header_(std::move(header)) {
    validate_header(header_);
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) fail(Errc::io, "cannot open '" + path + "' for writing");
    out_.write(kTraceMagic, 4);
    bytes::write<std::uint32_t>(out_, kTraceVersion);
    bytes::write<std::uint32_t>(out_, static_cast<std::uint32_t>(header_.layers.size()));
    for (const auto& l : header_.layers) {
      bytes::write_string(out_, l.name);
      bytes::write<std::uint32_t>(out_, static_cast<std::uint32_t>(l.neurons));
    }
    count_pos_ = out_.tellp();
    bytes::write<std::uint64_t>(out_, 0);
    bytes::write<std::uint8_t>(out_, header_.has_labels ? 1 : 0);
    bytes::write<std::uint32_t>(out_, header_.class_count);
  }

  TraceWriter(const TraceWriter&) = delete;
  TraceWriter& operator=(const TraceWriter&) = delete;

  ~TraceWriter() {
    try {
      close();
    } catch (...) {
    }
  }

  template <typename T>
  void write(const std::vector<std::vector<T>>& per_layer, std::optional<std::uint32_t> label = std::nullopt) {
    if (per_layer.size() != header_.layers.size()) {
      fail(Errc::shape_mismatch, "record has " + std::to_string(per_layer.size()) + " layers, header declares " +
                                     std::to_string(header_.layers.size()));
    }
    if (label.has_value() != header_.has_labels) {
      fail(Errc::shape_mismatch, header_.has_labels ? "labeled trace needs a label per record"
                                                    : "unlabeled trace got a label");
    }
    if (label && *label >= header_.class_count) {
      fail(Errc::shape_mismatch, "label " + std::to_string(*label) + " >= class_count");
    }
    buf_.clear();
    for (std::size_t l = 0; l < per_layer.size(); ++l) {
      if (per_layer[l].size() != header_.layers[l].neurons) {
        fail(Errc::shape_mismatch, "record layer '" + header_.layers[l].name + "' has " +
                                       std::to_string(per_layer[l].size()) + " values, header declares " +
                                       std::to_string(header_.layers[l].neurons));
      }
      for (const auto v : per_layer[l]) bytes::put<float>(buf_, static_cast<float>(v));
    }
    if (label) bytes::put<std::uint32_t>(buf_, *label);
    out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out_) fail(Errc::io, "write failed on '" + path_ + "'");
    ++written_;
  }

  void write(const TraceRecord& r) { write(r.layers, r.label); }

  std::uint64_t written() const noexcept { return written_; }

  void close() {
    if (!out_.is_open()) return;
    out_.seekp(count_pos_);
    bytes::write<std::uint64_t>(out_, written_);
    out_.close();
    if (out_.fail()) fail(Errc::io, "failed to finalize '" + path_ + "'");
  }

 private:
  std::string path_;
  TraceHeader header_;
  std::ofstream out_;
  std::streampos count_pos_;
  std::uint64_t written_ = 0;
  std::string buf_;
};

/// Writes a whole trace; the record count must equal header.input_count.
inline void write_trace(const std::string& path, const TraceHeader& header, const std::vector<TraceRecord>& records) {
  if (records.size() != header.input_count) {
    fail(Errc::shape_mismatch, "header declares " + std::to_string(header.input_count) + " inputs, got " +
                                   std::to_string(records.size()) + " records");
  }
  TraceWriter w(path, header);
  for (const auto& r : records) w.write(r);
  w.close();
}

/// Streaming reader; memory use is bounded by batch_size * record size.
class TraceReader {
 public:
  explicit TraceReader(const std::string& path) : path_(path) {
    in_.open(path, std::ios::binary);
    if (!in_) fail(Errc::io, "cannot open trace '" + path + "'");
    char magic[4] = {};
    in_.read(magic, 4);
    if (in_.gcount() != 4 || std::string(magic, 4) != std::string(kTraceMagic, 4)) {
      fail(Errc::format, "'" + path + "' is not an .nlct trace (bad magic)");
    }
    const auto version = bytes::read<std::uint32_t>(in_, "trace version");
    if (version != kTraceVersion) {
      fail(Errc::format, "unsupported trace version " + std::to_string(version) + " in '" + path + "'");
    }
    const auto nlayers = bytes::read<std::uint32_t>(in_, "layer count");
    if (nlayers == 0 || nlayers > (1u << 20)) fail(Errc::format, "implausible layer count in '" + path + "'");
    for (std::uint32_t i = 0; i < nlayers; ++i) {
      LayerMeta l;
      l.name = bytes::read_string(in_, "layer name");
      l.neurons = bytes::read<std::uint32_t>(in_, "layer neuron count");
      header_.layers.push_back(std::move(l));
    }
    header_.input_count = bytes::read<std::uint64_t>(in_, "input count");
    const auto flag = bytes::read<std::uint8_t>(in_, "label flag");
    if (flag > 1) fail(Errc::format, "bad has_labels byte in '" + path + "'");
    header_.has_labels = flag == 1;
    header_.class_count = bytes::read<std::uint32_t>(in_, "class count");
    try {
      validate_header(header_);
    } catch (const Error& e) {
      fail(Errc::format, std::string("invalid trace header: ") + e.what());
    }
    data_start_ = in_.tellg();
  }

  const TraceHeader& header() const noexcept { return header_; }
  std::uint64_t position() const noexcept { return next_; }

  /// Next chunk of up to batch_size inputs; nullopt once all inputs are read.
  std::optional<ActivationBatch> next_batch(std::size_t batch_size = kDefaultBatchSize) {
    if (batch_size == 0) fail(Errc::invalid_argument, "batch size must be positive");
    if (next_ >= header_.input_count) return std::nullopt;
    const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(batch_size, header_.input_count - next_));
    const auto rec = header_.record_bytes();
    raw_.resize(n * rec);
    in_.read(raw_.data(), static_cast<std::streamsize>(raw_.size()));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != raw_.size()) {
      const auto bad = next_ + got / rec;
      const auto offset = static_cast<std::uint64_t>(data_start_) + bad * rec + (got % rec);
      fail(Errc::format, "truncated trace '" + path_ + "': input #" + std::to_string(bad) + " incomplete at byte offset " +
                             std::to_string(offset));
    }

    ActivationBatch batch;
    for (const auto& l : header_.layers) {
      batch.layers.emplace_back(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(l.neurons));
    }
    if (header_.has_labels) batch.labels.emplace(n);
    for (std::size_t i = 0; i < n; ++i) {
      const char* p = raw_.data() + i * rec;
      for (std::size_t l = 0; l < header_.layers.size(); ++l) {
        auto& mat = batch.layers[l];
        for (std::size_t j = 0; j < header_.layers[l].neurons; ++j, p += 4) {
          mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = bytes::get<float>(p);
        }
      }
      if (header_.has_labels) {
        const auto label = bytes::get<std::uint32_t>(p);
        if (label >= header_.class_count) {
          fail(Errc::format, "input #" + std::to_string(next_ + i) + " has label " + std::to_string(label) +
                                 " >= class_count " + std::to_string(header_.class_count));
        }
        (*batch.labels)[i] = label;
      }
    }
    next_ += n;
    return batch;
  }

  /// Adapter for fit_ranges-style consumers.
  auto source(std::size_t batch_size = kDefaultBatchSize) {
    return [this, batch_size] { return next_batch(batch_size); };
  }

 private:
  std::string path_;
  std::ifstream in_;
  TraceHeader header_;
  std::streampos data_start_;
  std::uint64_t next_ = 0;
  std::vector<char> raw_;
};

}  // namespace nlc
