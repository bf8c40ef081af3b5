#pragma once

// Streaming mean/covariance state for one layer of neuron outputs.
//
// All statistics use the population (divide-by-count) convention: that is the
// convention under which the two-summary merge below is exact. Covariances are
// stored as a packed lower triangle and mirrored on read.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nlc/error.hpp"

namespace nlc {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense symmetric m x m matrix with packed lower-triangular storage.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(std::size_t m) : m_(m), data_(packed_size(m), 0.0) {}

  static constexpr std::size_t packed_size(std::size_t m) { return m * (m + 1) / 2; }

  std::size_t dim() const noexcept { return m_; }

  double operator()(std::size_t i, std::size_t j) const noexcept {
    return i >= j ? data_[index(i, j)] : data_[index(j, i)];
  }
  double& at_lower(std::size_t i, std::size_t j) noexcept { return data_[index(i, j)]; }

  /// Packed lower triangle, row by row: (0,0), (1,0), (1,1), (2,0), ...
  const std::vector<double>& packed() const noexcept { return data_; }
  std::vector<double>& packed() noexcept { return data_; }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd out(m_, m_);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        out(i, j) = out(j, i) = data_[index(i, j)];
      }
    }
    return out;
  }

  /// Packs the lower triangle of a square matrix; the upper triangle is ignored.
  static SymmetricMatrix from_lower(const Eigen::MatrixXd& full) {
    SymmetricMatrix out(static_cast<std::size_t>(full.rows()));
    for (std::size_t i = 0; i < out.m_; ++i) {
      for (std::size_t j = 0; j <= i; ++j) out.data_[index(i, j)] = full(i, j);
    }
    return out;
  }

  bool operator==(const SymmetricMatrix&) const = default;

 private:
  static constexpr std::size_t index(std::size_t i, std::size_t j) noexcept { return i * (i + 1) / 2 + j; }

  std::size_t m_ = 0;
  std::vector<double> data_;
};

/// Summary of one batch: |B|, its mean, and its population covariance.
struct BatchStats {
  std::uint64_t count = 0;
  std::vector<double> mean;
  SymmetricMatrix cov;

  std::size_t dim() const noexcept { return mean.size(); }
};

/// Matrix-form batch statistics: one centering pass, then a symmetric rank-n
/// update (X_c^T X_c / n) for the covariance.
inline BatchStats batch_stats(const Eigen::Ref<const RowMatrix>& batch) {
  const auto n = batch.rows();
  const auto m = batch.cols();
  if (n == 0) fail(Errc::empty_input, "empty batch");
  if (m == 0) fail(Errc::shape_mismatch, "batch has zero neurons");

  const Eigen::RowVectorXd mu = batch.colwise().mean();
  const Eigen::MatrixXd centered = batch.rowwise() - mu;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / static_cast<double>(n));

  BatchStats out;
  out.count = static_cast<std::uint64_t>(n);
  out.mean.assign(mu.data(), mu.data() + m);
  out.cov = SymmetricMatrix::from_lower(gram);
  return out;
}

/// Sum of absolute entries, sum_i sum_j |c_ij|. Not the induced 1-norm.
inline double entrywise_l1(const SymmetricMatrix& cov) {
  const auto m = cov.dim();
  const auto& p = cov.packed();
  double diag = 0.0;
  double off = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < i; ++j) off += std::abs(p[k++]);
    diag += std::abs(p[k++]);
  }
  return diag + 2.0 * off;
}

inline double entrywise_l1(const Eigen::MatrixXd& cov) { return cov.cwiseAbs().sum(); }

class CovAccumulator {
 public:
  CovAccumulator() = default;
  explicit CovAccumulator(std::size_t m) : mean_(m, 0.0), cov_(m) {}

  /// Rebuilds an accumulator from serialized fields; validates shape only.
  static CovAccumulator from_parts(std::uint64_t count, std::vector<double> mean, SymmetricMatrix cov) {
    if (cov.dim() != mean.size()) fail(Errc::shape_mismatch, "accumulator mean/cov dimension mismatch");
    CovAccumulator a;
    a.count_ = count;
    a.mean_ = std::move(mean);
    a.cov_ = std::move(cov);
    return a;
  }

  std::size_t dim() const noexcept { return mean_.size(); }
  std::uint64_t count() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }
  const std::vector<double>& mean() const noexcept { return mean_; }
  const SymmetricMatrix& cov() const noexcept { return cov_; }

  /// Folds a batch summary in without revisiting earlier data:
  ///   cov = na*nb/(na+nb)^2 * d d^T + (na*cov_a + nb*cov_b)/(na+nb),  d = mean_a - mean_b
  /// Cost is O(m^2) regardless of how much has been absorbed.
  void merge(const BatchStats& b) {
    if (b.dim() != dim() || b.cov.dim() != dim()) {
      fail(Errc::shape_mismatch, "merge: accumulator has " + std::to_string(dim()) + " neurons, batch has " +
                                     std::to_string(b.dim()));
    }
    if (b.count == 0) return;
    if (count_ == 0) {
      count_ = b.count;
      mean_ = b.mean;
      cov_ = b.cov;
      return;
    }

    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(b.count);
    const double total = na + nb;
    const double cross = na * nb / (total * total);
    const double wa = na / total;
    const double wb = nb / total;

    const std::size_t m = dim();
    std::vector<double> delta(m);
    for (std::size_t i = 0; i < m; ++i) delta[i] = mean_[i] - b.mean[i];

    auto& pa = cov_.packed();
    const auto& pb = b.cov.packed();
    std::size_t k = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double di = cross * delta[i];
      for (std::size_t j = 0; j <= i; ++j, ++k) {
        pa[k] = di * delta[j] + wa * pa[k] + wb * pb[k];
      }
    }
    for (std::size_t i = 0; i < m; ++i) mean_[i] = wa * mean_[i] + wb * b.mean[i];
    count_ += b.count;
  }

  void absorb(const Eigen::Ref<const RowMatrix>& batch) { merge(batch_stats(batch)); }

  /// Deep copy; accumulators are plain values, so this is the copy constructor
  /// spelled out for call sites that want the rollback intent visible.
  CovAccumulator snapshot() const { return *this; }
  void restore(const CovAccumulator& snap) { *this = snap; }

  bool operator==(const CovAccumulator&) const = default;

 private:
  std::uint64_t count_ = 0;
  std::vector<double> mean_;
  SymmetricMatrix cov_;
};

inline CovAccumulator merge(CovAccumulator a, const BatchStats& b) {
  a.merge(b);
  return a;
}

}  // namespace nlc
