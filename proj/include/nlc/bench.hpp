#pragma once

// Timing harness: matrix-form accumulation against a per-element reference,
// plus merge cost as the accumulator grows.

#include <algorithm>
#include <chrono>
#include <vector>

#include "nlc/accum.hpp"
#include "nlc/random.hpp"

namespace nlc {

/// Reference accumulator that evaluates every covariance entry on its own:
/// a loop over inputs per (i, j) pair, then an entry-by-entry merge. Dense
/// row-major m x m storage.
class LoopAccumulator {
 public:
  explicit LoopAccumulator(std::size_t m) : m_(m), mean_(m, 0.0), cov_(m * m, 0.0) {}

  void absorb(const RowMatrix& batch) {
    const auto n = static_cast<std::size_t>(batch.rows());
    if (n == 0) return;
    std::vector<double> mu(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += batch(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i));
      mu[i] = s / static_cast<double>(n);
    }
    std::vector<double> c(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          s += (batch(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) - mu[i]) *
               (batch(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) - mu[j]);
        }
        c[i * m_ + j] = c[j * m_ + i] = s / static_cast<double>(n);
      }
    }
    if (count_ == 0) {
      count_ = n;
      mean_ = std::move(mu);
      cov_ = std::move(c);
      return;
    }
    const double na = static_cast<double>(count_), nb = static_cast<double>(n), tot = na + nb;
    const double w = na * nb / (tot * tot);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) {
        const double di = mu[i] - mean_[i], dj = mu[j] - mean_[j];
        cov_[i * m_ + j] = w * di * dj + (na * cov_[i * m_ + j] + nb * c[i * m_ + j]) / tot;
      }
    }
    for (std::size_t i = 0; i < m_; ++i) mean_[i] = (na * mean_[i] + nb * mu[i]) / tot;
    count_ += n;
  }

  std::size_t count() const { return count_; }
  double cov(std::size_t i, std::size_t j) const { return cov_[i * m_ + j]; }

 private:
  std::size_t m_;
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> cov_;
};

struct CostPoint {
  std::size_t absorbed = 0;   // batches merged before the timed merge
  double median_us = 0.0;
};

struct BenchReport {
  std::size_t m = 0;
  std::size_t batches = 0;
  std::size_t batch_size = 0;
  double matrix_ms = 0.0;
  double loop_ms = 0.0;
  double ratio = 0.0;         // loop / matrix
  double rel_error = 0.0;     // relative Frobenius distance of the results
  bool equal = false;         // rel_error <= 1e-9
  std::vector<CostPoint> cost;
};

namespace detail {

inline RowMatrix bench_batch(Rng& rng, std::size_t n, std::size_t m) {
  RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = std::max(0.0, rng.normal(0.2, 1.0));
  return x;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Median wall time of a single merge into an accumulator that has already
/// absorbed each of `absorbed` batches.
inline std::vector<CostPoint> merge_cost(std::size_t m, std::size_t batch_size, const std::vector<std::size_t>& absorbed,
                                         std::size_t trials, std::uint64_t seed) {
  if (m == 0 || batch_size == 0 || trials == 0) fail(Errc::invalid_argument, "merge_cost needs m, batch size, trials >= 1");
  Rng rng(seed);
  std::vector<BatchStats> pool;
  for (int i = 0; i < 8; ++i) pool.push_back(batch_stats(detail::bench_batch(rng, batch_size, m)));

  std::vector<std::size_t> order = absorbed;
  std::sort(order.begin(), order.end());
  std::vector<CostPoint> out;
  CovAccumulator acc(m);
  std::size_t done = 0;
  for (auto target : order) {
    for (; done < target; ++done) acc.merge(pool[done % pool.size()]);
    std::vector<double> us;
    for (std::size_t t = 0; t < trials; ++t) {
      auto probe = acc;
      const auto t0 = std::chrono::steady_clock::now();
      probe.merge(pool[t % pool.size()]);
      us.push_back(1000.0 * detail::elapsed_ms(t0));
    }
    std::nth_element(us.begin(), us.begin() + static_cast<std::ptrdiff_t>(us.size() / 2), us.end());
    out.push_back({target, us[us.size() / 2]});
  }
  return out;
}

/// Feeds the same random batches to both accumulators and compares time and
/// results. Cost data comes from merge_cost at 2 and `cost_absorbed` batches.
inline BenchReport run_bench(std::size_t m, std::size_t batches, std::size_t batch_size, std::uint64_t seed,
                             std::size_t cost_absorbed = 1000, std::size_t cost_trials = 20) {
  if (m < 2) fail(Errc::invalid_argument, "bench needs m >= 2");
  if (batches == 0 || batch_size == 0) fail(Errc::invalid_argument, "bench needs batches and batch size >= 1");
  Rng rng(seed);
  std::vector<RowMatrix> data;
  for (std::size_t b = 0; b < batches; ++b) data.push_back(detail::bench_batch(rng, batch_size, m));

  BenchReport r;
  r.m = m;
  r.batches = batches;
  r.batch_size = batch_size;

  CovAccumulator fast(m);
  auto t0 = std::chrono::steady_clock::now();
  for (const auto& x : data) fast.absorb(x);
  r.matrix_ms = detail::elapsed_ms(t0);

  LoopAccumulator slow(m);
  t0 = std::chrono::steady_clock::now();
  for (const auto& x : data) slow.absorb(x);
  r.loop_ms = detail::elapsed_ms(t0);

  r.ratio = r.matrix_ms > 0.0 ? r.loop_ms / r.matrix_ms : 0.0;
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double a = fast.cov()(i, j), b = slow.cov(i, j);
      diff += (a - b) * (a - b);
      norm += b * b;
    }
  }
  r.rel_error = norm > 0.0 ? std::sqrt(diff / norm) : std::sqrt(diff);
  r.equal = r.rel_error <= 1e-9;
  if (cost_trials > 0) r.cost = merge_cost(m, batch_size, {2, cost_absorbed}, cost_trials, seed + 1);
  return r;
}

}  // namespace nlc
