#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "nlc/criteria.hpp"
#include "nlc/random.hpp"
#include "oracles.hpp"

namespace testing_util {

inline nlc::RowMatrix to_matrix(const oracle::Rows& rows) {
  nlc::RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.at(0).size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

inline oracle::Rows to_rows(const nlc::RowMatrix& m) {
  oracle::Rows rows(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  }
  return rows;
}

inline oracle::Rows cov_rows(const nlc::SymmetricMatrix& s) {
  oracle::Rows out(s.dim(), std::vector<double>(s.dim()));
  for (std::size_t i = 0; i < s.dim(); ++i) {
    for (std::size_t j = 0; j < s.dim(); ++j) out[i][j] = s(i, j);
  }
  return out;
}

inline oracle::Rows random_rows(nlc::Rng& rng, std::size_t n, std::size_t m, double scale = 1.0, double shift = 0.0) {
  oracle::Rows rows(n, std::vector<double>(m));
  for (auto& r : rows) {
    for (auto& v : r) v = shift + scale * rng.normal();
  }
  return rows;
}

/// Inputs [begin, end) of a history as one batch.
inline nlc::ActivationBatch to_batch(const oracle::History& h, std::size_t begin, std::size_t end) {
  nlc::ActivationBatch b;
  for (std::size_t l = 0; l < h.at(0).size(); ++l) {
    nlc::RowMatrix m(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(h[0][l].size()));
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = 0; j < h[i][l].size(); ++j) {
        m(static_cast<Eigen::Index>(i - begin), static_cast<Eigen::Index>(j)) = h[i][l][j];
      }
    }
    b.layers.push_back(std::move(m));
  }
  return b;
}

inline nlc::ActivationBatch to_batch(const oracle::History& h) { return to_batch(h, 0, h.size()); }

/// Random activations with a relu-like mass at zero so thresholds and top-k
/// ties get exercised.
inline oracle::History random_history(nlc::Rng& rng, const nlc::LayerList& layers, std::size_t n) {
  oracle::History h(n);
  for (auto& in : h) {
    for (const auto& l : layers) {
      std::vector<double> v(l.neurons);
      for (auto& x : v) x = std::max(0.0, rng.normal(0.2, 0.6));
      in.push_back(std::move(v));
    }
  }
  return h;
}

inline nlc::RangeTable to_table(const oracle::Ranges& r) { return {r.low, r.high}; }

/// Scratch directory unique to the calling test.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("nlc_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing_util
