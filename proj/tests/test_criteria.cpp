#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "nlc/criteria.hpp"

using namespace nlc;
using testing_util::random_history;
using testing_util::to_batch;
using testing_util::to_matrix;

namespace {

ActivationBatch one_layer(std::initializer_list<std::initializer_list<double>> rows) {
  oracle::Rows r;
  for (auto row : rows) r.emplace_back(row);
  ActivationBatch b;
  b.layers.push_back(to_matrix(r));
  return b;
}

Criterion make(CriterionKind kind, const LayerList& layers, std::optional<double> t = std::nullopt,
               std::optional<std::size_t> k = std::nullopt, std::optional<RangeTable> ranges = std::nullopt) {
  CriterionConfig cfg;
  cfg.kind = kind;
  cfg.t = t;
  cfg.k = k;
  return Criterion::create(cfg, layers, ranges);
}

RangeTable uniform_range(const LayerList& layers, double lo, double hi) {
  RangeTable r;
  for (const auto& l : layers) {
    r.low.emplace_back(l.neurons, lo);
    r.high.emplace_back(l.neurons, hi);
  }
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// NLC

TEST(Nlc, ConstantBatchIsZero) {
  auto c = make(CriterionKind::nlc, {{"a", 3}, {"b", 2}});
  ActivationBatch b;
  b.layers.push_back(RowMatrix::Constant(5, 3, 0.7));
  b.layers.push_back(RowMatrix::Constant(5, 2, -1.0));
  c.update(b);
  EXPECT_EQ(c.value(), 0.0);
}

TEST(Nlc, TwoPointHandValue) {
  auto c = make(CriterionKind::nlc, {{"a", 2}});
  c.update(one_layer({{1, 1}, {-1, -1}}));
  EXPECT_NEAR(c.value(), 1.0, 1e-12);
}

TEST(Nlc, TwoLayersSum) {
  auto c = make(CriterionKind::nlc, {{"a", 2}, {"b", 2}});
  auto b = one_layer({{1, 1}, {-1, -1}});
  b.layers.push_back(b.layers[0]);
  c.update(b);
  EXPECT_NEAR(c.value(), 2.0, 1e-12);
  const auto parts = c.per_layer();
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_NEAR(parts[0] + parts[1], c.value(), 1e-15);
}

TEST(Nlc, EmptyStateIsZero) {
  EXPECT_EQ(make(CriterionKind::nlc, {{"a", 4}}).value(), 0.0);
}

TEST(Nlc, ClassConditionalSumsClasses) {
  CriterionConfig cfg;
  cfg.class_conditional = true;
  cfg.class_count = 2;
  auto c = Criterion::create(cfg, {{"a", 2}});
  auto b = one_layer({{1, 1}, {-1, -1}, {1, 1}, {-1, -1}});
  b.labels = std::vector<std::uint32_t>{0, 0, 1, 1};
  c.update(b);
  EXPECT_NEAR(c.value(), 2.0, 1e-12);
}

TEST(Nlc, ClassConditionalNeedsLabels) {
  CriterionConfig cfg;
  cfg.class_conditional = true;
  cfg.class_count = 2;
  auto c = Criterion::create(cfg, {{"a", 2}});
  EXPECT_THROW(c.update(one_layer({{1, 1}})), Error);
  auto b = one_layer({{1, 1}});
  b.labels = std::vector<std::uint32_t>{2};
  EXPECT_THROW(c.update(b), Error);
}

TEST(Nlc, ShapeMismatchRejected) {
  auto c = make(CriterionKind::nlc, {{"a", 3}});
  EXPECT_THROW(c.update(one_layer({{1, 1}})), Error);
}

TEST(Nlc, StreamingMatchesOracle) {
  Rng rng(41);
  const LayerList layers{{"a", 5}, {"b", 3}, {"c", 1}};
  const auto h = random_history(rng, layers, 120);
  auto c = make(CriterionKind::nlc, layers);
  for (std::size_t i = 0; i < h.size(); i += 17) c.update(to_batch(h, i, std::min(h.size(), i + 17)));
  std::vector<oracle::Rows> per_layer(layers.size());
  for (const auto& in : h) {
    for (std::size_t l = 0; l < layers.size(); ++l) per_layer[l].push_back(in[l]);
  }
  EXPECT_NEAR(c.value(), oracle::nlc(per_layer), 1e-10);
}

TEST(Nlc, RotationChangesCovarianceNotRanges) {
  // Correlated cloud along the diagonal, closed under axis swap and negation
  // so that a 90 degree rotation maps its per-axis value sets onto each other.
  Rng rng(43);
  oracle::Rows cloud;
  for (int i = 0; i < 500; ++i) {
    const double u = rng.normal(), v = 0.2 * rng.normal();
    for (double s : {1.0, -1.0}) {
      cloud.push_back({s * (u + v), s * (u - v)});
      cloud.push_back({s * (u - v), s * (u + v)});
    }
  }
  oracle::Rows rotated;
  for (const auto& p : cloud) rotated.push_back({-p[1], p[0]});

  const auto a = batch_stats(to_matrix(cloud));
  const auto b = batch_stats(to_matrix(rotated));
  EXPECT_GT(a.cov(0, 1), 0.5);
  EXPECT_LT(b.cov(0, 1), -0.5);
  EXPECT_NEAR(a.cov(0, 1), -b.cov(0, 1), 1e-9);

  const LayerList layers{{"a", 2}};
  ActivationBatch ba, bb;
  ba.layers.push_back(to_matrix(cloud));
  bb.layers.push_back(to_matrix(rotated));
  const auto ra = fit_ranges(layers, std::vector<ActivationBatch>{ba});
  const auto rb = fit_ranges(layers, std::vector<ActivationBatch>{bb});
  EXPECT_EQ(ra, rb);
}

// ---------------------------------------------------------------------------
// Ranges

TEST(FitRanges, SingleInput) {
  const LayerList layers{{"a", 3}};
  const auto r = fit_ranges(layers, std::vector<ActivationBatch>{one_layer({{0.1, -2, 5}})});
  EXPECT_EQ(r.low[0], r.high[0]);
  EXPECT_EQ(r.low[0], (std::vector<double>{0.1, -2, 5}));
}

TEST(FitRanges, MinMax) {
  const LayerList layers{{"a", 1}};
  const auto r = fit_ranges(layers, std::vector<ActivationBatch>{one_layer({{0.1}, {-0.5}}), one_layer({{0.7}})});
  EXPECT_EQ(r.low[0][0], -0.5);
  EXPECT_EQ(r.high[0][0], 0.7);
}

TEST(FitRanges, MatchesScan) {
  Rng rng(47);
  const LayerList layers{{"a", 6}, {"b", 4}};
  const auto h = random_history(rng, layers, 500);
  std::vector<ActivationBatch> batches;
  for (std::size_t i = 0; i < h.size(); i += 64) batches.push_back(to_batch(h, i, std::min(h.size(), i + 64)));
  const auto r = fit_ranges(layers, batches);
  const auto ref = oracle::ranges(h);
  EXPECT_EQ(r.low, ref.low);
  EXPECT_EQ(r.high, ref.high);
}

TEST(FitRanges, EmptyTraceRejected) {
  try {
    fit_ranges({{"a", 1}}, std::vector<ActivationBatch>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_input);
  }
}

// ---------------------------------------------------------------------------
// Operation examples for the baselines

TEST(Nc, AllBelowThreshold) {
  auto c = make(CriterionKind::nc, {{"a", 3}}, 0.5);
  c.update(one_layer({{0.5, 0.1, -1}}));
  EXPECT_EQ(c.value(), 0.0);
}

TEST(Nc, OneOfFour) {
  auto c = make(CriterionKind::nc, {{"a", 4}}, 0.0);
  c.update(one_layer({{0, 0.2, 0, -1}}));
  EXPECT_DOUBLE_EQ(c.value(), 25.0);
}

TEST(Nc, RefeedIsIdempotent) {
  auto c = make(CriterionKind::nc, {{"a", 4}}, 0.3);
  const auto b = one_layer({{0.4, 0.2, 1, -1}, {0, 0, 0, 0.31}});
  c.update(b);
  const auto v = c.value();
  c.update(b);
  EXPECT_EQ(c.value(), v);
  EXPECT_DOUBLE_EQ(v, 75.0);
}

TEST(Nc, MonotoneInThreshold) {
  Rng rng(53);
  const LayerList layers{{"a", 8}, {"b", 5}};
  const auto h = random_history(rng, layers, 30);
  double prev = 101.0;
  for (double t : {0.0, 0.3, 0.6, 1.0}) {
    auto c = make(CriterionKind::nc, layers, t);
    c.update(to_batch(h));
    EXPECT_LE(c.value(), prev);
    prev = c.value();
  }
}

TEST(Ncs, HandRescale) {
  auto c = make(CriterionKind::ncs, {{"a", 3}}, 0.75);
  c.update(one_layer({{2, 6, 10}}));
  EXPECT_DOUBLE_EQ(c.value(), 100.0 / 3.0);
}

TEST(Ncs, ConstantRowNeverActivates) {
  auto c = make(CriterionKind::ncs, {{"a", 3}}, 0.01);
  c.update(one_layer({{4, 4, 4}}));
  EXPECT_EQ(c.value(), 0.0);
}

TEST(Ncs, AgreesWithNcOnUnitSpan) {
  Rng rng(59);
  ActivationBatch b;
  RowMatrix x(10, 6);
  for (Eigen::Index i = 0; i < 10; ++i) {
    for (Eigen::Index j = 0; j < 6; ++j) x(i, j) = rng.uniform();
    x(i, 0) = 0.0;
    x(i, 5) = 1.0;
  }
  b.layers.push_back(x);
  for (double t : {0.25, 0.5, 0.75}) {
    auto nc = make(CriterionKind::nc, {{"a", 6}}, t);
    auto ncs = make(CriterionKind::ncs, {{"a", 6}}, t);
    nc.update(b);
    ncs.update(b);
    EXPECT_EQ(nc.value(), ncs.value());
  }
}

TEST(Kmnc, LowEndpointCoversFirstSegment) {
  const LayerList layers{{"a", 4}};
  auto c = make(CriterionKind::kmnc, layers, std::nullopt, 10, uniform_range(layers, -1, 3));
  c.update(one_layer({{-1, -1, -1, -1}}));
  EXPECT_DOUBLE_EQ(c.value(), 100.0 / 10.0);
}

TEST(Kmnc, OutOfRangeCoversNothing) {
  const LayerList layers{{"a", 2}};
  auto c = make(CriterionKind::kmnc, layers, std::nullopt, 5, uniform_range(layers, 0, 1));
  c.update(one_layer({{-0.01, 1.01}, {2, -3}}));
  EXPECT_EQ(c.value(), 0.0);
}

TEST(Kmnc, SweepCoversEverySegment) {
  const std::size_t k = 8;
  const LayerList layers{{"a", 2}};
  auto c = make(CriterionKind::kmnc, layers, std::nullopt, k, uniform_range(layers, 0, 1));
  ActivationBatch b;
  RowMatrix x(static_cast<Eigen::Index>(k + 1), 2);
  for (std::size_t s = 0; s <= k; ++s) {
    x(static_cast<Eigen::Index>(s), 0) = static_cast<double>(s) / static_cast<double>(k);
    x(static_cast<Eigen::Index>(s), 1) = 0.5;
  }
  b.layers.push_back(x);
  c.update(b);
  // Neuron 0: all k segments. Neuron 1: one segment.
  EXPECT_DOUBLE_EQ(c.value(), 100.0 * static_cast<double>(k + 1) / static_cast<double>(2 * k));
  const auto& seg = std::get<KmncState>(c.state()).segments[0];
  for (std::size_t s = 0; s < k; ++s) EXPECT_EQ(seg[s], 1) << s;
}

TEST(Kmnc, UpdateBeforeFitRejected) {
  auto c = make(CriterionKind::kmnc, {{"a", 2}});
  EXPECT_FALSE(c.fitted());
  try {
    c.update(one_layer({{1, 2}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::not_fitted);
  }
}

TEST(NbcSnac, InsideRangeIsZero) {
  const LayerList layers{{"a", 3}};
  const auto r = uniform_range(layers, 0, 1);
  auto nbc = make(CriterionKind::nbc, layers, std::nullopt, std::nullopt, r);
  auto snac = make(CriterionKind::snac, layers, std::nullopt, std::nullopt, r);
  const auto b = one_layer({{0, 0.5, 1}});
  nbc.update(b);
  snac.update(b);
  EXPECT_EQ(nbc.value(), 0.0);
  EXPECT_EQ(snac.value(), 0.0);
}

TEST(NbcSnac, OneUpperCornerOfTen) {
  const LayerList layers{{"a", 10}};
  const auto r = uniform_range(layers, 0, 1);
  auto nbc = make(CriterionKind::nbc, layers, std::nullopt, std::nullopt, r);
  auto snac = make(CriterionKind::snac, layers, std::nullopt, std::nullopt, r);
  ActivationBatch b;
  b.layers.push_back(RowMatrix::Constant(1, 10, 0.5));
  b.layers[0](0, 3) = 1.5;
  nbc.update(b);
  snac.update(b);
  EXPECT_DOUBLE_EQ(snac.value(), 10.0);
  EXPECT_DOUBLE_EQ(nbc.value(), 5.0);
}

TEST(NbcSnac, EqualToBoundIsNotACorner) {
  const LayerList layers{{"a", 2}};
  const auto r = uniform_range(layers, -1, 1);
  auto nbc = make(CriterionKind::nbc, layers, std::nullopt, std::nullopt, r);
  nbc.update(one_layer({{1, -1}}));
  EXPECT_EQ(nbc.value(), 0.0);
}

TEST(Tknc, ArgmaxOfPair) {
  auto c = make(CriterionKind::tknc, {{"a", 2}}, std::nullopt, 1);
  c.update(one_layer({{3, 5}}));
  EXPECT_DOUBLE_EQ(c.value(), 50.0);
  EXPECT_EQ(std::get<TkncState>(c.state()).flagged[0], (std::vector<std::uint8_t>{0, 1}));
}

TEST(Tknc, KEqualsMCoversAll) {
  auto c = make(CriterionKind::tknc, {{"a", 4}}, std::nullopt, 4);
  c.update(one_layer({{0, -1, 3, 2}}));
  EXPECT_DOUBLE_EQ(c.value(), 100.0);
}

TEST(Tknc, SameInputTwice) {
  auto c = make(CriterionKind::tknc, {{"a", 5}}, std::nullopt, 2);
  const auto b = one_layer({{0.1, 0.9, 0.4, 0.8, 0.0}});
  c.update(b);
  const auto v = c.value();
  c.update(b);
  EXPECT_EQ(c.value(), v);
}

TEST(Tknc, TiesGoToLowerIndex) {
  auto c = make(CriterionKind::tknc, {{"a", 3}}, std::nullopt, 1);
  c.update(one_layer({{2, 2, 2}}));
  EXPECT_EQ(std::get<TkncState>(c.state()).flagged[0], (std::vector<std::uint8_t>{1, 0, 0}));
}

TEST(Tknc, KLargerThanLayerIsConfigError) {
  EXPECT_THROW(make(CriterionKind::tknc, {{"a", 3}, {"b", 10}}, std::nullopt, 4), Error);
}

TEST(Tknp, OneInputOnePattern) {
  auto c = make(CriterionKind::tknp, {{"a", 4}, {"b", 3}}, std::nullopt, 2);
  ActivationBatch b = one_layer({{1, 2, 3, 4}});
  b.layers.push_back(to_matrix({{3, 2, 1}}));
  c.update(b);
  EXPECT_EQ(c.value(), 1.0);
  EXPECT_TRUE(c.per_layer().empty());
}

TEST(Tknp, IdenticalInputsOnePattern) {
  auto c = make(CriterionKind::tknp, {{"a", 3}}, std::nullopt, 1);
  c.update(one_layer({{1, 5, 2}, {1, 5, 2}, {1, 5, 2}}));
  EXPECT_EQ(c.value(), 1.0);
}

TEST(Tknp, NeverExceedsInputs) {
  Rng rng(61);
  const LayerList layers{{"a", 6}, {"b", 6}};
  const auto h = random_history(rng, layers, 50);
  auto c = make(CriterionKind::tknp, layers, std::nullopt, 2);
  for (std::size_t i = 0; i < h.size(); ++i) {
    c.update(to_batch(h, i, i + 1));
    EXPECT_LE(c.value(), static_cast<double>(i + 1));
  }
}

TEST(Tknp, KClampedToLayerWidth) {
  auto c = make(CriterionKind::tknp, {{"a", 2}}, std::nullopt, 10);
  c.update(one_layer({{1, 2}, {2, 1}}));
  EXPECT_EQ(c.value(), 1.0);
}

TEST(Tknp, RegionsOfPair) {
  // k = 1, m = 2: the pattern is which neuron is larger.
  auto c = make(CriterionKind::tknp, {{"a", 2}}, std::nullopt, 1);
  c.update(one_layer({{0, 1}, {0.2, 5}, {3, 1}, {7, -2}}));
  EXPECT_EQ(c.value(), 2.0);
}

TEST(Cc, FirstInputFoundsCluster) {
  CriterionConfig cfg;
  cfg.kind = CriterionKind::cc;
  cfg.cc_t = 1.0;
  auto c = Criterion::create(cfg, {{"a", 2}});
  c.update(one_layer({{0, 0}}));
  EXPECT_EQ(c.value(), 1.0);
  c.update(one_layer({{0, 0}}));
  EXPECT_EQ(c.value(), 1.0);
}

TEST(Cc, FarApartPointsFoundSeparateClusters) {
  CriterionConfig cfg;
  cfg.kind = CriterionKind::cc;
  cfg.cc_t = 1.0;
  auto c = Criterion::create(cfg, {{"a", 2}});
  // Equilateral triangle with side 2T.
  c.update(one_layer({{0, 0}, {2, 0}, {1, std::sqrt(3.0)}}));
  EXPECT_EQ(c.value(), 3.0);
}

TEST(Cc, DistanceEqualToThresholdJoins) {
  CriterionConfig cfg;
  cfg.kind = CriterionKind::cc;
  cfg.cc_t = 0.5;
  auto c = Criterion::create(cfg, {{"a", 1}});
  c.update(one_layer({{0}, {0.5}, {0.75}}));
  EXPECT_EQ(c.value(), 2.0);
}

TEST(Cc, DefaultLayerIsLastHidden) {
  CriterionConfig cfg;
  cfg.kind = CriterionKind::cc;
  cfg.cc_t = 0.1;
  auto c = Criterion::create(cfg, {{"h1", 2}, {"h2", 2}, {"out", 2}});
  EXPECT_EQ(std::get<CcState>(c.state()).monitored, (std::vector<std::size_t>{1}));
  cfg.layers = {"h1", "out"};
  auto d = Criterion::create(cfg, {{"h1", 2}, {"h2", 2}, {"out", 2}});
  EXPECT_EQ(std::get<CcState>(d.state()).monitored, (std::vector<std::size_t>{0, 2}));
  cfg.layers = {"nope"};
  EXPECT_THROW(Criterion::create(cfg, {{"h1", 2}}), Error);
}

TEST(Cc, NonPositiveThresholdRejected) {
  CriterionConfig cfg;
  cfg.kind = CriterionKind::cc;
  EXPECT_THROW(Criterion::create(cfg, {{"a", 2}}), Error);
  cfg.cc_t = -1.0;
  EXPECT_THROW(Criterion::create(cfg, {{"a", 2}}), Error);
}

// ---------------------------------------------------------------------------
// Cross-checks against per-element reference implementations

namespace {

struct CrossCase {
  CriterionKind kind;
  std::optional<double> t;
  std::optional<std::size_t> k;
};

double reference(const CrossCase& cc, const oracle::History& h, const oracle::Ranges& r, double cc_t) {
  switch (cc.kind) {
    case CriterionKind::nc: return oracle::nc(h, *cc.t);
    case CriterionKind::ncs: return oracle::ncs(h, *cc.t);
    case CriterionKind::kmnc: return oracle::kmnc(h, r, *cc.k);
    case CriterionKind::nbc: return oracle::nbc(h, r);
    case CriterionKind::snac: return oracle::snac(h, r);
    case CriterionKind::tknc: return oracle::tknc(h, *cc.k);
    case CriterionKind::tknp: return oracle::tknp(h, *cc.k);
    case CriterionKind::cc: return oracle::cc(h, 1, cc_t);
    default: return -1;
  }
}

}  // namespace

TEST(CrossCheck, BaselinesMatchBruteForce) {
  Rng rng(67);
  const LayerList layers{{"l0", 12}, {"l1", 7}, {"l2", 3}};
  const auto train = random_history(rng, layers, 300);
  const auto ranges = oracle::ranges(train);
  const auto test = random_history(rng, layers, 200);
  const double cc_t = 1.2;
  const std::vector<CrossCase> cases{
      {CriterionKind::nc, 0.0, {}},    {CriterionKind::nc, 0.6, {}},   {CriterionKind::ncs, 0.75, {}},
      {CriterionKind::kmnc, {}, 10},   {CriterionKind::kmnc, {}, 100}, {CriterionKind::nbc, {}, {}},
      {CriterionKind::snac, {}, {}},   {CriterionKind::tknc, {}, 1},   {CriterionKind::tknc, {}, 3},
      {CriterionKind::tknp, {}, 1},    {CriterionKind::tknp, {}, 2},   {CriterionKind::cc, {}, {}},
  };
  for (const auto& cs : cases) {
    CriterionConfig cfg;
    cfg.kind = cs.kind;
    cfg.t = cs.t;
    cfg.k = cs.k;
    cfg.cc_t = cc_t;
    auto c = Criterion::create(cfg, layers, testing_util::to_table(ranges));
    std::size_t i = 0;
    std::size_t step = 1;
    while (i < test.size()) {
      const auto end = std::min(test.size(), i + step);
      c.update(to_batch(test, i, end));
      const oracle::History seen(test.begin(), test.begin() + static_cast<std::ptrdiff_t>(end));
      EXPECT_EQ(c.value(), reference(cs, seen, ranges, cc_t)) << kind_name(cs.kind) << " after " << end;
      i = end;
      step = step % 13 + 4;
    }
  }
}

TEST(Properties, BaselinesMonotoneAndBounded) {
  Rng rng(71);
  const LayerList layers{{"a", 9}, {"b", 4}};
  const auto train = random_history(rng, layers, 100);
  const auto ranges = testing_util::to_table(oracle::ranges(train));
  const auto test = random_history(rng, layers, 80);
  for (auto kind : {CriterionKind::nc, CriterionKind::ncs, CriterionKind::kmnc, CriterionKind::nbc, CriterionKind::snac,
                    CriterionKind::tknc, CriterionKind::tknp, CriterionKind::cc}) {
    CriterionConfig cfg;
    cfg.kind = kind;
    cfg.k = kind == CriterionKind::tknc ? 2 : 10;
    cfg.cc_t = 0.8;
    auto c = Criterion::create(cfg, layers, ranges);
    double prev = c.value();
    for (std::size_t i = 0; i < test.size(); i += 5) {
      c.update(to_batch(test, i, i + 5));
      EXPECT_GE(c.value(), prev) << kind_name(kind);
      prev = c.value();
      if (kind != CriterionKind::tknp && kind != CriterionKind::cc) {
        EXPECT_LE(c.value(), 100.0);
        double sum = 0.0;
        for (double v : c.per_layer()) sum += v;
        EXPECT_NEAR(sum, c.value(), 1e-9);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Config parsing

TEST(Config, ParsesKeyValues) {
  const auto cfg = parse_criterion_config("criterion=cc cc_t=0.5\nlayers=a,b  # monitored\n");
  EXPECT_EQ(cfg.kind, CriterionKind::cc);
  EXPECT_EQ(cfg.cc_t, 0.5);
  EXPECT_EQ(cfg.layers, (std::vector<std::string>{"a", "b"}));
  const auto k = parse_criterion_config("criterion=kmnc;k=1000");
  EXPECT_EQ(k.top_k(), 1000u);
  const auto cc = parse_criterion_config("class_conditional=true classes=10");
  EXPECT_TRUE(cc.class_conditional);
  EXPECT_EQ(cc.class_count, 10u);
}

TEST(Config, Defaults) {
  CriterionConfig cfg;
  cfg.kind = CriterionKind::nc;
  EXPECT_EQ(cfg.threshold(), 0.0);
  cfg.kind = CriterionKind::ncs;
  EXPECT_EQ(cfg.threshold(), 0.75);
  cfg.kind = CriterionKind::kmnc;
  EXPECT_EQ(cfg.top_k(), 100u);
  cfg.kind = CriterionKind::tknc;
  EXPECT_EQ(cfg.top_k(), 10u);
}

TEST(Config, RejectsJunk) {
  EXPECT_THROW(parse_criterion_config("criterion=ssc"), Error);
  EXPECT_THROW(parse_criterion_config("t=abc"), Error);
  EXPECT_THROW(parse_criterion_config("k=-3"), Error);
  EXPECT_THROW(parse_criterion_config("bogus=1"), Error);
  EXPECT_THROW(parse_criterion_config("novalue"), Error);
}

TEST(Layers, Validation) {
  EXPECT_THROW(validate_layers({}), Error);
  EXPECT_THROW(validate_layers({{"a", 0}}), Error);
  EXPECT_THROW(validate_layers({{"a", 1}, {"a", 2}}), Error);
}

TEST(Snapshot, RestoreIsBitIdentical) {
  Rng rng(73);
  const LayerList layers{{"a", 4}};
  const auto h = random_history(rng, layers, 20);
  auto c = make(CriterionKind::nlc, layers);
  c.update(to_batch(h, 0, 10));
  const auto snap = c.snapshot();
  c.update(to_batch(h, 10, 20));
  EXPECT_NE(c, snap);
  c.restore(snap);
  EXPECT_EQ(c, snap);
}
