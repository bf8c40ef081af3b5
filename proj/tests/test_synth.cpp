#include <gtest/gtest.h>

#include <set>

#include "nlc/mutate.hpp"
#include "nlc/synth.hpp"

using namespace nlc;

namespace {

RowMatrix uniform_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  return x;
}

}  // namespace

TEST(Variants, Cardinalities) {
  const auto base = uniform_rows(1000, 4, 1);
  EXPECT_EQ(make_variant(base, {Variant::base}, 0).rows(), 1000);
  EXPECT_EQ(make_variant(base, {Variant::times1}, 0).rows(), 1000);
  EXPECT_EQ(make_variant(base, {Variant::times10}, 0).rows(), 10000);
  EXPECT_EQ(make_variant(base, {Variant::base}, 0), base);
}

TEST(Variants, ZeroBoundRepeatsSources) {
  const auto base = uniform_rows(300, 3, 2);
  DatasetScheme s{Variant::times1, 0.0, 100};
  const auto out = make_variant(base, s, 5);
  // Row r and r + 100 come from the same source.
  for (Eigen::Index r = 0; r < 200; ++r) EXPECT_EQ(out.row(r), out.row(r + 100));
  // Exactly 100 distinct rows, each taken from the base set.
  std::set<std::vector<double>> distinct;
  for (Eigen::Index r = 0; r < out.rows(); ++r) distinct.insert({out.row(r).begin(), out.row(r).end()});
  EXPECT_EQ(distinct.size(), 100u);
  for (const auto& row : distinct) {
    bool found = false;
    for (Eigen::Index i = 0; i < base.rows() && !found; ++i) found = std::equal(row.begin(), row.end(), base.row(i).begin());
    EXPECT_TRUE(found);
  }
}

TEST(Variants, OriginsPointAtSources) {
  const auto base = uniform_rows(120, 3, 12);
  const auto set = make_variant_set(base, {Variant::times10, 0.0, 100}, 3);
  ASSERT_EQ(set.origin.size(), 1200u);
  for (std::size_t r = 0; r < set.origin.size(); ++r) {
    EXPECT_EQ(set.x.row(static_cast<Eigen::Index>(r)), base.row(static_cast<Eigen::Index>(set.origin[r])));
  }
  const auto plain = make_variant_set(base, {Variant::base}, 3);
  EXPECT_EQ(plain.origin[7], 7u);
}

TEST(Variants, NoiseWithinBoundAndRange) {
  const auto base = uniform_rows(200, 5, 3);
  const auto clean = make_variant(base, {Variant::times10, 0.0, 100}, 9);
  const auto noisy = make_variant(base, {Variant::times10, 0.1, 100}, 9);
  ASSERT_EQ(clean.rows(), noisy.rows());
  for (Eigen::Index i = 0; i < noisy.size(); ++i) {
    EXPECT_LE(std::abs(noisy.data()[i] - clean.data()[i]), 0.1 + 1e-15);
    EXPECT_GE(noisy.data()[i], 0.0);
    EXPECT_LE(noisy.data()[i], 1.0);
  }
  EXPECT_NE(clean, noisy);
}

TEST(Variants, DeterministicAndErrors) {
  const auto base = uniform_rows(150, 2, 4);
  EXPECT_EQ(make_variant(base, {Variant::times10}, 42), make_variant(base, {Variant::times10}, 42));
  EXPECT_NE(make_variant(base, {Variant::times10}, 42), make_variant(base, {Variant::times10}, 43));
  EXPECT_THROW(make_variant(uniform_rows(50, 2, 1), {Variant::times1}, 0), Error);
  EXPECT_THROW(make_variant(base, {Variant::times1, -0.1}, 0), Error);
  EXPECT_EQ(parse_variant(variant_name(Variant::times10)), Variant::times10);
  EXPECT_THROW(parse_variant("x100"), Error);
}

TEST(GaussianData, ShapeLabelsAndRange) {
  Rng rng(5);
  const auto d = make_gaussian_classifier_data(4, 25, 16, 3.0, rng);
  EXPECT_EQ(d.size(), 100u);
  EXPECT_EQ(d.dim(), 16u);
  EXPECT_EQ(d.classes, 4u);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d.y[i], i / 25);
  EXPECT_GE(d.x.minCoeff(), 0.0);
  EXPECT_LE(d.x.maxCoeff(), 1.0);
  EXPECT_THROW(make_gaussian_classifier_data(1, 10, 4, 3.0, rng), Error);
  EXPECT_THROW(make_gaussian_classifier_data(2, 10, 4, 0.0, rng), Error);
}

TEST(GaussianData, WideSeparationIsLearnable) {
  Rng rng(6);
  const auto d = make_gaussian_classifier_data(2, 100, 8, 10.0, rng);
  TrainConfig cfg;
  cfg.hidden = {8};
  cfg.target_accuracy = 1.0;
  const auto model = train_toy_mlp(d, cfg, {});
  EXPECT_EQ(accuracy(model, d), 1.0);
}

TEST(Training, DeterministicForSeed) {
  Rng a(7), b(7);
  const auto da = make_gaussian_classifier_data(3, 30, 6, 4.0, a);
  const auto db = make_gaussian_classifier_data(3, 30, 6, 4.0, b);
  EXPECT_EQ(da.x, db.x);
  TrainConfig cfg;
  cfg.hidden = {6};
  cfg.target_accuracy = 0.9;
  const auto ma = train_toy_mlp(da, cfg, {});
  const auto mb = train_toy_mlp(db, cfg, {});
  EXPECT_EQ(mlp_to_json(ma), mlp_to_json(mb));
}

TEST(Training, UnreachableTargetFails) {
  Rng rng(8);
  auto d = make_gaussian_classifier_data(2, 50, 4, 3.0, rng);
  for (std::size_t i = 0; i < d.size(); ++i) d.y[i] = static_cast<std::uint32_t>(rng.below(2));  // random labels
  TrainConfig cfg;
  cfg.hidden = {2};
  cfg.epochs = 50;
  cfg.target_accuracy = 1.0;
  try {
    train_toy_mlp(d, cfg, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::training);
  }
}

TEST(Training, ShapeMismatch) {
  Rng rng(9);
  const auto d = make_gaussian_classifier_data(2, 10, 4, 3.0, rng);
  EXPECT_THROW(train_toy_mlp(d, {}, {3, 3, 1}), Error);
}

TEST(BlindSpotToy, FitsTrainingDataAndSeeds) {
  const auto toy = make_blind_spot_toy();
  EXPECT_EQ(toy.train.size(), 200u);
  EXPECT_EQ(accuracy(toy.model, toy.train), 1.0);
  EXPECT_EQ(accuracy(toy.model, toy.seeds), 1.0);
  const auto layers = toy.model.info().layers;
  ASSERT_EQ(layers.size(), 2u);
  EXPECT_EQ(layers[0].neurons, 9u);  // 8 trained + 1 planted
}

TEST(BlindSpotToy, BrightnessGridFindsValidFaults) {
  const auto toy = make_blind_spot_toy();
  const auto shape = toy.model.input_shape();
  std::size_t faults = 0;
  for (std::size_t i = 0; i < toy.seeds.size(); ++i) {
    if (toy.seeds.y[i] != 0) continue;
    const auto img = row_to_image(toy.seeds.x, static_cast<Eigen::Index>(i), shape);
    for (double delta = 0.0; delta <= 0.15; delta += 0.01) {
      const auto m = adjust_brightness(img, delta);
      if (!is_valid(img, m, {}) || toy.model.forward(m).label == 0) continue;
      ++faults;
      break;
    }
  }
  EXPECT_GE(faults, 1u);
}
