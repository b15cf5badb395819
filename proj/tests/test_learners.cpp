#include <gtest/gtest.h>

#include "magicnet/learners.hpp"
#include "support.hpp"

using namespace magicnet;
using namespace magicnet::learners;

namespace {

LearnerConfig small_config(std::uint64_t seed = 3) {
  LearnerConfig c;
  c.input_dim = 2;
  c.hidden = 6;
  c.window = 4;
  c.batch_size = 16;
  c.epochs = 2;
  c.exp_size = 2;
  c.num_batches = 3;
  c.seed = seed;
  return c;
}

struct Point {
  std::vector<double> x;
  int y;
};

std::vector<Point> toy_points(std::size_t n, std::uint64_t seed) {
  numcore::Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u(rng), b = u(rng);
    pts.push_back({{a, b}, a > b ? 1 : 0});
  }
  return pts;
}

std::vector<double> feed(StreamLearner& learner, const std::vector<Point>& pts, std::size_t from,
                         std::size_t to) {
  std::vector<double> probs;
  for (std::size_t i = from; i < to; ++i) {
    probs.push_back(learner.predict(pts[i].x));
    learner.learn_one(pts[i].x, pts[i].y);
  }
  return probs;
}

}  // namespace

TEST(RollingWindow, LeftPadsWithZeros) {
  RollingWindow w(3, 2);
  w.push(std::vector<double>{1.0, 2.0});
  auto s = w.sequence();
  EXPECT_EQ(s.length, 3u);
  EXPECT_EQ(s.at(0, 0)[0], 0.0);
  EXPECT_EQ(s.at(1, 0)[1], 0.0);
  EXPECT_EQ(s.at(2, 0)[0], 1.0);
  for (double v : {3.0, 5.0, 7.0}) w.push(std::vector<double>{v, v});
  s = w.sequence();
  EXPECT_EQ(s.at(0, 0)[0], 3.0);
  EXPECT_EQ(s.at(2, 0)[1], 7.0);
}

TEST(TrainingSequences, CountAndLabels) {
  std::vector<LabeledVector> tail{{{0.1}, 0}, {{0.2}, 1}};
  std::vector<LabeledVector> batch{{{0.3}, 0}, {{0.4}, 1}, {{0.5}, 1}};
  const auto s = build_training_sequences(tail, batch, 3);
  ASSERT_EQ(s.count, 3u);
  EXPECT_EQ(s.targets, (std::vector<double>{0.0, 1.0, 1.0}));
  EXPECT_EQ(s.at(0, 0)[0], 0.1);
  EXPECT_EQ(s.at(2, 2)[0], 0.5);
  EXPECT_EQ(build_training_sequences({}, std::span(batch).first(2), 3).count, 0u);
}

TEST(SlidingWindows, OneWindowPerPoint) {
  const std::vector<double> xs{1.0, 2.0, 3.0};
  const auto w = sliding_windows(xs, 1, 2);
  ASSERT_EQ(w.count, 3u);
  EXPECT_EQ(w.at(0, 0)[0], 0.0);
  EXPECT_EQ(w.at(1, 0)[0], 1.0);
  EXPECT_EQ(w.at(0, 2)[0], 2.0);
  EXPECT_EQ(w.at(1, 2)[0], 3.0);
}

TEST(CGru, TrainsOncePerMiniBatch) {
  CGru learner(small_config());
  const auto pts = toy_points(40, 1);
  feed(learner, pts, 0, 15);
  EXPECT_EQ(learner.batches_trained(), 0u);
  feed(learner, pts, 15, 16);
  EXPECT_EQ(learner.batches_trained(), 1u);
  EXPECT_EQ(learner.pending_points(), 0u);
  feed(learner, pts, 16, 40);
  EXPECT_EQ(learner.batches_trained(), 2u);
}

TEST(CGru, LearnsASimpleConcept) {
  auto cfg = small_config();
  cfg.epochs = 10;
  CGru learner(cfg);
  const auto pts = toy_points(3000, 2);
  const auto probs = feed(learner, pts, 0, pts.size());
  int correct = 0;
  for (std::size_t i = 2000; i < pts.size(); ++i) correct += (probs[i] >= 0.5) == (pts[i].y == 1);
  EXPECT_GT(correct, 800);
}

TEST(MagicNet, MatchesCGruWithoutDetections) {
  const auto pts = toy_points(500, 3);
  CGru c(small_config(9));
  MagicNet m(small_config(9));
  const auto a = feed(c, pts, 0, pts.size());
  const auto b = feed(m, pts, 0, pts.size());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]) << "point " << i;
}

TEST(MagicNet, EnsemblePhaseKeepsBaseFrozenAndResolves) {
  const auto cfg = small_config();
  MagicNet m(cfg);
  const auto pts = toy_points(400, 4);
  feed(m, pts, 0, 100);
  m.on_drift_detected();
  ASSERT_EQ(m.mode(), MagicNet::Mode::Ensemble);
  ASSERT_EQ(m.options().size(), 3u);
  EXPECT_EQ(m.options()[0].kind, OptionKind::MaskFineTune);
  EXPECT_EQ(m.options()[1].kind, OptionKind::MaskRandom);
  EXPECT_EQ(m.options()[2].kind, OptionKind::Expand);
  EXPECT_EQ(m.finetune_fallbacks(), 1u);
  const auto before = m.frozen_base().net();

  feed(m, pts, 100, 100 + cfg.batch_size * cfg.num_batches);
  EXPECT_EQ(m.frozen_base().net(), before);
  for (const auto& opt : m.options()) EXPECT_EQ(opt.model.masked()->base().net(), before);
  EXPECT_EQ(m.mode(), MagicNet::Mode::Committed);
  EXPECT_EQ(m.options().size(), 1u);
  EXPECT_EQ(m.resolutions().size(), 1u);
}

TEST(MagicNet, SecondDetectionComposesTheWinner) {
  const auto cfg = small_config();
  MagicNet m(cfg);
  const auto pts = toy_points(400, 5);
  feed(m, pts, 0, 50);
  m.on_drift_detected();
  feed(m, pts, 50, 150);
  m.on_drift_detected();
  EXPECT_EQ(m.mask_store().size(), 2u);
  EXPECT_EQ(m.detections(), 2u);
  EXPECT_EQ(m.finetune_fallbacks(), 1u);
  const auto& rec = m.mask_store().back();
  EXPECT_EQ(m.frozen_base().net(), rec.snapshot);
  EXPECT_TRUE(rec.raw_mask.has_value());
}

TEST(MagicNet, SnapshotListsStoredNetworksThenLive) {
  MagicNet m(small_config());
  const auto pts = toy_points(200, 6);
  feed(m, pts, 0, 40);
  m.on_drift_detected();
  feed(m, pts, 40, 80);
  const auto ckpt = m.snapshot(1);
  ASSERT_EQ(ckpt.networks.size(), 2u);
  EXPECT_EQ(ckpt.networks[0].option, OptionKind::Plastic);
  EXPECT_EQ(ckpt.networks[1].net, m.active_network());
}

TEST(Cpnn, AddsOneColumnPerDetection) {
  const auto cfg = small_config();
  Cpnn p(cfg);
  const auto pts = toy_points(300, 7);
  std::vector<std::size_t> counts{p.parameter_count()};
  for (int d = 0; d < 3; ++d) {
    feed(p, pts, d * 60, d * 60 + 60);
    p.on_drift_detected();
    counts.push_back(p.parameter_count());
  }
  EXPECT_EQ(p.column_count(), 4u);
  // Every later column has the same shape: input widened by the hidden size.
  const std::size_t later = counts[2] - counts[1];
  EXPECT_EQ(counts[3] - counts[2], later);
  EXPECT_EQ(p.current_column().effective().input_dim(), cfg.input_dim + cfg.hidden);
}

TEST(Checkpoint, RestoredModelReproducesLivePredictions) {
  for (auto kind : {LearnerKind::CGru, LearnerKind::Magic, LearnerKind::Cpnn}) {
    auto learner = make_learner(kind, small_config());
    const auto pts = toy_points(200, 8);
    feed(*learner, pts, 0, 80);
    learner->on_drift_detected();
    feed(*learner, pts, 80, 150);
    const auto model = restore(learner->snapshot(1));
    RollingWindow w(4, 2);
    for (std::size_t i = 146; i < 150; ++i) w.push(pts[i].x);
    for (std::size_t i = 150; i < 160; ++i) {
      w.push(pts[i].x);
      EXPECT_EQ(learner->predict(pts[i].x), model.predict(w.sequence()).front())
          << to_string(kind) << " point " << i;
    }
  }
}

TEST(LearnerKind, ParsesNames) {
  EXPECT_EQ(learner_kind_from_string("cgru"), LearnerKind::CGru);
  EXPECT_EQ(learner_kind_from_string("magic"), LearnerKind::Magic);
  EXPECT_EQ(learner_kind_from_string("cpnn"), LearnerKind::Cpnn);
  EXPECT_THROW(learner_kind_from_string("lstm"), std::invalid_argument);
}

TEST(LearnerConfig, ValidateRejectsWindowLongerThanBatch) {
  auto cfg = small_config();
  cfg.window = 20;
  EXPECT_ANY_THROW(cfg.validate());
}
