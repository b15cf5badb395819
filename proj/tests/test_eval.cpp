#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "magicnet/eval.hpp"
#include "support.hpp"

using namespace magicnet;
using namespace magicnet::eval;

namespace {

double kappa_from_counts(double tp, double fn, double fp, double tn) {
  const double n = tp + fn + fp + tn;
  if (n == 0) return 0.0;
  const double po = (tp + tn) / n;
  const double pe = ((tp + fn) * (tp + fp) + (fp + tn) * (fn + tn)) / (n * n);
  return pe == 1.0 ? 0.0 : (po - pe) / (1.0 - pe);
}

double brute_avg(const std::vector<std::vector<double>>& r) {
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j <= i; ++j, ++n) s += r[i][j];
  }
  return s / n;
}

double brute_bwt(const std::vector<std::vector<double>>& r) {
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j, ++n) s += r[i][j] - r[j][j];
  }
  return s / n;
}

// Emits a fixed probability per point and records what the harness asks.
class ScriptedLearner final : public learners::StreamLearner {
 public:
  explicit ScriptedLearner(const learners::LearnerConfig& c) : StreamLearner(c) {}

  void on_drift_detected() override { drift_calls.push_back(predictions); }
  learners::ModelCheckpoint snapshot(std::size_t concept_index) const override {
    learners::ModelCheckpoint ckpt;
    ckpt.concept_index = concept_index;
    ckpt.window = config_.window;
    ckpt.networks.push_back({concept_index, masking::OptionKind::Plastic,
                             numcore::GruNet::zeros(config_.input_dim, 1), std::nullopt});
    return ckpt;
  }
  learners::LearnerKind kind() const override { return learners::LearnerKind::CGru; }
  std::size_t parameter_count() const override { return 7; }

  std::size_t predictions = 0;
  std::size_t trained_batches = 0;
  std::vector<std::size_t> drift_calls;  // predictions made before each call

 protected:
  double predict_window(const numcore::SequenceBatch&) override {
    return (predictions++ % 3 == 0) ? 0.9 : 0.1;
  }
  std::vector<double> train_batch(const numcore::SequenceBatch&) override {
    ++trained_batches;
    return {};
  }
};

streams::LabeledStream toy_stream(std::size_t concepts, std::size_t length) {
  streams::LabeledStream s;
  s.dim = 1;
  for (std::size_t c = 0; c < concepts; ++c) {
    s.concept_starts.push_back(c * length);
    s.labelers.push_back("c" + std::to_string(c));
    for (std::size_t i = 0; i < length; ++i) {
      s.x.push_back(static_cast<double>(i));
      s.y.push_back(static_cast<int>((i * 7 + c) % 3 == 0));
    }
  }
  return s;
}

learners::LearnerConfig toy_config() {
  learners::LearnerConfig c;
  c.input_dim = 1;
  c.hidden = 2;
  c.window = 2;
  c.batch_size = 10;
  return c;
}

detectors::DetectionSchedule schedule_at(std::vector<std::size_t> ts) {
  detectors::DetectionSchedule s;
  for (auto t : ts) s.detections.push_back({t, detectors::Tag::TruePositive});
  return s;
}

}  // namespace

TEST(Kappa, HandComputedTable) {
  const Confusion c{40, 10, 20, 30};
  EXPECT_NEAR(cohen_kappa(c), 0.4, 1e-15);
}

TEST(Kappa, PerfectAndDegenerateTables) {
  EXPECT_DOUBLE_EQ(cohen_kappa({5, 0, 0, 5}), 1.0);
  EXPECT_EQ(cohen_kappa({}), 0.0);
  EXPECT_EQ(cohen_kappa({0, 0, 0, 9}), 0.0);
}

TEST(Kappa, AccumulatorMatchesFormula) {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.4);
  KappaAccumulator acc;
  double tp = 0, fn = 0, fp = 0, tn = 0;
  for (int i = 0; i < 500; ++i) {
    const bool p = coin(rng);
    const int y = coin(rng) ? 1 : 0;
    acc.add(p, y);
    (y ? (p ? tp : fn) : (p ? fp : tn)) += 1;
    ASSERT_NEAR(acc.kappa(), kappa_from_counts(tp, fn, fp, tn), 1e-12);
  }
}

TEST(Metrics, AvgAndBwtMatchBruteForce) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> size(2, 10);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = size(rng);
    RMatrix r(n);
    std::vector<std::vector<double>> plain(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        r(i, j) = u(rng);
        plain[i].push_back(r(i, j));
      }
    }
    ASSERT_NEAR(avg_metric(r), brute_avg(plain), 1e-12);
    ASSERT_NEAR(bwt_metric(r).value, brute_bwt(plain), 1e-12);
  }
}

TEST(Metrics, BwtNeedsTwoConcepts) {
  RMatrix r(1);
  r(0, 0) = 0.8;
  EXPECT_FALSE(bwt_metric(r).defined);
  EXPECT_DOUBLE_EQ(avg_metric(r), 0.8);
}

TEST(RMatrix, UpperTriangleIsOutOfRange) {
  RMatrix r(3);
  EXPECT_NO_THROW(r(2, 2));
  EXPECT_THROW(r(1, 2), std::out_of_range);
  EXPECT_THROW(r(3, 0), std::out_of_range);
}

TEST(Prequential, CallOrderWithholdingAndAnchors) {
  const auto stream = toy_stream(3, 100);
  ScriptedLearner learner(toy_config());
  PrequentialOptions opt;
  opt.withheld = 20;
  opt.start_batches = 2;
  const auto rep = run_prequential(learner, stream, schedule_at({105, 250}), opt);

  EXPECT_EQ(rep.probabilities.size(), 240u);
  EXPECT_EQ(learner.predictions, 240u);
  EXPECT_EQ(learner.trained_batches, 24u);
  // Detections fire before the stamped point is predicted: point 105 is the
  // 85th scored point, point 250 the 210th.
  EXPECT_EQ(learner.drift_calls, (std::vector<std::size_t>{85, 210}));
  EXPECT_EQ(rep.detections_applied, 2u);

  EXPECT_FALSE(rep.concepts[0].anchor.has_value());
  EXPECT_EQ(rep.concepts[1].anchor, 105u);
  EXPECT_EQ(rep.concepts[1].start_t, 125u);
  EXPECT_TRUE(rep.concepts[1].start.has_value());
  // Concept 2 scores up to 280; 250 + 20 = 270 still fits.
  EXPECT_EQ(rep.concepts[2].start_t, 270u);

  ASSERT_EQ(rep.test_sets.size(), 3u);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(rep.test_sets[c].size(), 20u);
    EXPECT_EQ(rep.test_sets[c].first_t, c * 100 + 80);
  }
  EXPECT_EQ(rep.checkpoints.size(), 3u);
  EXPECT_EQ(rep.parameter_counts, (std::vector<std::size_t>{7, 7, 7}));
}

TEST(Prequential, ScoresFollowTheResetAccumulator) {
  const auto stream = toy_stream(2, 100);
  ScriptedLearner learner(toy_config());
  PrequentialOptions opt;
  opt.withheld = 10;
  opt.start_batches = 1;
  const auto rep = run_prequential(learner, stream, schedule_at({120}), opt);
  // Replay the scripted predictions from the reset onwards.
  double tp = 0, fn = 0, fp = 0, tn = 0;
  std::size_t k = 0;
  double start = 0.0;
  for (std::size_t t = 0; t < 190; ++t) {
    if (t >= 90 && t < 100) continue;
    const double p = (k++ % 3 == 0) ? 0.9 : 0.1;
    if (t < 120) continue;
    const int y = stream.y[t];
    (y ? (p >= 0.5 ? tp : fn) : (p >= 0.5 ? fp : tn)) += 1;
    if (t == 129) start = kappa_from_counts(tp, fn, fp, tn);
  }
  EXPECT_NEAR(*rep.concepts[1].start, start, 1e-12);
  EXPECT_NEAR(rep.concepts[1].end, kappa_from_counts(tp, fn, fp, tn), 1e-12);
  EXPECT_DOUBLE_EQ(rep.end, rep.concepts[1].end);
}

TEST(Prequential, LaterDetectionBreaksTheStartWindow) {
  const auto stream = toy_stream(2, 100);
  ScriptedLearner learner(toy_config());
  PrequentialOptions opt;
  opt.withheld = 10;
  opt.start_batches = 3;
  const auto rep = run_prequential(learner, stream, schedule_at({105, 120}), opt);
  EXPECT_EQ(rep.concepts[1].anchor, 105u);
  EXPECT_FALSE(rep.concepts[1].start.has_value());
  EXPECT_EQ(rep.start_count, 0u);
}

TEST(Prequential, RejectsBadInputs) {
  ScriptedLearner learner(toy_config());
  PrequentialOptions opt;
  opt.withheld = 100;
  EXPECT_THROW(run_prequential(learner, toy_stream(2, 100), {}, opt), std::invalid_argument);
  opt.withheld = 10;
  EXPECT_THROW(run_prequential(learner, toy_stream(2, 100), schedule_at({200}), opt),
               std::invalid_argument);
}

TEST(ClEval, RaceFollowsBruteForceOracle) {
  numcore::Rng rng(3);
  learners::ModelCheckpoint ckpt;
  ckpt.kind = learners::LearnerKind::Magic;
  ckpt.window = 4;
  for (std::size_t i = 0; i < 3; ++i) {
    ckpt.networks.push_back({i, masking::OptionKind::Plastic, testing_support::random_net(2, 3, rng, 2.0),
                             std::nullopt});
  }
  TestSet test;
  test.dim = 2;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 300; ++t) {
    const double a = u(rng), b = u(rng);
    test.x.insert(test.x.end(), {a, b});
    test.y.push_back(a + 0.3 * b > 0.6 ? 1 : 0);
  }
  const std::size_t race = 120;
  const auto score = evaluate_checkpoint(ckpt, test, race);
  const auto cand = learners::candidate_probabilities(
      ckpt, learners::sliding_windows(test.x, test.dim, ckpt.window));

  auto kappa_until = [&](std::size_t c, std::size_t end) {
    double tp = 0, fn = 0, fp = 0, tn = 0;
    for (std::size_t t = 0; t < end; ++t) {
      const bool p = cand[c][t] >= 0.5;
      (test.y[t] ? (p ? tp : fn) : (p ? fp : tn)) += 1;
    }
    return kappa_from_counts(tp, fn, fp, tn);
  };
  auto best_until = [&](std::size_t end) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cand.size(); ++c) {
      if (kappa_until(c, end) >= kappa_until(best, end)) best = c;
    }
    return best;
  };
  const std::size_t winner = best_until(race);
  EXPECT_EQ(score.selected, winner);
  double tp = 0, fn = 0, fp = 0, tn = 0;
  for (std::size_t t = 0; t < test.size(); ++t) {
    const std::size_t who = t < race ? best_until(t) : winner;
    ASSERT_EQ(score.emitted[t], cand[who][t]) << "point " << t;
    const bool p = cand[who][t] >= 0.5;
    (test.y[t] ? (p ? tp : fn) : (p ? fp : tn)) += 1;
  }
  EXPECT_NEAR(score.kappa, kappa_from_counts(tp, fn, fp, tn), 1e-12);
}

TEST(ClEval, SingleNetworkAnswersAlone) {
  numcore::Rng rng(4);
  learners::ModelCheckpoint ckpt;
  ckpt.window = 3;
  ckpt.networks.push_back({0, masking::OptionKind::Plastic, testing_support::random_net(1, 2, rng), std::nullopt});
  TestSet test{0, 0, 1, {0.1, 0.5, 0.9, 0.3}, {0, 1, 1, 0}};
  const auto s = evaluate_checkpoint(ckpt, test);
  EXPECT_EQ(s.selected, 0u);
  const auto p = learners::restore(ckpt).predict(learners::sliding_windows(test.x, 1, 3));
  EXPECT_EQ(s.emitted, p);
}

TEST(ClEval, MatrixShapeAndCountMismatch) {
  EXPECT_THROW(run_cl_eval({learners::ModelCheckpoint{}}, {}), std::invalid_argument);
}

TEST(CheckpointIo, RoundTripIsExact) {
  numcore::Rng rng(5);
  learners::ModelCheckpoint ckpt;
  ckpt.kind = learners::LearnerKind::Magic;
  ckpt.seed = 99;
  ckpt.concept_index = 2;
  ckpt.window = 10;
  ckpt.networks.push_back({0, masking::OptionKind::Plastic, testing_support::random_net(2, 3, rng), std::nullopt});
  ckpt.networks.push_back({1, masking::OptionKind::Expand, testing_support::random_net(2, 5, rng),
                           masking::MaskSet{testing_support::random_net(2, 3, rng)}});
  const auto bytes = serialize_checkpoint(ckpt);
  EXPECT_EQ(deserialize_checkpoint(bytes), ckpt);

  const auto dir = testing_support::scratch_dir("ckpt");
  save_checkpoint(ckpt, dir / "a.ckpt");
  EXPECT_EQ(load_checkpoint(dir / "a.ckpt"), ckpt);
}

TEST(CheckpointIo, ErrorKinds) {
  numcore::Rng rng(6);
  learners::ModelCheckpoint ckpt;
  ckpt.window = 5;
  ckpt.networks.push_back({0, masking::OptionKind::Plastic, testing_support::random_net(2, 3, rng), std::nullopt});
  const auto good = serialize_checkpoint(ckpt);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), BadMagicError);

  auto bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(deserialize_checkpoint(bad_version), VersionMismatchError);

  for (std::size_t cut : {std::size_t{6}, std::size_t{30}, good.size() / 2, good.size() - 1}) {
    const std::vector<std::uint8_t> part(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(deserialize_checkpoint(part), TruncatedCheckpointError) << "cut at " << cut;
  }

  auto extra = good;
  extra.push_back(0);
  EXPECT_THROW(deserialize_checkpoint(extra), ShapeMismatchError);

  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt"), CheckpointError);
}

TEST(CheckpointIo, InconsistentNetworksAreShapeErrors) {
  numcore::Rng rng(7);
  learners::ModelCheckpoint ckpt;
  ckpt.window = 5;
  ckpt.networks.push_back({0, masking::OptionKind::Plastic, testing_support::random_net(2, 3, rng), std::nullopt});
  ckpt.networks.push_back({1, masking::OptionKind::MaskRandom, testing_support::random_net(4, 3, rng), std::nullopt});
  EXPECT_THROW(deserialize_checkpoint(serialize_checkpoint(ckpt)), ShapeMismatchError);
}
