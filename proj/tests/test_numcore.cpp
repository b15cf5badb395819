#include <gtest/gtest.h>

#include "magicnet/numcore.hpp"
#include "support.hpp"

using namespace magicnet::numcore;
using testing_support::random_net;
using testing_support::random_sequence;

TEST(GruCell, ZeroParametersGiveZeroState) {
  const auto p = GruParams::zeros(3, 4);
  const Vector x{0.3, -1.2, 2.0};
  const auto out = gru_cell_forward(x, Vector(4, 0.0), p);
  for (double v : out.h_new) EXPECT_EQ(v, 0.0);
}

TEST(GruCell, ZeroParametersHalveThePreviousState) {
  const auto p = GruParams::zeros(2, 3);
  const Vector h{1.0, -2.0, 0.25};
  const auto out = gru_cell_forward(Vector{5.0, 7.0}, h, p);
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_DOUBLE_EQ(out.h_new[i], 0.5 * h[i]);
  for (double z : out.cache.z) EXPECT_DOUBLE_EQ(z, 0.5);
}

TEST(GruCell, MatchesScalarEvaluationInOneDimension) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = random_net(1, 1, rng, 1.5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const Vector x{u(rng)}, h{u(rng)};
    const auto& p = net.gru;
    const double z = 1.0 / (1.0 + std::exp(-(p.wz(0, 0) * x[0] + p.uz(0, 0) * h[0] + p.bz[0])));
    const double r = 1.0 / (1.0 + std::exp(-(p.wr(0, 0) * x[0] + p.ur(0, 0) * h[0] + p.br[0])));
    const double c = std::tanh(p.wh(0, 0) * x[0] + p.uh(0, 0) * (r * h[0]) + p.bh[0]);
    const double expected = (1.0 - z) * h[0] + z * c;
    EXPECT_NEAR(gru_cell_forward(x, h, p).h_new[0], expected, 1e-14);
  }
}

TEST(GruCell, DimensionMismatchThrows) {
  const auto p = GruParams::zeros(2, 3);
  EXPECT_ANY_THROW(gru_cell_forward(Vector{1.0}, Vector(3, 0.0), p));
  EXPECT_ANY_THROW(gru_cell_forward(Vector{1.0, 2.0}, Vector(2, 0.0), p));
}

TEST(ForwardSequence, ZeroNetPredictsOneHalf) {
  const auto net = GruNet::zeros(2, 5);
  Rng rng(1);
  const auto out = forward_sequence(random_sequence(4, 2, rng), net);
  EXPECT_EQ(out.logit, 0.0);
  EXPECT_EQ(sigmoid(out.logit), 0.5);
}

TEST(ForwardSequence, SingleStepIsOneCellPlusHead) {
  Rng rng(2);
  const auto net = random_net(3, 4, rng);
  const auto seq = random_sequence(1, 3, rng);
  const auto cell = gru_cell_forward(seq[0], Vector(4, 0.0), net.gru);
  double logit = net.head.b;
  for (std::size_t i = 0; i < 4; ++i) logit += net.head.w[i] * cell.h_new[i];
  EXPECT_NEAR(forward_sequence(seq, net).logit, logit, 1e-14);
}

TEST(ForwardSequence, ChainsCellsAndMatchesReference) {
  Rng rng(3);
  for (std::size_t hidden : {1, 3, 7, 25}) {
    const auto net = random_net(2, hidden, rng);
    const auto seq = random_sequence(3, 2, rng);
    Vector h(hidden, 0.0);
    for (const auto& x : seq) h = gru_cell_forward(x, h, net.gru).h_new;
    double logit = net.head.b;
    for (std::size_t i = 0; i < hidden; ++i) logit += net.head.w[i] * h[i];
    const double got = forward_sequence(seq, net).logit;
    EXPECT_EQ(got, logit);
    EXPECT_NEAR(got, testing_support::ref_logit(seq, net), 1e-12);
  }
}

TEST(ForwardSequence, EmptySequenceThrows) {
  const auto net = GruNet::zeros(2, 3);
  EXPECT_ANY_THROW(forward_sequence(std::vector<Vector>{}, net));
}

TEST(ForwardBatch, ResultsDoNotDependOnBatchComposition) {
  Rng rng(4);
  const auto net = random_net(3, 50, rng);
  std::vector<std::vector<Vector>> seqs;
  for (int n = 0; n < 37; ++n) seqs.push_back(random_sequence(10, 3, rng));
  const auto all = forward_batch(net, testing_support::to_batch(seqs));
  for (std::size_t n = 0; n < seqs.size(); ++n) {
    const auto one = forward_batch(net, testing_support::to_batch({seqs[n]}));
    EXPECT_EQ(one.logits[0], all.logits[n]) << "sequence " << n;
  }
}

TEST(Backward, LogitGradientAtZero) {
  const auto net = GruNet::zeros(2, 3);
  Rng rng(5);
  const auto out = forward_sequence(random_sequence(2, 2, rng), net);
  const auto g = backward_sequence(out, net, 1.0);
  EXPECT_DOUBLE_EQ(g.head.b, -0.5);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(6);
  for (std::size_t hidden : {1, 3, 7, 25}) {
    for (std::size_t window : {1, 5, 10}) {
      auto net = random_net(2, hidden, rng);
      std::vector<std::vector<Vector>> seqs;
      std::vector<double> targets;
      for (int n = 0; n < 4; ++n) {
        seqs.push_back(random_sequence(window, 2, rng));
        targets.push_back(n % 2);
      }
      const auto batch = testing_support::to_batch(seqs, targets);
      const auto grad = backward_batch(net, batch, forward_batch(net, batch));
      const auto loss = testing_support::centered_loss([&] { return net; }, batch);
      const double err = finite_difference_check(loss, tensors(net), tensors(grad));
      EXPECT_LT(err, 1e-4) << "hidden " << hidden << " window " << window;
    }
  }
}

TEST(Adam, ZeroGradientLeavesParametersAndAdvancesStep) {
  Vector p{1.0, -2.0};
  const Vector g{0.0, 0.0};
  std::vector<std::span<double>> params{p};
  std::vector<std::span<const double>> grads{g};
  auto state = AdamState::for_params(params);
  adam_step(params, grads, state);
  EXPECT_EQ(p, (Vector{1.0, -2.0}));
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Vector p{0.0};
  const Vector g{1.0};
  std::vector<std::span<double>> params{p};
  std::vector<std::span<const double>> grads{g};
  auto state = AdamState::for_params(params);
  adam_step(params, grads, state);
  // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(p[0], -0.01 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, IdenticalCallsGiveIdenticalResults) {
  Vector a{0.3, 0.7}, b{0.3, 0.7};
  const Vector g{0.2, -1.5};
  std::vector<std::span<double>> pa{a}, pb{b};
  std::vector<std::span<const double>> grads{g};
  auto sa = AdamState::for_params(pa);
  auto sb = AdamState::for_params(pb);
  for (int i = 0; i < 3; ++i) {
    adam_step(pa, grads, sa);
    adam_step(pb, grads, sb);
  }
  EXPECT_EQ(a, b);
  EXPECT_EQ(sa, sb);
}

TEST(FiniteDifference, QuadraticIsExact) {
  Vector x{0.5, -1.25, 3.0};
  auto loss = [&] { return x[0] * x[0] + 2.0 * x[1] * x[1] + 0.5 * x[2] * x[2]; };
  const Vector grad{2.0 * x[0], 4.0 * x[1], x[2]};
  std::vector<std::span<double>> params{x};
  std::vector<std::span<const double>> analytic{grad};
  EXPECT_LT(finite_difference_check(loss, params, analytic), 1e-8);
  EXPECT_EQ(x, (Vector{0.5, -1.25, 3.0}));
}

TEST(GruNet, ValidateRejectsInconsistentShapes) {
  auto net = GruNet::zeros(2, 3);
  EXPECT_NO_THROW(net.validate());
  net.gru.uh = Matrix(3, 2);
  EXPECT_THROW(net.validate(), std::logic_error);
}
