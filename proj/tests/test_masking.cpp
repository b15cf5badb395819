#include <gtest/gtest.h>

#include "magicnet/learners.hpp"
#include "magicnet/masking.hpp"
#include "support.hpp"

using namespace magicnet;
using namespace magicnet::masking;
using numcore::Rng;
using testing_support::random_net;
using testing_support::random_sequence;

namespace {

void randomize(ExpansionBlocks& x, Rng& rng) {
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  auto fill = [&](std::span<double> s) {
    for (auto& v : s) v = u(rng);
  };
  for (std::size_t g = 0; g < 3; ++g) {
    fill(x.new_w[g].data());
    fill(x.new_u[g].data());
    fill(x.new_b[g]);
    fill(x.old_from_new[g].data());
  }
  fill(x.out_ext);
}

double masked_fd_error(MaskedNetwork& net, const numcore::SequenceBatch& batch) {
  const auto eff = net.effective();
  const auto grad = net.chain_gradient(numcore::backward_batch(eff, batch, numcore::forward_batch(eff, batch)));
  std::vector<std::span<const double>> analytic(grad.begin(), grad.end());
  const auto loss = testing_support::centered_loss([&] { return net.effective(); }, batch);
  return numcore::finite_difference_check(loss, net.variables(), analytic);
}

numcore::SequenceBatch random_batch(std::size_t count, std::size_t window, std::size_t dim, Rng& rng) {
  std::vector<std::vector<numcore::Vector>> seqs;
  std::vector<double> targets;
  for (std::size_t n = 0; n < count; ++n) {
    seqs.push_back(random_sequence(window, dim, rng));
    targets.push_back(static_cast<double>(n % 2));
  }
  return testing_support::to_batch(seqs, targets);
}

}  // namespace

TEST(ApplyMask, MultipliesBySigmoidOfPreActivation) {
  Rng rng(1);
  const auto base = random_net(2, 3, rng);
  const auto mask = init_mask_random(base, rng);
  const auto eff = apply_mask(base, mask);
  const auto b = numcore::tensors(base);
  const auto m = numcore::tensors(mask.pre);
  const auto e = numcore::tensors(eff);
  for (std::size_t k = 0; k < b.size(); ++k) {
    for (std::size_t i = 0; i < b[k].size(); ++i) {
      EXPECT_EQ(e[k][i], b[k][i] * numcore::sigmoid(m[k][i]));
    }
  }
}

TEST(ApplyMask, ZeroPreActivationHalvesWeights) {
  Rng rng(2);
  const auto base = random_net(2, 4, rng);
  const MaskSet zero{numcore::GruNet::zeros(2, 4)};
  const auto eff = apply_mask(base, zero);
  EXPECT_EQ(eff.gru.uz(1, 2), 0.5 * base.gru.uz(1, 2));
  EXPECT_EQ(eff.head.b, 0.5 * base.head.b);
}

TEST(ApplyMask, ShapeMismatchThrows) {
  Rng rng(3);
  const auto base = random_net(2, 4, rng);
  const MaskSet other{numcore::GruNet::zeros(2, 5)};
  EXPECT_ANY_THROW(apply_mask(base, other));
}

TEST(InitMask, RandomValuesStayInRange) {
  Rng rng(4);
  const auto mask = init_mask_random(numcore::GruNet::zeros(3, 6), rng);
  for (auto t : numcore::tensors(mask.pre)) {
    for (double v : t) {
      EXPECT_GE(v, -kMaskInitRange);
      EXPECT_LE(v, kMaskInitRange);
    }
  }
}

TEST(InitMask, FineTuneCopiesOrFallsBack) {
  Rng rng(5);
  const auto shape = numcore::GruNet::zeros(2, 3);
  const auto prev = init_mask_random(shape, rng);
  bool fell_back = true;
  EXPECT_EQ(init_mask_finetune(std::optional(prev), shape, rng, &fell_back), prev);
  EXPECT_FALSE(fell_back);
  const auto fresh = init_mask_finetune(std::nullopt, shape, rng, &fell_back);
  EXPECT_TRUE(fell_back);
  EXPECT_EQ(fresh.pre.hidden_dim(), 3u);
}

TEST(InitMask, FineTuneOnGrownBaseKeepsOldBlock) {
  Rng rng(6);
  const auto prev = init_mask_random(numcore::GruNet::zeros(2, 3), rng);
  const auto grown = init_mask_finetune(std::optional(prev), numcore::GruNet::zeros(2, 5), rng);
  EXPECT_EQ(grown.pre.hidden_dim(), 5u);
  EXPECT_EQ(grown.pre.gru.uz(2, 1), prev.pre.gru.uz(2, 1));
  EXPECT_EQ(grown.pre.gru.wh(0, 1), prev.pre.gru.wh(0, 1));
  EXPECT_EQ(grown.pre.head.w[2], prev.pre.head.w[2]);
}

TEST(MaskGradient, MatchesFiniteDifferences) {
  Rng rng(7);
  for (std::size_t hidden : {1, 3, 7, 25}) {
    for (std::size_t window : {1, 5, 10}) {
      MaskedNetwork net(FrozenBase(random_net(2, hidden, rng)),
                        init_mask_random(numcore::GruNet::zeros(2, hidden), rng));
      const auto batch = random_batch(3, window, 2, rng);
      EXPECT_LT(masked_fd_error(net, batch), 1e-4) << "hidden " << hidden << " window " << window;
    }
  }
}

TEST(ExpandGradient, MatchesFiniteDifferences) {
  Rng rng(8);
  for (std::size_t hidden : {1, 3, 7, 25}) {
    for (std::size_t window : {1, 5, 10}) {
      auto net = build_expanded(FrozenBase(random_net(2, hidden, rng)), 2, rng);
      auto blocks = net.expansion();
      randomize(blocks, rng);
      MaskedNetwork live(net.base(), net.mask(), blocks);
      const auto batch = random_batch(3, window, 2, rng);
      EXPECT_LT(masked_fd_error(live, batch), 1e-4) << "hidden " << hidden << " window " << window;
    }
  }
}

TEST(Expand, InitialOutputEqualsMaskedBaseExactly) {
  Rng rng(9);
  const FrozenBase base(random_net(2, 10, rng));
  const auto expanded = build_expanded(base, 4, rng);
  const MaskedNetwork masked(base, expanded.mask());
  const auto batch = random_batch(100, 10, 2, rng);
  const auto a = numcore::forward_batch(expanded.effective(), batch).logits;
  const auto b = numcore::forward_batch(masked.effective(), batch).logits;
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t n = 0; n < a.size(); ++n) EXPECT_EQ(a[n], b[n]);
}

TEST(Expand, ZeroSizeIsRejected) {
  Rng rng(10);
  EXPECT_THROW(build_expanded(FrozenBase(random_net(2, 3, rng)), 0, rng), std::invalid_argument);
}

TEST(Expand, TrainableCountCoversMasksAndNewWeights) {
  Rng rng(11);
  const std::size_t d = 2, h = 4, e = 3;
  const auto net = build_expanded(FrozenBase(random_net(d, h, rng)), e, rng);
  const std::size_t masks = 3 * (h * d + h * h + h) + h + 1;
  const std::size_t fresh = 3 * (e * d + e * (h + e) + e + h * e) + e;
  EXPECT_EQ(net.trainable_count(), masks + fresh);
  EXPECT_EQ(net.effective().hidden_dim(), h + e);
}

TEST(FrozenBase, TrainingLeavesBaseUntouched) {
  Rng rng(12);
  const auto original = random_net(2, 5, rng);
  FrozenBase base(original);
  learners::LiveModel model(build_expanded(base, 3, rng), numcore::AdamConfig{});
  const auto batch = random_batch(16, 5, 2, rng);
  model.fit(batch, 5);
  EXPECT_EQ(base.net(), original);
  EXPECT_EQ(model.masked()->base().net(), original);
}

TEST(MaskStore, ComposeWinnerRecordsEffectiveWeights) {
  Rng rng(13);
  FrozenBase base(random_net(2, 3, rng));
  MaskedNetwork winner(base, init_mask_random(base.net(), rng));
  MaskStore store;
  const auto next = compose_winner(winner, OptionKind::MaskRandom, 1, store);
  ASSERT_EQ(store.size(), 1u);
  EXPECT_EQ(next.net(), winner.effective());
  EXPECT_EQ(store.back().option, OptionKind::MaskRandom);
  EXPECT_EQ(store.last_mask(), winner.mask());
}

TEST(OptionKind, NamesRoundTrip) {
  for (auto k : {OptionKind::Plastic, OptionKind::MaskFineTune, OptionKind::MaskRandom, OptionKind::Expand}) {
    EXPECT_EQ(option_kind_from_string(to_string(k)), k);
  }
  EXPECT_ANY_THROW(option_kind_from_string("bogus"));
}
