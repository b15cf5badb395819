#include <stdexcept>

#include "internal.hpp"

namespace magicnet::learners {
namespace {

// Mask draws use their own stream so the plastic phase consumes exactly the
// same randomness as a cGRU with the same seed.
constexpr std::uint64_t kMaskStreamSalt = 0x9E3779B97F4A7C15ULL;

}  // namespace

MagicNet::MagicNet(const LearnerConfig& config)
    : StreamLearner(config), mask_rng_(config.seed ^ kMaskStreamSalt) {
  numcore::Rng rng(config_.seed);
  plastic_.emplace(detail::initial_network(config_, rng), config_.adam);
}

std::size_t MagicNet::leader() const {
  if (options_.empty()) throw std::logic_error("MagicNet::leader: no live options");
  // Strict comparison keeps the earliest option on ties; options are ordered
  // MaskFineTune, MaskRandom, Expand.
  std::size_t best = 0;
  for (std::size_t i = 1; i < options_.size(); ++i) {
    if (options_[i].kappa.kappa() > options_[best].kappa.kappa()) best = i;
  }
  return best;
}

const GruNet& MagicNet::active_network() const {
  if (mode_ == Mode::Plastic) return plastic_->effective();
  return options_[leader()].model.effective();
}

double MagicNet::predict_window(const SequenceBatch& window) {
  prediction_pending_ = true;
  if (mode_ == Mode::Plastic) return plastic_->predict(window);
  for (auto& opt : options_) opt.last_probability = opt.model.predict(window);
  return options_[leader()].last_probability;
}

void MagicNet::observe_label(int y) {
  if (mode_ == Mode::Ensemble && prediction_pending_) {
    for (auto& opt : options_) opt.kappa.add(opt.last_probability >= 0.5, y);
  }
  prediction_pending_ = false;
}

std::vector<double> MagicNet::train_batch(const SequenceBatch& sequences) {
  if (mode_ == Mode::Plastic) return plastic_->fit(sequences, config_.epochs);

  std::vector<double> leader_losses;
  const std::size_t lead = leader();
  for (std::size_t i = 0; i < options_.size(); ++i) {
    auto losses = options_[i].model.fit(sequences, config_.epochs);
    if (i == lead) leader_losses = std::move(losses);
  }
  if (mode_ == Mode::Ensemble) {
    ++batches_since_detection_;
    if (batches_since_detection_ >= config_.num_batches) resolve_ensemble();
  }
  return leader_losses;
}

void MagicNet::resolve_ensemble() {
  const std::size_t winner = leader();
  Option kept = std::move(options_[winner]);
  options_.clear();
  options_.push_back(std::move(kept));
  resolutions_.push_back(options_.front().kind);
  mode_ = Mode::Committed;
}

void MagicNet::on_drift_detected() {
  ++detections_;
  if (mode_ == Mode::Plastic) {
    const GruNet& net = plastic_->effective();
    store_.append({concept_index_, net, std::nullopt, OptionKind::Plastic});
    base_ = masking::FrozenBase(net);
    plastic_.reset();
  } else {
    if (mode_ == Mode::Ensemble) resolve_ensemble();
    const Option& winner = options_.front();
    base_ = masking::compose_winner(*winner.model.masked(), winner.kind, concept_index_, store_);
  }
  ++concept_index_;
  discard_partial_batch();
  prediction_pending_ = false;

  bool fell_back = false;
  auto finetune = masking::init_mask_finetune(store_.last_mask(), base_.net(), mask_rng_, &fell_back);
  if (fell_back) ++finetune_fallbacks_;
  auto random = masking::init_mask_random(base_.net(), mask_rng_);
  auto expand = masking::build_expanded(base_, config_.exp_size, mask_rng_);

  options_.clear();
  options_.push_back(
      {OptionKind::MaskFineTune,
       LiveModel(masking::MaskedNetwork(base_, std::move(finetune)), config_.adam), {}, 0.5});
  options_.push_back(
      {OptionKind::MaskRandom,
       LiveModel(masking::MaskedNetwork(base_, std::move(random)), config_.adam), {}, 0.5});
  options_.push_back({OptionKind::Expand, LiveModel(std::move(expand), config_.adam), {}, 0.5});
  batches_since_detection_ = 0;
  mode_ = Mode::Ensemble;
}

std::size_t MagicNet::expansion_count() const {
  std::size_t n = 0;
  for (auto k : resolutions_) n += k == OptionKind::Expand ? 1 : 0;
  if (mode_ == Mode::Ensemble && options_[leader()].kind == OptionKind::Expand) ++n;
  return n;
}

std::size_t MagicNet::parameter_count() const {
  if (mode_ == Mode::Plastic) return plastic_->effective().parameter_count();
  std::size_t n = base_.net().parameter_count();
  for (const auto& opt : options_) n += opt.model.trainable_count();
  return n;
}

ModelCheckpoint MagicNet::snapshot(std::size_t concept_index) const {
  ModelCheckpoint ckpt;
  ckpt.kind = LearnerKind::Magic;
  ckpt.seed = config_.seed;
  ckpt.concept_index = concept_index;
  ckpt.window = config_.window;
  for (const auto& rec : store_.records()) {
    ckpt.networks.push_back({rec.concept_index, rec.option, rec.snapshot, rec.raw_mask});
  }
  if (mode_ == Mode::Plastic) {
    ckpt.networks.push_back({concept_index_, OptionKind::Plastic, plastic_->effective(), std::nullopt});
  } else {
    const Option& live = options_[leader()];
    ckpt.networks.push_back(
        {concept_index_, live.kind, live.model.effective(), live.model.masked()->mask()});
  }
  return ckpt;
}

}  // namespace magicnet::learners
