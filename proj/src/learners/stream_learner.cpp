#include <algorithm>
#include <stdexcept>
#include <string>

#include "magicnet/learners.hpp"

namespace magicnet::learners {

std::string_view to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::CGru: return "cgru";
    case LearnerKind::Magic: return "magic";
    case LearnerKind::Cpnn: return "cpnn";
  }
  return "unknown";
}

LearnerKind learner_kind_from_string(std::string_view name) {
  for (auto k : {LearnerKind::CGru, LearnerKind::Magic, LearnerKind::Cpnn}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown learner '" + std::string(name) +
                              "' (allowed: cgru, magic, cpnn)");
}

void LearnerConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  require(input_dim >= 1, "input_dim must be >= 1");
  require(hidden >= 1, "hidden must be >= 1");
  require(window >= 1, "window must be >= 1");
  require(batch_size >= window, "batch_size must be >= window");
  require(epochs >= 1, "epochs must be >= 1");
  require(adam.lr > 0.0, "lr must be > 0");
  require(exp_size >= 1, "exp_size must be >= 1");
  require(num_batches >= 1, "num_batches must be >= 1");
}

RollingWindow::RollingWindow(std::size_t length, std::size_t dim)
    : length_(length), dim_(dim), ring_(length * dim, 0.0) {
  if (length == 0) throw std::invalid_argument("RollingWindow: length must be >= 1");
}

void RollingWindow::push(std::span<const double> x) {
  if (x.size() != dim_) throw std::invalid_argument("RollingWindow: feature dim mismatch");
  std::copy(x.begin(), x.end(), ring_.begin() + static_cast<std::ptrdiff_t>(head_ * dim_));
  head_ = (head_ + 1) % length_;
  filled_ = std::min(filled_ + 1, length_);
}

SequenceBatch RollingWindow::sequence() const {
  SequenceBatch seq(1, length_, dim_);
  const std::size_t pad = length_ - filled_;
  // Oldest stored point sits at head_ once the ring is full, else at 0.
  const std::size_t oldest = filled_ == length_ ? head_ : 0;
  for (std::size_t i = 0; i < filled_; ++i) {
    const std::size_t slot = (oldest + i) % length_;
    auto dst = seq.at(pad + i, 0);
    std::copy_n(ring_.begin() + static_cast<std::ptrdiff_t>(slot * dim_), dim_, dst.begin());
  }
  return seq;
}

SequenceBatch build_training_sequences(std::span<const LabeledVector> tail,
                                       std::span<const LabeledVector> batch, std::size_t window) {
  const std::size_t total = tail.size() + batch.size();
  if (total < window || batch.empty()) return {};
  const std::size_t dim = batch.front().x.size();
  auto point = [&](std::size_t i) -> const LabeledVector& {
    return i < tail.size() ? tail[i] : batch[i - tail.size()];
  };
  const std::size_t count = total - window + 1;
  SequenceBatch seqs(count, window, dim);
  seqs.targets.resize(count);
  for (std::size_t n = 0; n < count; ++n) {
    for (std::size_t t = 0; t < window; ++t) {
      const auto& p = point(n + t);
      std::copy(p.x.begin(), p.x.end(), seqs.at(t, n).begin());
    }
    seqs.targets[n] = static_cast<double>(point(n + window - 1).y);
  }
  return seqs;
}

SequenceBatch sliding_windows(std::span<const double> features, std::size_t dim,
                              std::size_t window) {
  if (dim == 0 || features.size() % dim != 0) {
    throw std::invalid_argument("sliding_windows: feature storage is not a multiple of dim");
  }
  const std::size_t count = features.size() / dim;
  SequenceBatch seqs(count, window, dim);
  for (std::size_t n = 0; n < count; ++n) {
    for (std::size_t t = 0; t < window; ++t) {
      // step t of the window ending at n holds point n - (window - 1 - t)
      const std::size_t back = window - 1 - t;
      if (back > n) continue;
      const std::size_t src = n - back;
      std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(src * dim), dim,
                  seqs.at(t, n).begin());
    }
  }
  return seqs;
}

// ---------------------------------------------------------------------------

LiveModel::LiveModel(GruNet net, numcore::AdamConfig adam) : model_(std::move(net)) {
  adam_ = numcore::AdamState::for_params(variables(), adam);
  refresh();
}

LiveModel::LiveModel(masking::MaskedNetwork net, numcore::AdamConfig adam)
    : model_(std::move(net)) {
  adam_ = numcore::AdamState::for_params(variables(), adam);
  refresh();
}

std::vector<std::span<double>> LiveModel::variables() {
  if (auto* plain = std::get_if<GruNet>(&model_)) return numcore::tensors(*plain);
  return std::get<masking::MaskedNetwork>(model_).variables();
}

const masking::MaskedNetwork* LiveModel::masked() const {
  return std::get_if<masking::MaskedNetwork>(&model_);
}

std::size_t LiveModel::trainable_count() const {
  if (auto* plain = std::get_if<GruNet>(&model_)) return plain->parameter_count();
  return std::get<masking::MaskedNetwork>(model_).trainable_count();
}

void LiveModel::refresh() {
  if (auto* plain = std::get_if<GruNet>(&model_)) {
    effective_ = *plain;
  } else {
    effective_ = std::get<masking::MaskedNetwork>(model_).effective();
  }
  packed_ = numcore::pack(effective_);
}

std::vector<double> LiveModel::probabilities(const SequenceBatch& seqs) const {
  auto fwd = numcore::forward_batch(packed_, seqs);
  std::vector<double> p(fwd.logits.size());
  std::transform(fwd.logits.begin(), fwd.logits.end(), p.begin(), numcore::sigmoid);
  return p;
}

std::vector<double> LiveModel::fit(const SequenceBatch& seqs, std::size_t epochs) {
  std::vector<double> losses;
  if (seqs.count == 0) return losses;
  losses.reserve(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    auto fwd = numcore::forward_batch(packed_, seqs);
    losses.push_back(numcore::bce_loss(fwd.logits, seqs.targets));
    auto grad = numcore::backward_batch(packed_, seqs, fwd);
    auto vars = variables();
    if (std::holds_alternative<GruNet>(model_)) {
      const auto g = numcore::tensors(std::as_const(grad));
      numcore::adam_step(vars, g, adam_);
    } else {
      auto chained = std::get<masking::MaskedNetwork>(model_).chain_gradient(grad);
      std::vector<std::span<const double>> g(chained.begin(), chained.end());
      numcore::adam_step(vars, g, adam_);
    }
    refresh();
  }
  return losses;
}

// ---------------------------------------------------------------------------

StreamLearner::StreamLearner(const LearnerConfig& config)
    : config_(config), window_(config.window, config.input_dim) {
  config_.validate();
  batch_.reserve(config.batch_size);
}

double StreamLearner::predict(std::span<const double> x) {
  window_.push(x);
  return predict_window(window_.sequence());
}

void StreamLearner::advance(std::span<const double> x) { window_.push(x); }

std::optional<TrainEvent> StreamLearner::learn_one(std::span<const double> x, int y) {
  if (x.size() != config_.input_dim) throw std::invalid_argument("learn_one: feature dim mismatch");
  observe_label(y);
  batch_.push_back(LabeledVector{Vector(x.begin(), x.end()), y});
  if (batch_.size() < config_.batch_size) return std::nullopt;

  auto seqs = build_training_sequences(tail_, batch_, config_.window);
  TrainEvent event;
  event.batch_index = batches_trained_;
  event.sequences = seqs.count;
  event.losses = train_batch(seqs);
  ++batches_trained_;

  const std::size_t keep = config_.window - 1;
  std::vector<LabeledVector> combined;
  combined.reserve(tail_.size() + batch_.size());
  combined.insert(combined.end(), tail_.begin(), tail_.end());
  combined.insert(combined.end(), batch_.begin(), batch_.end());
  const std::size_t start = combined.size() > keep ? combined.size() - keep : 0;
  tail_.assign(combined.begin() + static_cast<std::ptrdiff_t>(start), combined.end());
  batch_.clear();
  return event;
}

std::unique_ptr<StreamLearner> make_learner(LearnerKind kind, const LearnerConfig& config) {
  switch (kind) {
    case LearnerKind::CGru: return std::make_unique<CGru>(config);
    case LearnerKind::Magic: return std::make_unique<MagicNet>(config);
    case LearnerKind::Cpnn: return std::make_unique<Cpnn>(config);
  }
  throw std::invalid_argument("make_learner: unknown kind");
}

}  // namespace magicnet::learners
