#include <algorithm>
#include <stdexcept>

#include "magicnet/learners.hpp"

namespace magicnet::learners {
namespace {

SequenceBatch concat_hidden(const SequenceBatch& raw, const numcore::ForwardResult& fwd) {
  const std::size_t hid = fwd.hidden;
  SequenceBatch out(raw.count, raw.length, raw.dim + hid);
  out.targets = raw.targets;
  for (std::size_t t = 0; t < raw.length; ++t) {
    auto h = fwd.hidden_after(t);
    for (std::size_t n = 0; n < raw.count; ++n) {
      auto dst = out.at(t, n);
      auto x = raw.at(t, n);
      std::copy(x.begin(), x.end(), dst.begin());
      std::copy_n(h.begin() + static_cast<std::ptrdiff_t>(n * hid), hid,
                  dst.begin() + static_cast<std::ptrdiff_t>(raw.dim));
    }
  }
  return out;
}

std::vector<double> to_probabilities(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  std::transform(logits.begin(), logits.end(), p.begin(), numcore::sigmoid);
  return p;
}

}  // namespace

SequenceBatch cascade_input(std::span<const numcore::PackedNet> columns, const SequenceBatch& raw) {
  if (columns.empty()) return raw;
  SequenceBatch input = raw;
  for (const auto& col : columns) {
    auto fwd = numcore::forward_batch(col, input);
    input = concat_hidden(raw, fwd);
  }
  return input;
}

std::vector<std::vector<double>> cascade_probabilities(std::span<const numcore::PackedNet> columns,
                                                       const SequenceBatch& raw) {
  std::vector<std::vector<double>> out;
  SequenceBatch input = raw;
  for (const auto& col : columns) {
    auto fwd = numcore::forward_batch(col, input);
    out.push_back(to_probabilities(fwd.logits));
    input = concat_hidden(raw, fwd);
  }
  return out;
}

InferenceModel::InferenceModel(ModelCheckpoint ckpt) : ckpt_(std::move(ckpt)) {
  if (ckpt_.networks.empty()) throw std::invalid_argument("InferenceModel: checkpoint has no networks");
  packed_.reserve(ckpt_.networks.size());
  for (const auto& n : ckpt_.networks) packed_.push_back(numcore::pack(n.net));
}

std::vector<std::vector<double>> InferenceModel::candidate_probabilities(
    const SequenceBatch& windows) const {
  if (ckpt_.kind == LearnerKind::Cpnn) return cascade_probabilities(packed_, windows);
  std::vector<std::vector<double>> out;
  out.reserve(packed_.size());
  for (const auto& p : packed_) out.push_back(to_probabilities(numcore::forward_batch(p, windows).logits));
  return out;
}

std::vector<double> InferenceModel::predict(const SequenceBatch& windows) const {
  if (ckpt_.kind == LearnerKind::Cpnn) {
    auto input = cascade_input(std::span(packed_).first(packed_.size() - 1), windows);
    return to_probabilities(numcore::forward_batch(packed_.back(), input).logits);
  }
  return to_probabilities(numcore::forward_batch(packed_.back(), windows).logits);
}

InferenceModel restore(ModelCheckpoint ckpt) { return InferenceModel(std::move(ckpt)); }

std::vector<std::vector<double>> candidate_probabilities(const ModelCheckpoint& ckpt,
                                                         const SequenceBatch& windows) {
  return InferenceModel(ckpt).candidate_probabilities(windows);
}

}  // namespace magicnet::learners
