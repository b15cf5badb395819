#include "magicnet/masking.hpp"

#include <stdexcept>
#include <string>

namespace magicnet::masking {
namespace {

using numcore::sigmoid;

constexpr std::size_t kFirstRecurrent = 3;
constexpr std::size_t kLastRecurrent = 5;

// Flat index of base tensor entry `i` inside the widened tensor. Only the
// recurrent matrices change row stride; every other tensor keeps its base
// entries as a prefix.
std::size_t widened_index(std::size_t tensor, std::size_t i, std::size_t base_hidden,
                          std::size_t total_hidden) {
  if (tensor >= kFirstRecurrent && tensor <= kLastRecurrent) {
    return (i / base_hidden) * total_hidden + i % base_hidden;
  }
  return i;
}

void require_same_shape(const GruNet& a, const GruNet& b, const char* what) {
  if (a.input_dim() != b.input_dim() || a.hidden_dim() != b.hidden_dim()) {
    throw std::logic_error(std::string(what) + ": shape mismatch (" +
                           std::to_string(a.input_dim()) + "," + std::to_string(a.hidden_dim()) +
                           ") vs (" + std::to_string(b.input_dim()) + "," +
                           std::to_string(b.hidden_dim()) + ")");
  }
}

std::array<Matrix*, 3> input_mats(GruNet& n) { return {&n.gru.wz, &n.gru.wr, &n.gru.wh}; }
std::array<Matrix*, 3> recurrent_mats(GruNet& n) { return {&n.gru.uz, &n.gru.ur, &n.gru.uh}; }
std::array<Vector*, 3> biases(GruNet& n) { return {&n.gru.bz, &n.gru.br, &n.gru.bh}; }
std::array<const Matrix*, 3> input_mats(const GruNet& n) { return {&n.gru.wz, &n.gru.wr, &n.gru.wh}; }
std::array<const Matrix*, 3> recurrent_mats(const GruNet& n) {
  return {&n.gru.uz, &n.gru.ur, &n.gru.uh};
}
std::array<const Vector*, 3> biases(const GruNet& n) { return {&n.gru.bz, &n.gru.br, &n.gru.bh}; }

}  // namespace

GruNet apply_mask(const GruNet& base, const MaskSet& mask) {
  require_same_shape(base, mask.pre, "apply_mask");
  GruNet eff = base;
  auto et = numcore::tensors(eff);
  auto mt = numcore::tensors(mask.pre);
  for (std::size_t k = 0; k < numcore::kTensorCount; ++k) {
    for (std::size_t i = 0; i < et[k].size(); ++i) et[k][i] = et[k][i] * sigmoid(mt[k][i]);
  }
  return eff;
}

MaskSet init_mask_random(const GruNet& shape, Rng& rng) {
  MaskSet mask{GruNet::zeros(shape.input_dim(), shape.hidden_dim())};
  std::uniform_real_distribution<double> dist(-kMaskInitRange, kMaskInitRange);
  for (auto t : numcore::tensors(mask.pre)) {
    for (auto& v : t) v = dist(rng);
  }
  return mask;
}

MaskSet init_mask_finetune(const MaskSet& previous) { return previous; }

MaskSet init_mask_finetune(const std::optional<MaskSet>& previous, const GruNet& shape, Rng& rng,
                           bool* fell_back) {
  if (fell_back) *fell_back = !previous.has_value();
  if (!previous) return init_mask_random(shape, rng);
  const GruNet& prev = previous->pre;
  if (prev.input_dim() == shape.input_dim() && prev.hidden_dim() == shape.hidden_dim()) {
    return init_mask_finetune(*previous);
  }
  if (prev.input_dim() != shape.input_dim() || prev.hidden_dim() > shape.hidden_dim()) {
    throw std::logic_error("init_mask_finetune: previous mask does not fit the current base");
  }
  MaskSet mask = init_mask_random(shape, rng);
  auto dst = numcore::tensors(mask.pre);
  auto src = numcore::tensors(prev);
  for (std::size_t k = 0; k < numcore::kTensorCount; ++k) {
    for (std::size_t i = 0; i < src[k].size(); ++i) {
      dst[k][widened_index(k, i, prev.hidden_dim(), shape.hidden_dim())] = src[k][i];
    }
  }
  return mask;
}

MaskedNetwork::MaskedNetwork(FrozenBase base, MaskSet mask)
    : MaskedNetwork(std::move(base), std::move(mask), ExpansionBlocks{}) {}

MaskedNetwork::MaskedNetwork(FrozenBase base, MaskSet mask, ExpansionBlocks expansion)
    : base_(std::move(base)), mask_(std::move(mask)), expansion_(std::move(expansion)) {
  if (base_.empty()) throw std::logic_error("MaskedNetwork: empty frozen base");
  require_same_shape(base_.net(), mask_.pre, "MaskedNetwork");
  const std::size_t e = expansion_.size;
  const std::size_t d = base_.input_dim();
  const std::size_t h = base_.hidden_dim();
  if (e == 0) return;
  for (std::size_t g = 0; g < 3; ++g) {
    if (expansion_.new_w[g].rows() != e || expansion_.new_w[g].cols() != d ||
        expansion_.new_u[g].rows() != e || expansion_.new_u[g].cols() != h + e ||
        expansion_.new_b[g].size() != e || expansion_.old_from_new[g].rows() != h ||
        expansion_.old_from_new[g].cols() != e) {
      throw std::logic_error("MaskedNetwork: expansion block shape mismatch");
    }
  }
  if (expansion_.out_ext.size() != e) {
    throw std::logic_error("MaskedNetwork: output extension length mismatch");
  }
}

GruNet MaskedNetwork::effective() const {
  const GruNet& base = base_.net();
  const std::size_t h = base.hidden_dim();
  const std::size_t e = expansion_.size;
  const std::size_t total = h + e;
  const std::size_t d = base.input_dim();
  if (e == 0) return apply_mask(base, mask_);

  GruNet eff = GruNet::zeros(d, total);
  auto bt = numcore::tensors(base);
  auto mt = numcore::tensors(mask_.pre);
  auto et = numcore::tensors(eff);
  for (std::size_t k = 0; k < numcore::kTensorCount; ++k) {
    for (std::size_t i = 0; i < bt[k].size(); ++i) {
      et[k][widened_index(k, i, h, total)] = bt[k][i] * sigmoid(mt[k][i]);
    }
  }

  auto w = input_mats(eff);
  auto u = recurrent_mats(eff);
  auto b = biases(eff);
  for (std::size_t g = 0; g < 3; ++g) {
    for (std::size_t j = 0; j < e; ++j) {
      for (std::size_t l = 0; l < d; ++l) (*w[g])(h + j, l) = expansion_.new_w[g](j, l);
      for (std::size_t l = 0; l < total; ++l) (*u[g])(h + j, l) = expansion_.new_u[g](j, l);
      (*b[g])[h + j] = expansion_.new_b[g][j];
    }
    for (std::size_t j = 0; j < h; ++j) {
      for (std::size_t l = 0; l < e; ++l) (*u[g])(j, h + l) = expansion_.old_from_new[g](j, l);
    }
  }
  for (std::size_t j = 0; j < e; ++j) eff.head.w[h + j] = expansion_.out_ext[j];
  return eff;
}

std::vector<std::span<double>> MaskedNetwork::variables() {
  auto vars = numcore::tensors(mask_.pre);
  if (expansion_.size == 0) return vars;
  auto& x = expansion_;
  for (auto& m : x.new_w) vars.push_back(m.data());
  for (auto& m : x.new_u) vars.push_back(m.data());
  for (auto& v : x.new_b) vars.push_back(v);
  for (auto& m : x.old_from_new) vars.push_back(m.data());
  vars.push_back(x.out_ext);
  return vars;
}

std::vector<Vector> MaskedNetwork::chain_gradient(const GradBundle& effective_grad) const {
  const GruNet& base = base_.net();
  const std::size_t h = base.hidden_dim();
  const std::size_t e = expansion_.size;
  const std::size_t total = h + e;
  const std::size_t d = base.input_dim();
  if (effective_grad.hidden_dim() != total || effective_grad.input_dim() != d) {
    throw std::logic_error("chain_gradient: gradient shape does not match effective network");
  }

  std::vector<Vector> out;
  auto bt = numcore::tensors(base);
  auto mt = numcore::tensors(mask_.pre);
  auto gt = numcore::tensors(effective_grad);
  for (std::size_t k = 0; k < numcore::kTensorCount; ++k) {
    Vector g(bt[k].size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = sigmoid(mt[k][i]);
      g[i] = gt[k][widened_index(k, i, h, total)] * bt[k][i] * s * (1.0 - s);
    }
    out.push_back(std::move(g));
  }
  if (e == 0) return out;

  auto w = input_mats(effective_grad);
  auto u = recurrent_mats(effective_grad);
  auto b = biases(effective_grad);
  for (std::size_t g = 0; g < 3; ++g) {
    Vector gw(e * d);
    for (std::size_t j = 0; j < e; ++j) {
      for (std::size_t l = 0; l < d; ++l) gw[j * d + l] = (*w[g])(h + j, l);
    }
    out.push_back(std::move(gw));
  }
  for (std::size_t g = 0; g < 3; ++g) {
    Vector gu(e * total);
    for (std::size_t j = 0; j < e; ++j) {
      for (std::size_t l = 0; l < total; ++l) gu[j * total + l] = (*u[g])(h + j, l);
    }
    out.push_back(std::move(gu));
  }
  for (std::size_t g = 0; g < 3; ++g) {
    out.emplace_back(b[g]->begin() + static_cast<std::ptrdiff_t>(h), b[g]->end());
  }
  for (std::size_t g = 0; g < 3; ++g) {
    Vector gx(h * e);
    for (std::size_t j = 0; j < h; ++j) {
      for (std::size_t l = 0; l < e; ++l) gx[j * e + l] = (*u[g])(j, h + l);
    }
    out.push_back(std::move(gx));
  }
  out.emplace_back(effective_grad.head.w.begin() + static_cast<std::ptrdiff_t>(h),
                   effective_grad.head.w.end());
  return out;
}

std::size_t MaskedNetwork::trainable_count() const {
  std::size_t n = mask_.pre.parameter_count();
  const auto& x = expansion_;
  if (x.size == 0) return n;
  for (std::size_t g = 0; g < 3; ++g) {
    n += x.new_w[g].size() + x.new_u[g].size() + x.new_b[g].size() + x.old_from_new[g].size();
  }
  return n + x.out_ext.size();
}

MaskedNetwork build_expanded(const FrozenBase& base, std::size_t exp_size, Rng& rng) {
  if (exp_size == 0) throw std::invalid_argument("build_expanded: expSize must be >= 1");
  const std::size_t d = base.input_dim();
  const std::size_t h = base.hidden_dim();
  const std::size_t total = h + exp_size;
  MaskSet mask = init_mask_random(base.net(), rng);
  ExpansionBlocks x;
  x.size = exp_size;
  for (std::size_t g = 0; g < 3; ++g) {
    x.new_w[g] = Matrix(exp_size, d);
    numcore::glorot_fill(x.new_w[g], d, exp_size, rng);
  }
  for (std::size_t g = 0; g < 3; ++g) {
    x.new_u[g] = Matrix(exp_size, total);
    numcore::glorot_fill(x.new_u[g], total, exp_size, rng);
  }
  for (std::size_t g = 0; g < 3; ++g) {
    x.new_b[g].assign(exp_size, 0.0);
    x.old_from_new[g] = Matrix(h, exp_size);
  }
  x.out_ext.assign(exp_size, 0.0);
  return MaskedNetwork(base, std::move(mask), std::move(x));
}

std::string_view to_string(OptionKind kind) {
  switch (kind) {
    case OptionKind::Plastic: return "plastic";
    case OptionKind::MaskFineTune: return "mask_finetune";
    case OptionKind::MaskRandom: return "mask_random";
    case OptionKind::Expand: return "expand";
  }
  return "unknown";
}

OptionKind option_kind_from_string(std::string_view name) {
  for (auto k : {OptionKind::Plastic, OptionKind::MaskFineTune, OptionKind::MaskRandom,
                 OptionKind::Expand}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown option kind '" + std::string(name) + "'");
}

std::optional<MaskSet> MaskStore::last_mask() const {
  if (records_.empty()) return std::nullopt;
  return records_.back().raw_mask;
}

FrozenBase compose_winner(const MaskedNetwork& winner, OptionKind kind, std::size_t concept_index,
                          MaskStore& store) {
  GruNet eff = winner.effective();
  store.append(MaskRecord{concept_index, eff, winner.mask(), kind});
  return FrozenBase(std::move(eff));
}

}  // namespace magicnet::masking
