#pragma once

// Sigmoid-valued masks over frozen GRU weights, hidden-layer expansion and
// the per-concept mask store.

#include <array>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "magicnet/numcore.hpp"

namespace magicnet::masking {

using numcore::GradBundle;
using numcore::GruNet;
using numcore::Matrix;
using numcore::Rng;
using numcore::Vector;

/// Mask pre-activations, one per entry of the masked net (same layout).
/// The multiplier applied to a weight is sigmoid(pre).
struct MaskSet {
  GruNet pre;

  bool operator==(const MaskSet&) const = default;
};

/// Immutable parameter snapshot shared by every option trained on top of it.
class FrozenBase {
 public:
  FrozenBase() = default;
  explicit FrozenBase(GruNet net) : net_(std::make_shared<const GruNet>(std::move(net))) {}

  bool empty() const { return !net_; }
  const GruNet& net() const { return *net_; }
  std::size_t input_dim() const { return net_->input_dim(); }
  std::size_t hidden_dim() const { return net_->hidden_dim(); }

 private:
  std::shared_ptr<const GruNet> net_;
};

/// effective = base * sigmoid(mask), entry-wise. Throws on shape mismatch.
GruNet apply_mask(const GruNet& base, const MaskSet& mask);

inline constexpr double kMaskInitRange = 0.1;

/// Pre-activations i.i.d. uniform in [-0.1, 0.1], shaped like `shape`.
MaskSet init_mask_random(const GruNet& shape, Rng& rng);

/// Deep copy of the previous concept's mask.
MaskSet init_mask_finetune(const MaskSet& previous);

/// MaskFineTune initialisation against a (possibly grown) base. With no
/// previous mask this is init_mask_random; when the base has grown since
/// the previous mask was learned the old block is copied and the new rows
/// and columns are drawn like init_mask_random. `fell_back` reports the
/// no-history case.
MaskSet init_mask_finetune(const std::optional<MaskSet>& previous, const GruNet& shape, Rng& rng,
                           bool* fell_back = nullptr);

/// Learnable weights for the new hidden units of an Expand option. Gate
/// order is z, r, c.
struct ExpansionBlocks {
  std::size_t size = 0;
  std::array<Matrix, 3> new_w;         // e x input
  std::array<Matrix, 3> new_u;         // e x (h + e)
  std::array<Vector, 3> new_b;         // e
  std::array<Matrix, 3> old_from_new;  // h x e, lets old units read new state
  Vector out_ext;                      // e

  bool operator==(const ExpansionBlocks&) const = default;
};

/// A frozen base under a learnable mask, optionally widened by new units
/// that carry an implicit mask of 1. With an empty expansion this is a
/// MaskRandom/MaskFineTune option; with one it is the Expand option.
class MaskedNetwork {
 public:
  MaskedNetwork(FrozenBase base, MaskSet mask);
  MaskedNetwork(FrozenBase base, MaskSet mask, ExpansionBlocks expansion);

  const FrozenBase& base() const { return base_; }
  const MaskSet& mask() const { return mask_; }
  const ExpansionBlocks& expansion() const { return expansion_; }
  std::size_t exp_size() const { return expansion_.size; }
  std::size_t hidden_dim() const { return base_.hidden_dim() + expansion_.size; }

  /// Full-size weights seen by the forward pass.
  GruNet effective() const;

  /// Trainable tensors: the 11 mask tensors, then (if expanded) new_w[3],
  /// new_u[3], new_b[3], old_from_new[3], out_ext.
  std::vector<std::span<double>> variables();

  /// Maps a gradient w.r.t. effective() onto variables(), same order.
  std::vector<Vector> chain_gradient(const GradBundle& effective_grad) const;

  std::size_t trainable_count() const;

 private:
  FrozenBase base_;
  MaskSet mask_;
  ExpansionBlocks expansion_;
};

using ExpandedParams = MaskedNetwork;

/// Expand option over `base`: random mask over the frozen block, Glorot rows
/// for the new units, zero cross-blocks and zero output extension, so the
/// initial output equals that of the masked base exactly.
MaskedNetwork build_expanded(const FrozenBase& base, std::size_t exp_size, Rng& rng);

enum class OptionKind : std::uint8_t { Plastic = 0, MaskFineTune = 1, MaskRandom = 2, Expand = 3 };

std::string_view to_string(OptionKind kind);
OptionKind option_kind_from_string(std::string_view name);

struct MaskRecord {
  std::size_t concept_index = 0;
  GruNet snapshot;                  // effective weights at concept end
  std::optional<MaskSet> raw_mask;  // absent for the initial plastic network
  OptionKind option = OptionKind::Plastic;

  bool operator==(const MaskRecord&) const = default;
};

class MaskStore {
 public:
  void append(MaskRecord record) { records_.push_back(std::move(record)); }
  const std::vector<MaskRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const MaskRecord& back() const { return records_.back(); }

  /// Raw mask of the most recent record, if it has one.
  std::optional<MaskSet> last_mask() const;

 private:
  std::vector<MaskRecord> records_;
};

/// Bakes the winning option into a new frozen base and appends its record.
FrozenBase compose_winner(const MaskedNetwork& winner, OptionKind kind, std::size_t concept_index,
                          MaskStore& store);

}  // namespace magicnet::masking
