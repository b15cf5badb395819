#pragma once

// Shared fixtures and independent reference implementations used as oracles.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "magicnet/numcore.hpp"

namespace testing_support {

using magicnet::numcore::GruNet;
using magicnet::numcore::Rng;
using magicnet::numcore::SequenceBatch;
using magicnet::numcore::Vector;

inline GruNet random_net(std::size_t input, std::size_t hidden, Rng& rng, double scale = 0.8) {
  GruNet net = GruNet::zeros(input, hidden);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto t : magicnet::numcore::tensors(net)) {
    for (auto& v : t) v = u(rng);
  }
  return net;
}

inline std::vector<Vector> random_sequence(std::size_t length, std::size_t dim, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vector> seq(length, Vector(dim));
  for (auto& x : seq) {
    for (auto& v : x) v = u(rng);
  }
  return seq;
}

inline SequenceBatch to_batch(const std::vector<std::vector<Vector>>& seqs,
                              const std::vector<double>& targets = {}) {
  SequenceBatch b(seqs.size(), seqs.front().size(), seqs.front().front().size());
  for (std::size_t n = 0; n < seqs.size(); ++n) {
    for (std::size_t t = 0; t < b.length; ++t) {
      auto dst = b.at(t, n);
      std::copy(seqs[n][t].begin(), seqs[n][t].end(), dst.begin());
    }
  }
  b.targets = targets;
  return b;
}

inline double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Textbook GRU step, one scalar at a time.
inline Vector ref_cell(const Vector& x, const Vector& h, const GruNet& net) {
  const auto& p = net.gru;
  const std::size_t H = p.hidden_dim();
  const std::size_t D = p.input_dim();
  Vector z(H), r(H), out(H);
  for (std::size_t i = 0; i < H; ++i) {
    double az = p.bz[i], ar = p.br[i];
    for (std::size_t j = 0; j < D; ++j) {
      az += p.wz(i, j) * x[j];
      ar += p.wr(i, j) * x[j];
    }
    for (std::size_t j = 0; j < H; ++j) {
      az += p.uz(i, j) * h[j];
      ar += p.ur(i, j) * h[j];
    }
    z[i] = ref_sigmoid(az);
    r[i] = ref_sigmoid(ar);
  }
  for (std::size_t i = 0; i < H; ++i) {
    double ac = p.bh[i];
    for (std::size_t j = 0; j < D; ++j) ac += p.wh(i, j) * x[j];
    for (std::size_t j = 0; j < H; ++j) ac += p.uh(i, j) * (r[j] * h[j]);
    out[i] = (1.0 - z[i]) * h[i] + z[i] * std::tanh(ac);
  }
  return out;
}

inline double ref_logit(const std::vector<Vector>& seq, const GruNet& net) {
  Vector h(net.hidden_dim(), 0.0);
  for (const auto& x : seq) h = ref_cell(x, h, net);
  double logit = net.head.b;
  for (std::size_t i = 0; i < h.size(); ++i) logit += net.head.w[i] * h[i];
  return logit;
}

/// Mean BCE of a batch evaluated in extended precision by the scalar
/// reference above, independent of the library kernels.
inline long double ref_loss_ld(const GruNet& net, const SequenceBatch& batch) {
  using L = long double;
  const auto& p = net.gru;
  const std::size_t H = p.hidden_dim();
  const std::size_t D = p.input_dim();
  auto sig = [](L x) { return 1.0L / (1.0L + std::exp(-x)); };
  L total = 0.0L;
  for (std::size_t n = 0; n < batch.count; ++n) {
    std::vector<L> h(H, 0.0L), z(H), r(H), next(H);
    for (std::size_t t = 0; t < batch.length; ++t) {
      const auto x = batch.at(t, n);
      for (std::size_t i = 0; i < H; ++i) {
        L az = p.bz[i], ar = p.br[i];
        for (std::size_t j = 0; j < D; ++j) {
          az += static_cast<L>(p.wz(i, j)) * x[j];
          ar += static_cast<L>(p.wr(i, j)) * x[j];
        }
        for (std::size_t j = 0; j < H; ++j) {
          az += static_cast<L>(p.uz(i, j)) * h[j];
          ar += static_cast<L>(p.ur(i, j)) * h[j];
        }
        z[i] = sig(az);
        r[i] = sig(ar);
      }
      for (std::size_t i = 0; i < H; ++i) {
        L ac = p.bh[i];
        for (std::size_t j = 0; j < D; ++j) ac += static_cast<L>(p.wh(i, j)) * x[j];
        for (std::size_t j = 0; j < H; ++j) ac += static_cast<L>(p.uh(i, j)) * (r[j] * h[j]);
        next[i] = (1.0L - z[i]) * h[i] + z[i] * std::tanh(ac);
      }
      h.swap(next);
    }
    L logit = net.head.b;
    for (std::size_t i = 0; i < H; ++i) logit += static_cast<L>(net.head.w[i]) * h[i];
    const L y = batch.targets[n];
    // log(1 + e^-|l|) + max(l, 0) - y l
    total += std::log1p(std::exp(-std::fabs(logit))) + std::max(logit, 0.0L) - y * logit;
  }
  return total / static_cast<L>(batch.count);
}

/// Loss callback for finite_difference_check: the extended-precision loss
/// minus its value at the unperturbed point, so that the tiny differences
/// survive the conversion to double.
template <typename MakeNet>
auto centered_loss(MakeNet make_net, const SequenceBatch& batch) {
  const long double origin = ref_loss_ld(make_net(), batch);
  return [=, &batch] { return static_cast<double>(ref_loss_ld(make_net(), batch) - origin); };
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("magicnet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
