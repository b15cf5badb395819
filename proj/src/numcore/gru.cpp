#include <algorithm>
#include <bit>
#include <cstring>
#include <stdexcept>
#include <string>

#include "magicnet/numcore.hpp"

namespace magicnet::numcore {
namespace {

// out[i, j] += sum_l A(i, l) * b[l, j] with A(i, l) = a[i * a_rs + l * a_cs].
// Every output element starts from its stored value and adds the l terms in
// ascending order, whatever the blocking, so results do not depend on n, m
// or on zero columns appended to the operands.
using v4d = double __attribute__((vector_size(32)));

inline v4d load4(const double* p) {
  v4d v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store4(double* p, v4d v) { std::memcpy(p, &v, sizeof v); }

template <std::size_t MR>
std::size_t gemm_rows(const double* __restrict a, std::size_t a_rs, std::size_t a_cs,
                      const double* __restrict b, std::size_t ldb, double* __restrict out,
                      std::size_t ldo, std::size_t i0, std::size_t n, std::size_t k,
                      std::size_t m) {
  std::size_t i = i0;
  for (; i + MR <= n; i += MR) {
    std::size_t j = 0;
    for (; j + 8 <= m; j += 8) {
      v4d lo[MR];
      v4d hi[MR];
      for (std::size_t r = 0; r < MR; ++r) {
        lo[r] = load4(out + (i + r) * ldo + j);
        hi[r] = load4(out + (i + r) * ldo + j + 4);
      }
      for (std::size_t l = 0; l < k; ++l) {
        const v4d b0 = load4(b + l * ldb + j);
        const v4d b1 = load4(b + l * ldb + j + 4);
        for (std::size_t r = 0; r < MR; ++r) {
          const double av = a[(i + r) * a_rs + l * a_cs];
          lo[r] += av * b0;
          hi[r] += av * b1;
        }
      }
      for (std::size_t r = 0; r < MR; ++r) {
        store4(out + (i + r) * ldo + j, lo[r]);
        store4(out + (i + r) * ldo + j + 4, hi[r]);
      }
    }
    for (; j + 4 <= m; j += 4) {
      v4d acc[MR];
      for (std::size_t r = 0; r < MR; ++r) acc[r] = load4(out + (i + r) * ldo + j);
      for (std::size_t l = 0; l < k; ++l) {
        const v4d b0 = load4(b + l * ldb + j);
        for (std::size_t r = 0; r < MR; ++r) acc[r] += a[(i + r) * a_rs + l * a_cs] * b0;
      }
      for (std::size_t r = 0; r < MR; ++r) store4(out + (i + r) * ldo + j, acc[r]);
    }
    for (; j < m; ++j) {
      double acc[MR];
      for (std::size_t r = 0; r < MR; ++r) acc[r] = out[(i + r) * ldo + j];
      for (std::size_t l = 0; l < k; ++l) {
        const double bv = b[l * ldb + j];
        for (std::size_t r = 0; r < MR; ++r) acc[r] += a[(i + r) * a_rs + l * a_cs] * bv;
      }
      for (std::size_t r = 0; r < MR; ++r) out[(i + r) * ldo + j] = acc[r];
    }
  }
  return i;
}

void gemm_acc(const double* a, std::size_t a_rs, std::size_t a_cs, const double* b,
              std::size_t ldb, double* out, std::size_t ldo, std::size_t n, std::size_t k,
              std::size_t m) {
  std::size_t i = gemm_rows<4>(a, a_rs, a_cs, b, ldb, out, ldo, 0, n, k, m);
  gemm_rows<1>(a, a_rs, a_cs, b, ldb, out, ldo, i, n, k, m);
}

// out[i, j] += sum_l a[i, l] * b[l, j]
void accumulate_ab(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* out,
                   std::size_t ldo, std::size_t n, std::size_t k, std::size_t m) {
  gemm_acc(a, lda, 1, b, ldb, out, ldo, n, k, m);
}

// out[j, l] += sum_i a[i, j] * b[i, l], with i ascending.
void accumulate_atb(const double* a, std::size_t lda, const double* b, std::size_t ldb,
                    double* out, std::size_t ldo, std::size_t n, std::size_t m, std::size_t k) {
  gemm_acc(a, 1, lda, b, ldb, out, ldo, m, n, k);
}

using v4u = std::uint64_t __attribute__((vector_size(32)));

// exp(x) for x clamped to [-708, 708]: x = k ln2 + r with |r| <= ln2 / 2,
// e^r by its degree-13 Taylor polynomial, 2^k built in the exponent bits.
// The scalar and vector versions perform the same IEEE operations, so a
// value does not depend on which path computed it.
template <typename T, typename U>
inline T exp_core(T x) {
  constexpr double kLog2e = 1.4426950408889634;
  constexpr double kLn2Hi = 0.6931471803691238;
  constexpr double kLn2Lo = 1.9082149292705877e-10;
  constexpr double kShifter = 6755399441055744.0;  // 1.5 * 2^52
  x = x < -708.0 ? T{} - 708.0 : x;
  x = x > 708.0 ? T{} + 708.0 : x;
  const T t = x * kLog2e + kShifter;
  const T k = t - kShifter;
  const T r = (x - k * kLn2Hi) - k * kLn2Lo;
  T p = T{} + 1.0 / 6227020800.0;
  p = p * r + 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  const U bits = (std::bit_cast<U>(t) + 1023) << 52;
  return p * std::bit_cast<T>(bits);
}

// sigmoid over n values
void gate_sigmoid(const double* __restrict in, double* __restrict out, std::size_t n) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const v4d e = exp_core<v4d, v4u>(-load4(in + j));
    store4(out + j, 1.0 / (1.0 + e));
  }
  for (; j < n; ++j) out[j] = 1.0 / (1.0 + exp_core<double, std::uint64_t>(-in[j]));
}

// tanh(x) = 1 - 2 / (e^{2x} + 1)
void gate_tanh(const double* __restrict in, double* __restrict out, std::size_t n) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const v4d e = exp_core<v4d, v4u>(2.0 * load4(in + j));
    store4(out + j, 1.0 - 2.0 / (e + 1.0));
  }
  for (; j < n; ++j) out[j] = 1.0 - 2.0 / (exp_core<double, std::uint64_t>(2.0 * in[j]) + 1.0);
}

void check_batch(const PackedNet& net, const SequenceBatch& batch) {
  if (batch.length == 0) throw std::invalid_argument("GRU forward: empty sequence");
  if (batch.dim != net.input_dim) {
    throw std::invalid_argument("GRU forward: input dim " + std::to_string(batch.dim) +
                                " does not match network input dim " +
                                std::to_string(net.input_dim));
  }
  if (batch.data.size() != batch.count * batch.length * batch.dim) {
    throw std::invalid_argument("GRU forward: batch storage size mismatch");
  }
}

ForwardResult forward_impl(const PackedNet& net, const SequenceBatch& batch,
                           std::span<const double> h0) {
  check_batch(net, batch);
  const std::size_t n = batch.count;
  const std::size_t d = batch.dim;
  const std::size_t hid = net.hidden_dim;
  const std::size_t h3 = 3 * hid;

  ForwardResult res;
  res.count = n;
  res.hidden = hid;
  res.steps.resize(batch.length);

  std::vector<double> h(n * hid, 0.0);
  if (!h0.empty()) {
    if (h0.size() != n * hid) throw std::invalid_argument("GRU forward: bad initial state");
    std::copy(h0.begin(), h0.end(), h.begin());
  }
  std::vector<double> pre(n * h3);

  for (std::size_t t = 0; t < batch.length; ++t) {
    StepCache& s = res.steps[t];
    s.h_prev = h;
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(net.bias.begin(), net.bias.end(), pre.begin() + i * h3);
    }
    accumulate_ab(batch.step(t).data(), d, net.wx_t.data(), h3, pre.data(), h3, n, d, h3);
    accumulate_ab(h.data(), hid, net.uzr_t.data(), 2 * hid, pre.data(), h3, n, hid, 2 * hid);

    s.z.resize(n * hid);
    s.r.resize(n * hid);
    s.rh.resize(n * hid);
    for (std::size_t i = 0; i < n; ++i) {
      const double* pz = pre.data() + i * h3;
      const double* pr = pz + hid;
      double* z = s.z.data() + i * hid;
      double* r = s.r.data() + i * hid;
      double* rh = s.rh.data() + i * hid;
      const double* hp = h.data() + i * hid;
      gate_sigmoid(pz, z, hid);
      gate_sigmoid(pr, r, hid);
      for (std::size_t j = 0; j < hid; ++j) rh[j] = r[j] * hp[j];
    }
    accumulate_ab(s.rh.data(), hid, net.uh_t.data(), hid, pre.data() + 2 * hid, h3, n, hid, hid);

    s.c.resize(n * hid);
    for (std::size_t i = 0; i < n; ++i) {
      const double* pc = pre.data() + i * h3 + 2 * hid;
      const double* z = s.z.data() + i * hid;
      double* c = s.c.data() + i * hid;
      double* hi = h.data() + i * hid;
      gate_tanh(pc, c, hid);
      for (std::size_t j = 0; j < hid; ++j) hi[j] = (1.0 - z[j]) * hi[j] + z[j] * c[j];
    }
  }

  res.logits.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = net.head_b;
    for (std::size_t j = 0; j < hid; ++j) acc += net.head_w[j] * h[i * hid + j];
    res.logits[i] = acc;
  }
  res.h_final = std::move(h);
  return res;
}

}  // namespace

PackedNet pack(const GruNet& net) {
  net.validate();
  PackedNet p;
  const std::size_t d = net.input_dim();
  const std::size_t hid = net.hidden_dim();
  p.input_dim = d;
  p.hidden_dim = hid;
  const auto& g = net.gru;

  p.wx_t.assign(d * 3 * hid, 0.0);
  const Matrix* w[3] = {&g.wz, &g.wr, &g.wh};
  for (std::size_t gate = 0; gate < 3; ++gate) {
    for (std::size_t j = 0; j < hid; ++j) {
      for (std::size_t l = 0; l < d; ++l) p.wx_t[l * 3 * hid + gate * hid + j] = (*w[gate])(j, l);
    }
  }
  p.uzr_t.assign(hid * 2 * hid, 0.0);
  const Matrix* u[2] = {&g.uz, &g.ur};
  for (std::size_t gate = 0; gate < 2; ++gate) {
    for (std::size_t j = 0; j < hid; ++j) {
      for (std::size_t l = 0; l < hid; ++l) {
        p.uzr_t[l * 2 * hid + gate * hid + j] = (*u[gate])(j, l);
      }
    }
  }
  p.uh_t.assign(hid * hid, 0.0);
  for (std::size_t j = 0; j < hid; ++j) {
    for (std::size_t l = 0; l < hid; ++l) p.uh_t[l * hid + j] = g.uh(j, l);
  }
  p.bias.reserve(3 * hid);
  p.bias.insert(p.bias.end(), g.bz.begin(), g.bz.end());
  p.bias.insert(p.bias.end(), g.br.begin(), g.br.end());
  p.bias.insert(p.bias.end(), g.bh.begin(), g.bh.end());
  p.uzr.reserve(2 * hid * hid);
  p.uzr.insert(p.uzr.end(), g.uz.data().begin(), g.uz.data().end());
  p.uzr.insert(p.uzr.end(), g.ur.data().begin(), g.ur.data().end());
  p.uh.assign(g.uh.data().begin(), g.uh.data().end());
  p.head_w = net.head.w;
  p.head_b = net.head.b;
  return p;
}

std::span<const double> ForwardResult::hidden_after(std::size_t t) const {
  if (t + 1 < steps.size()) return steps[t + 1].h_prev;
  return h_final;
}

ForwardResult forward_batch(const PackedNet& net, const SequenceBatch& batch) {
  return forward_impl(net, batch, {});
}

ForwardResult forward_batch(const GruNet& net, const SequenceBatch& batch) {
  return forward_impl(pack(net), batch, {});
}

double bce_loss(std::span<const double> logits, std::span<const double> targets) {
  if (logits.size() != targets.size() || logits.empty()) {
    throw std::invalid_argument("bce_loss: logits/targets size mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double l = logits[i];
    const double softplus = std::max(l, 0.0) + std::log1p(std::exp(-std::abs(l)));
    total += softplus - targets[i] * l;
  }
  return total / static_cast<double>(logits.size());
}

GradBundle backward_batch(const PackedNet& net, const SequenceBatch& batch,
                          const ForwardResult& fwd) {
  if (batch.targets.size() != batch.count) {
    throw std::invalid_argument("GRU backward: batch has no targets");
  }
  if (fwd.count != batch.count || fwd.steps.size() != batch.length) {
    throw std::invalid_argument("GRU backward: forward caches do not match the batch");
  }
  const std::size_t n = batch.count;
  const std::size_t d = batch.dim;
  const std::size_t hid = net.hidden_dim;
  const std::size_t h3 = 3 * hid;
  const double inv_n = 1.0 / static_cast<double>(n);

  GradBundle grad = GruNet::zeros(d, hid);

  std::vector<double> dlogit(n);
  for (std::size_t i = 0; i < n; ++i) {
    dlogit[i] = (sigmoid(fwd.logits[i]) - batch.targets[i]) * inv_n;
    grad.head.b += dlogit[i];
  }
  std::vector<double> dh(n * hid);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < hid; ++j) {
      grad.head.w[j] += dlogit[i] * fwd.h_final[i * hid + j];
      dh[i * hid + j] = dlogit[i] * net.head_w[j];
    }
  }

  std::vector<double> dwx(h3 * d, 0.0);
  std::vector<double> duzr(2 * hid * hid, 0.0);
  std::vector<double> duh(hid * hid, 0.0);
  std::vector<double> db(h3, 0.0);
  std::vector<double> dpre(n * h3);
  std::vector<double> drh(n * hid);
  std::vector<double> dh_prev(n * hid);

  for (std::size_t t = batch.length; t-- > 0;) {
    const StepCache& s = fwd.steps[t];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < hid; ++j) {
        const std::size_t e = i * hid + j;
        const double z = s.z[e];
        const double c = s.c[e];
        const double g = dh[e];
        dpre[i * h3 + j] = g * (c - s.h_prev[e]) * z * (1.0 - z);
        dpre[i * h3 + 2 * hid + j] = g * z * (1.0 - c * c);
        dh_prev[e] = g * (1.0 - z);
      }
    }
    std::fill(drh.begin(), drh.end(), 0.0);
    accumulate_ab(dpre.data() + 2 * hid, h3, net.uh.data(), hid, drh.data(), hid, n, hid, hid);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < hid; ++j) {
        const std::size_t e = i * hid + j;
        const double r = s.r[e];
        dpre[i * h3 + hid + j] = drh[e] * s.h_prev[e] * r * (1.0 - r);
        dh_prev[e] += drh[e] * r;
      }
    }
    accumulate_ab(dpre.data(), h3, net.uzr.data(), hid, dh_prev.data(), hid, n, 2 * hid, hid);

    accumulate_atb(dpre.data(), h3, batch.step(t).data(), d, dwx.data(), d, n, h3, d);
    accumulate_atb(dpre.data(), h3, s.h_prev.data(), hid, duzr.data(), hid, n, 2 * hid, hid);
    accumulate_atb(dpre.data() + 2 * hid, h3, s.rh.data(), hid, duh.data(), hid, n, hid, hid);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < h3; ++j) db[j] += dpre[i * h3 + j];
    }
    dh.swap(dh_prev);
  }

  auto& g = grad.gru;
  auto dw = dwx.begin();
  for (Matrix* m : {&g.wz, &g.wr, &g.wh}) {
    std::copy(dw, dw + static_cast<std::ptrdiff_t>(hid * d), m->data().begin());
    dw += static_cast<std::ptrdiff_t>(hid * d);
  }
  std::copy(duzr.begin(), duzr.begin() + static_cast<std::ptrdiff_t>(hid * hid),
            g.uz.data().begin());
  std::copy(duzr.begin() + static_cast<std::ptrdiff_t>(hid * hid), duzr.end(),
            g.ur.data().begin());
  std::copy(duh.begin(), duh.end(), g.uh.data().begin());
  for (std::size_t j = 0; j < hid; ++j) {
    g.bz[j] = db[j];
    g.br[j] = db[hid + j];
    g.bh[j] = db[2 * hid + j];
  }
  return grad;
}

GradBundle backward_batch(const GruNet& net, const SequenceBatch& batch,
                          const ForwardResult& fwd) {
  return backward_batch(pack(net), batch, fwd);
}

CellOutput gru_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                            const GruParams& p) {
  p.validate();
  if (x.size() != p.input_dim() || h_prev.size() != p.hidden_dim()) {
    throw std::invalid_argument("gru_cell_forward: dimension mismatch");
  }
  GruNet net{p, LinearParams{Vector(p.hidden_dim(), 0.0), 0.0}};
  SequenceBatch batch(1, 1, x.size());
  std::copy(x.begin(), x.end(), batch.data.begin());
  auto fwd = forward_impl(pack(net), batch, h_prev);
  CellOutput out;
  out.h_new = fwd.h_final;
  auto& s = fwd.steps[0];
  out.cache = CellCache{s.h_prev, s.z, s.r, s.c};
  return out;
}

SequenceOutput forward_sequence(std::span<const Vector> seq, const GruNet& net) {
  if (seq.empty()) throw std::invalid_argument("forward_sequence: empty sequence");
  const std::size_t d = seq.front().size();
  SequenceBatch batch(1, seq.size(), d);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t].size() != d) throw std::invalid_argument("forward_sequence: ragged sequence");
    std::copy(seq[t].begin(), seq[t].end(), batch.at(t, 0).begin());
  }
  SequenceOutput out;
  out.caches = forward_batch(net, batch);
  out.logit = out.caches.logits[0];
  out.input = std::move(batch);
  return out;
}

GradBundle backward_sequence(const SequenceOutput& out, const GruNet& net, double target) {
  SequenceBatch batch = out.input;
  batch.targets = {target};
  return backward_batch(net, batch, out.caches);
}

}  // namespace magicnet::numcore
