#include "magicnet/numcore.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace magicnet::numcore {

GruParams GruParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  GruParams p;
  p.wz = Matrix(hidden_dim, input_dim);
  p.wr = Matrix(hidden_dim, input_dim);
  p.wh = Matrix(hidden_dim, input_dim);
  p.uz = Matrix(hidden_dim, hidden_dim);
  p.ur = Matrix(hidden_dim, hidden_dim);
  p.uh = Matrix(hidden_dim, hidden_dim);
  p.bz.assign(hidden_dim, 0.0);
  p.br.assign(hidden_dim, 0.0);
  p.bh.assign(hidden_dim, 0.0);
  return p;
}

void GruParams::validate() const {
  const auto in = input_dim();
  const auto hid = hidden_dim();
  auto check = [&](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw std::logic_error(std::string("GRU tensor ") + name + " has shape " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                             ", expected " + std::to_string(r) + "x" + std::to_string(c));
    }
  };
  check(wr, hid, in, "wr");
  check(wh, hid, in, "wh");
  check(uz, hid, hid, "uz");
  check(ur, hid, hid, "ur");
  check(uh, hid, hid, "uh");
  if (bz.size() != hid || br.size() != hid || bh.size() != hid) {
    throw std::logic_error("GRU bias length does not match hidden size");
  }
}

GruNet GruNet::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  GruNet net;
  net.gru = GruParams::zeros(input_dim, hidden_dim);
  net.head.w.assign(hidden_dim, 0.0);
  net.head.b = 0.0;
  return net;
}

std::size_t GruNet::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors(*this)) n += t.size();
  return n;
}

void GruNet::validate() const {
  gru.validate();
  if (head.w.size() != gru.hidden_dim()) {
    throw std::logic_error("head weight length does not match hidden size");
  }
}

std::vector<std::span<double>> tensors(GruNet& net) {
  auto& g = net.gru;
  return {g.wz.data(), g.wr.data(), g.wh.data(), g.uz.data(), g.ur.data(), g.uh.data(),
          g.bz,        g.br,        g.bh,        net.head.w,  std::span<double>(&net.head.b, 1)};
}

std::vector<std::span<const double>> tensors(const GruNet& net) {
  const auto& g = net.gru;
  return {g.wz.data(), g.wr.data(), g.wh.data(), g.uz.data(), g.ur.data(), g.uh.data(),
          g.bz,        g.br,        g.bh,        net.head.w,
          std::span<const double>(&net.head.b, 1)};
}

bool all_finite(const GruNet& net) {
  for (auto t : tensors(net)) {
    if (!std::all_of(t.begin(), t.end(), [](double v) { return std::isfinite(v); })) {
      return false;
    }
  }
  return true;
}

void glorot_fill(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : m.data()) v = dist(rng);
}

GruNet glorot_init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  auto net = GruNet::zeros(input_dim, hidden_dim);
  auto& g = net.gru;
  for (Matrix* w : {&g.wz, &g.wr, &g.wh}) glorot_fill(*w, input_dim, hidden_dim, rng);
  for (Matrix* u : {&g.uz, &g.ur, &g.uh}) glorot_fill(*u, hidden_dim, hidden_dim, rng);
  const double limit = std::sqrt(6.0 / static_cast<double>(hidden_dim + 1));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : net.head.w) v = dist(rng);
  return net;
}

}  // namespace magicnet::numcore
