#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "internal.hpp"

namespace magicnet::streams {

double BoundaryFunction::evaluate(double x1, double x2) const {
  const double arg = family == BoundaryFamily::S1 ? gamma * x2 : gamma * std::numbers::pi * x2;
  return x1 - alpha - beta * std::sin(arg);
}

int BoundaryFunction::label(double x1, double x2) const {
  const bool geq = evaluate(x1, x2) >= 0.0;
  return (polarity == Polarity::GeqIsOne) == geq ? 1 : 0;
}

std::string BoundaryFunction::describe() const {
  std::ostringstream out;
  out.precision(17);
  out << (family == BoundaryFamily::S1 ? "S1" : "S2") << "(alpha=" << alpha << ",beta=" << beta
      << ",gamma=" << gamma << ',' << (polarity == Polarity::GeqIsOne ? "geq" : "lt") << ')';
  return out.str();
}

std::string describe(const Labeler& labeler) {
  return std::visit([](const auto& l) { return l.describe(); }, labeler);
}

std::size_t StreamConfiguration::total_length() const {
  std::size_t n = 0;
  for (const auto& c : concepts) n += c.length;
  return n;
}

std::size_t LabeledStream::concept_end(std::size_t c) const {
  return c + 1 < concept_starts.size() ? concept_starts[c + 1] : size();
}

std::size_t LabeledStream::concept_of(std::size_t t) const {
  auto it = std::upper_bound(concept_starts.begin(), concept_starts.end(), t);
  return static_cast<std::size_t>(it - concept_starts.begin()) - 1;
}

std::vector<std::size_t> LabeledStream::drift_positions() const {
  if (concept_starts.size() <= 1) return {};
  return {concept_starts.begin() + 1, concept_starts.end()};
}

std::vector<int> mode_labels(std::span<const int> raw) {
  std::vector<int> out(raw.size());
  int ones = 0;
  for (std::size_t t = 0; t < raw.size(); ++t) {
    ones += raw[t];
    if (t >= kModeWidth) ones -= raw[t - kModeWidth];
    const int n = static_cast<int>(std::min(t + 1, kModeWidth));
    const int zeros = n - ones;
    out[t] = ones > zeros ? 1 : ones < zeros ? 0 : raw[t];
  }
  return out;
}

std::vector<BoundaryFunction> sample_boundary_pool(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> s1_gamma(0.8, 1.2);
  std::uniform_real_distribution<double> s2_beta(-0.25, -0.15);
  std::uniform_real_distribution<double> s2_gamma(-2.2, -1.8);

  // (alpha, beta) = (0, -1) and (1, 1) put the whole unit square on one side
  // of the boundary, so S1 draws use the two combinations that cut it.
  const std::pair<double, double> s1_combos[] = {{0.0, 1.0}, {1.0, -1.0}};

  std::vector<BoundaryFunction> pool;
  pool.reserve(32);
  auto add_both = [&pool](BoundaryFunction f) {
    f.polarity = Polarity::GeqIsOne;
    pool.push_back(f);
    f.polarity = Polarity::LtIsOne;
    pool.push_back(f);
  };
  for (int i = 0; i < 8; ++i) {
    const auto [a, b] = s1_combos[i % 2];
    add_both({BoundaryFamily::S1, a, b, s1_gamma(rng), Polarity::GeqIsOne});
  }
  for (int i = 0; i < 8; ++i) {
    const double beta = s2_beta(rng);
    add_both({BoundaryFamily::S2, 0.5, beta, s2_gamma(rng), Polarity::GeqIsOne});
  }
  return pool;
}

StreamConfiguration build_srw_configuration(std::size_t n_concepts, std::size_t concept_length,
                                            std::uint64_t seed, std::uint64_t pool_seed) {
  if (n_concepts == 0) throw ConfigError("n_concepts must be >= 1");
  if (concept_length == 0) throw ConfigError("concept_length must be >= 1");
  auto pool = sample_boundary_pool(pool_seed);
  if (n_concepts > pool.size()) {
    throw ConfigError("SineRW supports at most " + std::to_string(pool.size()) +
                      " concepts, requested " + std::to_string(n_concepts));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(n_concepts);
  detail::maybe_recur(pool, rng);

  StreamConfiguration config;
  config.source = SourceKind::SineRW;
  config.seed = seed;
  for (std::size_t i = 0; i < n_concepts; ++i) {
    ConceptSpec spec;
    spec.length = concept_length;
    spec.labeler = pool[i];
    config.concepts.push_back(spec);
    if (i > 0) config.drift_positions.push_back(i * concept_length);
  }
  return config;
}

namespace {

double reflect(double v) {
  if (v < 0.0) v = -v;
  if (v > 1.0) v = 2.0 - v;
  // Keep points strictly inside the open interval.
  if (v <= 0.0) v = std::nextafter(0.0, 1.0);
  if (v >= 1.0) v = std::nextafter(1.0, 0.0);
  return v;
}

const BoundaryFunction& boundary_of(const ConceptSpec& spec) {
  const auto* f = std::get_if<BoundaryFunction>(&spec.labeler);
  if (f == nullptr) throw ConfigError("SineRW concepts need a boundary-function labeler");
  return *f;
}

}  // namespace

LabeledStream sine_rw_generate(const StreamConfiguration& config, std::uint64_t seed) {
  if (config.source != SourceKind::SineRW) {
    throw ConfigError("sine_rw_generate: configuration is not a SineRW configuration");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> start(0.0, 1.0);
  std::uniform_real_distribution<double> step(-kWalkStep, kWalkStep);

  LabeledStream stream;
  stream.dim = 2;
  stream.seed = seed;
  const std::size_t total = config.total_length();
  stream.x.reserve(total * 2);
  stream.y.reserve(total);

  double x1 = reflect(start(rng));
  double x2 = reflect(start(rng));
  std::vector<int> raw;
  for (const auto& spec : config.concepts) {
    const auto& f = boundary_of(spec);
    stream.concept_starts.push_back(stream.y.size());
    stream.labelers.push_back(f.describe());
    raw.clear();
    for (std::size_t i = 0; i < spec.length; ++i) {
      x1 = reflect(x1 + step(rng));
      x2 = reflect(x2 + step(rng));
      stream.x.push_back(x1);
      stream.x.push_back(x2);
      raw.push_back(f.label(x1, x2));
    }
    auto smoothed = mode_labels(raw);
    stream.y.insert(stream.y.end(), smoothed.begin(), smoothed.end());
  }
  return stream;
}

std::vector<int> sine_rw_raw_labels(const LabeledStream& stream, const StreamConfiguration& config) {
  std::vector<int> raw(stream.size());
  for (std::size_t c = 0; c < config.concepts.size(); ++c) {
    const auto& f = boundary_of(config.concepts[c]);
    for (std::size_t t = stream.concept_starts.at(c); t < stream.concept_end(c); ++t) {
      raw[t] = f.label(stream.x[2 * t], stream.x[2 * t + 1]);
    }
  }
  return raw;
}

}  // namespace magicnet::streams
