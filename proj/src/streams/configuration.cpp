#include <algorithm>
#include <random>

#include "internal.hpp"

namespace magicnet::streams {

namespace {

std::vector<LabelFunction> all_label_functions(std::size_t k) {
  std::vector<LabelFunction> fs;
  for (int kind = 1; kind <= 5; ++kind) {
    for (auto sign : {LabelSign::Plus, LabelSign::Minus}) {
      fs.push_back({static_cast<LabelKind>(kind), sign, k});
    }
  }
  return fs;
}

std::string insufficient(std::size_t required, std::size_t available, const std::string& where) {
  return "insufficient data" + (where.empty() ? std::string() : " in " + where) + ": required " +
         std::to_string(required) + " points, available " + std::to_string(available);
}

}  // namespace

StreamConfiguration build_real_configuration(const RealSeries& series, const RealSourceSpec& spec,
                                             std::size_t n_concepts, std::size_t concept_length,
                                             std::uint64_t seed) {
  if (n_concepts == 0) throw ConfigError("n_concepts must be >= 1");
  if (spec.k == 0) throw ConfigError("k must be >= 1");
  auto labelers = all_label_functions(spec.k);
  if (n_concepts > labelers.size()) {
    throw ConfigError("real-data streams support at most " + std::to_string(labelers.size()) +
                      " concepts, requested " + std::to_string(n_concepts));
  }
  // History needed before the first labelled point; F5 needs the most.
  const std::size_t skip = spec.k + 1;

  std::mt19937_64 rng(seed);
  StreamConfiguration config;
  config.source = SourceKind::Real;
  config.seed = seed;

  std::vector<ConceptSpec> concepts(n_concepts);
  if (spec.segmentation == Segmentation::Groups) {
    auto names = series.group_names();
    if (names.size() < n_concepts) {
      throw ConfigError("group segmentation needs " + std::to_string(n_concepts) +
                        " groups, data has " + std::to_string(names.size()));
    }
    std::shuffle(names.begin(), names.end(), rng);
    for (std::size_t i = 0; i < n_concepts; ++i) {
      const std::size_t rows = series.segment_rows(names[i]).size();
      const std::size_t length = concept_length > 0 ? concept_length : (rows > skip ? rows - skip : 0);
      if (length == 0 || rows < length + skip) {
        throw ConfigError(insufficient(std::max(length, std::size_t{1}) + skip, rows,
                                       "group '" + names[i] + "'"));
      }
      concepts[i].segment = names[i];
      concepts[i].offset = 0;
      concepts[i].length = length;
    }
  } else {
    const std::size_t rows = series.size();
    const std::size_t slice = concept_length > 0 ? concept_length + skip : rows / n_concepts;
    if (slice <= skip || slice * n_concepts > rows) {
      const std::size_t need = concept_length > 0 ? slice * n_concepts : n_concepts * (skip + 1);
      throw ConfigError(insufficient(need, rows, ""));
    }
    for (std::size_t i = 0; i < n_concepts; ++i) {
      concepts[i].offset = i * slice;
      concepts[i].length = slice - skip;
    }
  }

  std::shuffle(labelers.begin(), labelers.end(), rng);
  labelers.resize(n_concepts);
  detail::maybe_recur(labelers, rng);

  std::size_t position = 0;
  for (std::size_t i = 0; i < n_concepts; ++i) {
    concepts[i].labeler = labelers[i];
    concepts[i].skip = skip;
    if (i > 0) config.drift_positions.push_back(position);
    position += concepts[i].length;
  }
  config.concepts = std::move(concepts);
  return config;
}

LabeledStream materialize_real(const RealSeries& series, const StreamConfiguration& config) {
  if (config.source != SourceKind::Real) {
    throw ConfigError("materialize_real: configuration is not a real-data configuration");
  }
  LabeledStream stream;
  stream.dim = series.dim;
  stream.seed = config.seed;
  RunningStandardizer standardizer(series.dim);
  std::vector<double> point(series.dim);

  for (const auto& spec : config.concepts) {
    const auto* f = std::get_if<LabelFunction>(&spec.labeler);
    if (f == nullptr) throw ConfigError("real-data concepts need an F-function labeler");
    if (spec.skip < f->lookback()) {
      throw ConfigError("concept skip " + std::to_string(spec.skip) + " is shorter than the " +
                        f->describe() + " lookback");
    }
    const auto rows = series.segment_rows(spec.segment);
    const std::size_t needed = spec.offset + spec.skip + spec.length;
    if (rows.size() < needed) throw ConfigError(insufficient(needed, rows.size(), spec.segment));

    std::vector<double> v;
    v.reserve(spec.skip + spec.length);
    for (std::size_t i = spec.offset; i < needed; ++i) v.push_back(series.target[rows[i]]);
    const auto labels = label_real(v, *f);

    stream.concept_starts.push_back(stream.y.size());
    stream.labelers.push_back(f->describe());
    for (std::size_t i = spec.skip; i < v.size(); ++i) {
      const std::size_t row = rows[spec.offset + i];
      std::copy_n(series.features.begin() + static_cast<std::ptrdiff_t>(row * series.dim),
                  series.dim, point.begin());
      standardizer.transform(point);
      stream.x.insert(stream.x.end(), point.begin(), point.end());
      stream.y.push_back(*labels[i]);
    }
  }
  return stream;
}

LabeledStream temporal_augment(const LabeledStream& stream, std::size_t order) {
  if (order == 0) throw std::invalid_argument("temporal_augment: order must be >= 1");
  LabeledStream out = stream;
  out.dim = stream.dim + order;
  out.x.clear();
  out.x.reserve(stream.size() * out.dim);
  for (std::size_t t = 0; t < stream.size(); ++t) {
    const auto f = stream.features(t);
    out.x.insert(out.x.end(), f.begin(), f.end());
    for (std::size_t lag = 1; lag <= order; ++lag) {
      out.x.push_back(t >= lag ? static_cast<double>(stream.y[t - lag]) : 0.0);
    }
  }
  return out;
}

}  // namespace magicnet::streams
