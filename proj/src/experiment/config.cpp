#include <fstream>
#include <set>

#include "magicnet/experiment.hpp"

namespace magicnet::experiment {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (allowed.count(key) == 0) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError("unknown field '" + where + key + "' (allowed: " + list + ")");
    }
  }
}

std::size_t get_count(const json& j, const std::string& key, std::size_t fallback,
                      std::size_t minimum, const std::string& where = "") {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError("field '" + where + key + "' must be a non-negative integer");
  }
  const auto n = v.get<std::size_t>();
  if (n < minimum) {
    throw ConfigError("field '" + where + key + "' must be >= " + std::to_string(minimum) +
                      ", got " + std::to_string(n));
  }
  return n;
}

double get_unit(const json& j, const std::string& key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError("field '" + where + key + "' must be a number in (0, 1]");
  const double x = v.get<double>();
  if (!(x > 0.0 && x <= 1.0)) {
    throw ConfigError("field '" + where + key + "' must be in (0, 1], got " + format_double(x));
  }
  return x;
}

std::string get_string(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError("field '" + where + key + "' must be a string");
  return v.get<std::string>();
}

learners::LearnerKind parse_learner(const json& v) {
  if (!v.is_string()) throw ConfigError("field 'learners' entries must be strings (cgru, magic, cpnn)");
  try {
    return learners::learner_kind_from_string(v.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("field 'learners': ") + e.what());
  }
}

SourceConfig parse_source(const json& j) {
  SourceConfig s;
  if (!j.is_object() || !j.contains("kind")) {
    throw ConfigError("field 'source.kind' is required (allowed: srw, csv)");
  }
  const auto kind = get_string(j, "kind", "source.");
  if (kind == "srw") {
    check_keys(j, "source.", {"kind"});
    s.kind = SourceConfig::Kind::SineRW;
    return s;
  }
  if (kind != "csv") {
    throw ConfigError("field 'source.kind' has unknown value '" + kind + "' (allowed: srw, csv)");
  }
  check_keys(j, "source.", {"kind", "path", "features", "target", "group", "missing",
                            "tumbling_window", "dataset", "k", "segmentation"});
  s.kind = SourceConfig::Kind::Csv;
  for (const char* required : {"path", "features", "target"}) {
    if (!j.contains(required)) {
      throw ConfigError(std::string("field 'source.") + required + "' is required for csv sources");
    }
  }
  s.path = get_string(j, "path", "source.");
  const auto& feats = j.at("features");
  if (!feats.is_array() || feats.empty()) {
    throw ConfigError("field 'source.features' must be a non-empty list of column names");
  }
  for (const auto& f : feats) {
    if (!f.is_string()) throw ConfigError("field 'source.features' entries must be strings");
    s.schema.features.push_back(f.get<std::string>());
  }
  s.schema.target = get_string(j, "target", "source.");
  if (j.contains("group")) s.schema.group = get_string(j, "group", "source.");
  if (j.contains("missing")) s.schema.missing_token = get_string(j, "missing", "source.");
  s.schema.tumbling_window = get_count(j, "tumbling_window", 0, 0, "source.");
  if (j.contains("dataset")) {
    s.dataset = get_string(j, "dataset", "source.");
    try {
      s.spec = streams::RealSourceSpec::for_dataset(*s.dataset);
    } catch (const streams::ConfigError& e) {
      throw ConfigError(std::string("field 'source.dataset': ") + e.what());
    }
  }
  s.spec.k = get_count(j, "k", s.spec.k, 1, "source.");
  if (j.contains("segmentation")) {
    const auto seg = get_string(j, "segmentation", "source.");
    if (seg == "groups") {
      s.spec.segmentation = streams::Segmentation::Groups;
    } else if (seg == "equal") {
      s.spec.segmentation = streams::Segmentation::Equal;
    } else {
      throw ConfigError("field 'source.segmentation' has unknown value '" + seg +
                        "' (allowed: groups, equal)");
    }
  }
  if (s.spec.segmentation == streams::Segmentation::Groups && !s.schema.group) {
    throw ConfigError("field 'source.segmentation' is 'groups' but no 'source.group' column is set");
  }
  return s;
}

}  // namespace

learners::LearnerConfig ExperimentConfig::learner_config(std::size_t input_dim,
                                                         std::uint64_t seed) const {
  learners::LearnerConfig c;
  c.input_dim = input_dim;
  c.hidden = hidden;
  c.window = window;
  c.batch_size = batch_size;
  c.epochs = epochs;
  c.adam.lr = lr;
  c.exp_size = exp_size;
  c.num_batches = num_batches;
  c.seed = seed;
  return c;
}

ExperimentConfig parse_config(const json& j) {
  check_keys(j, "", {"source", "learners", "learner", "hidden", "window", "batch_size", "epochs",
                     "lr", "exp_size", "num_batches", "temporal_order", "n_concepts",
                     "concept_length", "detector", "seeds", "workers", "withheld",
                     "start_batches", "race_length", "checkpoints"});
  ExperimentConfig c;
  if (j.contains("source")) c.source = parse_source(j.at("source"));
  const bool csv = c.source.kind == SourceConfig::Kind::Csv;

  if (j.contains("learner") && j.contains("learners")) {
    throw ConfigError("fields 'learner' and 'learners' are mutually exclusive");
  }
  if (j.contains("learner")) {
    c.learners = {parse_learner(j.at("learner"))};
  } else if (j.contains("learners")) {
    const auto& list = j.at("learners");
    if (!list.is_array() || list.empty()) {
      throw ConfigError("field 'learners' must be a non-empty list (allowed: cgru, magic, cpnn)");
    }
    c.learners.clear();
    for (const auto& v : list) c.learners.push_back(parse_learner(v));
  }

  c.hidden = get_count(j, "hidden", csv ? 25 : 50, 1);
  c.window = get_count(j, "window", c.window, 1);
  c.batch_size = get_count(j, "batch_size", c.batch_size, 1);
  if (c.batch_size < c.window) {
    throw ConfigError("field 'batch_size' must be >= window (" + std::to_string(c.window) + ")");
  }
  c.epochs = get_count(j, "epochs", c.epochs, 1);
  if (j.contains("lr")) {
    if (!j.at("lr").is_number() || !(j.at("lr").get<double>() > 0.0)) {
      throw ConfigError("field 'lr' must be a positive number");
    }
    c.lr = j.at("lr").get<double>();
  }
  c.exp_size = get_count(j, "exp_size", c.exp_size, 1);
  c.num_batches = get_count(j, "num_batches", c.num_batches, 1);
  c.temporal_order = get_count(j, "temporal_order", c.temporal_order, 0);
  c.n_concepts = get_count(j, "n_concepts", c.n_concepts, 1);
  c.concept_length = get_count(j, "concept_length", c.concept_length, csv ? 0 : 1);
  if (j.contains("detector")) {
    const auto& d = j.at("detector");
    check_keys(d, "detector.", {"precision", "recall", "min_gap"});
    c.precision = get_unit(d, "precision", c.precision, "detector.");
    c.recall = get_unit(d, "recall", c.recall, "detector.");
    c.min_gap = get_count(d, "min_gap", c.min_gap, 1, "detector.");
  }
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    if (!s.is_array() || s.empty()) throw ConfigError("field 'seeds' must be a non-empty list");
    c.seeds.clear();
    std::set<std::uint64_t> seen;
    for (const auto& v : s) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw ConfigError("field 'seeds' entries must be non-negative integers");
      }
      const auto seed = v.get<std::uint64_t>();
      if (!seen.insert(seed).second) {
        throw ConfigError("field 'seeds' lists " + std::to_string(seed) + " twice");
      }
      c.seeds.push_back(seed);
    }
  }
  c.workers = get_count(j, "workers", c.workers, 1);
  c.withheld = get_count(j, "withheld", c.withheld, 0);
  c.start_batches = get_count(j, "start_batches", c.start_batches, 1);
  c.race_length = get_count(j, "race_length", c.race_length, 0);
  if (j.contains("checkpoints")) {
    if (!j.at("checkpoints").is_boolean()) throw ConfigError("field 'checkpoints' must be true or false");
    c.checkpoints = j.at("checkpoints").get<bool>();
  }
  if (!csv && c.concept_length <= c.withheld) {
    throw ConfigError("field 'concept_length' must exceed 'withheld' (" +
                      std::to_string(c.withheld) + ")");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  auto config = parse_config(j);
  if (config.source.kind == SourceConfig::Kind::Csv && config.source.path.is_relative()) {
    config.source.path = path.parent_path() / config.source.path;
  }
  return config;
}

json to_json(const ExperimentConfig& c) {
  json j;
  if (c.source.kind == SourceConfig::Kind::SineRW) {
    j["source"] = {{"kind", "srw"}};
  } else {
    json s = {{"kind", "csv"},
              {"path", c.source.path.string()},
              {"features", c.source.schema.features},
              {"target", c.source.schema.target},
              {"missing", c.source.schema.missing_token},
              {"tumbling_window", c.source.schema.tumbling_window},
              {"k", c.source.spec.k},
              {"segmentation",
               c.source.spec.segmentation == streams::Segmentation::Groups ? "groups" : "equal"}};
    if (c.source.schema.group) s["group"] = *c.source.schema.group;
    if (c.source.dataset) s["dataset"] = *c.source.dataset;
    j["source"] = s;
  }
  json names = json::array();
  for (auto k : c.learners) names.push_back(std::string(learners::to_string(k)));
  j["learners"] = names;
  j["hidden"] = c.hidden;
  j["window"] = c.window;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["exp_size"] = c.exp_size;
  j["num_batches"] = c.num_batches;
  j["temporal_order"] = c.temporal_order;
  j["n_concepts"] = c.n_concepts;
  j["concept_length"] = c.concept_length;
  j["detector"] = {{"precision", c.precision}, {"recall", c.recall}, {"min_gap", c.min_gap}};
  j["seeds"] = c.seeds;
  j["workers"] = c.workers;
  j["withheld"] = c.withheld;
  j["start_batches"] = c.start_batches;
  j["race_length"] = c.race_length;
  j["checkpoints"] = c.checkpoints;
  return j;
}

}  // namespace magicnet::experiment
