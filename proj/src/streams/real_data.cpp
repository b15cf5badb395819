#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "magicnet/streams.hpp"

namespace magicnet::streams {

std::size_t LabelFunction::lookback() const {
  switch (kind) {
    case LabelKind::F1: return 1;
    case LabelKind::F2:
    case LabelKind::F3: return k;
    case LabelKind::F4: return 2;
    case LabelKind::F5: return k + 1;
  }
  return k + 1;
}

std::string LabelFunction::describe() const {
  std::string s = "F" + std::to_string(static_cast<int>(kind));
  s += sign == LabelSign::Plus ? '+' : '-';
  if (kind == LabelKind::F2 || kind == LabelKind::F3 || kind == LabelKind::F5) {
    s += "(k=" + std::to_string(k) + ")";
  }
  return s;
}

namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

}  // namespace

std::vector<std::optional<int>> label_real(std::span<const double> v, const LabelFunction& f) {
  if ((f.kind == LabelKind::F2 || f.kind == LabelKind::F3 || f.kind == LabelKind::F5) && f.k == 0) {
    throw ConfigError("label function " + f.describe() + " needs k >= 1");
  }
  std::vector<std::optional<int>> out(v.size());
  auto delta = [&](std::size_t t) { return v[t] - v[t - 1]; };
  for (std::size_t t = f.lookback(); t < v.size(); ++t) {
    bool plus = false;
    switch (f.kind) {
      case LabelKind::F1: plus = v[t] > v[t - 1]; break;
      case LabelKind::F2:
        plus = v[t] > median({v.begin() + static_cast<std::ptrdiff_t>(t - f.k),
                              v.begin() + static_cast<std::ptrdiff_t>(t)});
        break;
      case LabelKind::F3:
        plus = v[t] > *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(t - f.k),
                                        v.begin() + static_cast<std::ptrdiff_t>(t));
        break;
      case LabelKind::F4: plus = delta(t) > delta(t - 1); break;
      case LabelKind::F5: {
        std::vector<double> d;
        d.reserve(f.k);
        for (std::size_t s = t - f.k; s < t; ++s) d.push_back(delta(s));
        plus = delta(t) > median(std::move(d));
        break;
      }
    }
    out[t] = (plus == (f.sign == LabelSign::Plus)) ? 1 : 0;
  }
  return out;
}

std::vector<double> interpolate_missing(std::span<const std::optional<double>> values) {
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i]) valid.push_back(i);
  }
  if (valid.empty()) {
    if (values.empty()) return {};
    throw ConfigError("every value of the series is missing");
  }
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < valid.front(); ++i) out[i] = *values[valid.front()];
  for (std::size_t i = valid.back(); i < values.size(); ++i) out[i] = *values[valid.back()];
  for (std::size_t j = 0; j + 1 < valid.size(); ++j) {
    const std::size_t a = valid[j];
    const std::size_t b = valid[j + 1];
    const double va = *values[a];
    const double vb = *values[b];
    out[a] = va;
    for (std::size_t i = a + 1; i < b; ++i) {
      const double frac = static_cast<double>(i - a) / static_cast<double>(b - a);
      out[i] = va + (vb - va) * frac;
    }
  }
  return out;
}

std::vector<double> tumbling_mean(std::span<const double> values, std::size_t width) {
  if (width <= 1) return {values.begin(), values.end()};
  std::vector<double> out;
  out.reserve(values.size() / width);
  for (std::size_t start = 0; start + width <= values.size(); start += width) {
    double sum = 0.0;
    for (std::size_t i = start; i < start + width; ++i) sum += values[i];
    out.push_back(sum / static_cast<double>(width));
  }
  return out;
}

std::vector<std::size_t> RealSeries::segment_rows(const std::string& segment) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < size(); ++i) {
    if (segment.empty() || groups[i] == segment) rows.push_back(i);
  }
  return rows;
}

std::vector<std::string> RealSeries::group_names() const {
  std::vector<std::string> names;
  for (const auto& g : groups) {
    if (names.empty() || names.back() != g) {
      if (std::find(names.begin(), names.end(), g) == names.end()) names.push_back(g);
    }
  }
  return names;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"') {
      if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else {
        quoted = !quoted;
      }
    } else if (c == ',' && !quoted) {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::optional<double> parse_cell(const std::string& raw, const CsvSchema& schema,
                                 std::size_t line_no, const std::string& column) {
  const std::string cell = trim(raw);
  if (cell.empty() || (!schema.missing_token.empty() && cell == schema.missing_token)) {
    return std::nullopt;
  }
  double value = 0.0;
  const char* first = cell.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    throw ParseError("row " + std::to_string(line_no) + ": non-numeric value '" + cell +
                     "' in column '" + column + "'");
  }
  return value;
}

}  // namespace

RealSeries ingest_csv(std::istream& in, const CsvSchema& schema) {
  if (schema.features.empty()) throw ConfigError("schema selects no feature columns");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("row 1: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  auto column_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("unknown column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.features) feature_cols.push_back(column_index(f));
  const std::size_t target_col = column_index(schema.target);
  const std::optional<std::size_t> group_col =
      schema.group ? std::optional(column_index(*schema.group)) : std::nullopt;

  struct Group {
    std::vector<std::vector<std::optional<double>>> features;  // per feature column
    std::vector<std::optional<double>> target;
  };
  std::vector<std::string> order;
  std::map<std::string, Group> groups;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(cells.size()));
    }
    const std::string key = group_col ? trim(cells[*group_col]) : std::string();
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) {
      order.push_back(key);
      it->second.features.resize(feature_cols.size());
    }
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      it->second.features[f].push_back(
          parse_cell(cells[feature_cols[f]], schema, line_no, schema.features[f]));
    }
    it->second.target.push_back(parse_cell(cells[target_col], schema, line_no, schema.target));
  }

  RealSeries series;
  series.feature_names = schema.features;
  series.dim = schema.features.size();
  for (const auto& key : order) {
    const Group& g = groups.at(key);
    std::vector<std::vector<double>> cols;
    for (const auto& raw : g.features) {
      cols.push_back(tumbling_mean(interpolate_missing(raw), schema.tumbling_window));
    }
    auto target = tumbling_mean(interpolate_missing(g.target), schema.tumbling_window);
    for (std::size_t r = 0; r < target.size(); ++r) {
      for (const auto& col : cols) series.features.push_back(col[r]);
      series.target.push_back(target[r]);
      series.groups.push_back(key);
    }
  }
  return series;
}

RealSeries ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path.string() + "'");
  return ingest_csv(in, schema);
}

RunningStandardizer::RunningStandardizer(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

void RunningStandardizer::transform(std::span<double> x) {
  if (x.size() != mean_.size()) throw std::invalid_argument("RunningStandardizer: dim mismatch");
  ++count_;
  const double n = static_cast<double>(count_);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double delta = x[i] - mean_[i];
    mean_[i] += delta / n;
    m2_[i] += delta * (x[i] - mean_[i]);
    const double var = m2_[i] / n;
    x[i] = (x[i] - mean_[i]) / std::sqrt(var + 1e-8);
  }
}

RealSourceSpec RealSourceSpec::for_dataset(const std::string& name) {
  if (name == "weather") return {10, Segmentation::Equal};
  if (name == "airquality") return {5, Segmentation::Groups};
  if (name == "power") return {20, Segmentation::Equal};
  throw ConfigError("unknown dataset preset '" + name + "' (allowed: weather, airquality, power)");
}

}  // namespace magicnet::streams
