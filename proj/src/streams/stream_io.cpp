#include <charconv>
#include <fstream>

#include <json.hpp>

#include "magicnet/streams.hpp"

namespace magicnet::streams {

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("dump_stream: cannot format value");
  out.append(buf, ptr);
}

template <typename T>
bool parse_exact(std::string_view s, T& value) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string last_good(long row) {
  return row < 0 ? std::string("none") : std::to_string(row);
}

}  // namespace

std::filesystem::path metadata_path(const std::filesystem::path& dump) {
  auto p = dump;
  p += ".meta.json";
  return p;
}

void dump_stream(const LabeledStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write stream dump '" + path.string() + "'");
  std::string line = "t";
  for (std::size_t i = 1; i <= stream.dim; ++i) line += ",x" + std::to_string(i);
  line += ",y\n";
  out << line;
  for (std::size_t t = 0; t < stream.size(); ++t) {
    line = std::to_string(t);
    for (double v : stream.features(t)) {
      line += ',';
      append_double(line, v);
    }
    line += ',';
    line += std::to_string(stream.y[t]);
    line += '\n';
    out << line;
  }
  if (!out) throw std::runtime_error("failed writing stream dump '" + path.string() + "'");

  nlohmann::json meta;
  meta["format_version"] = kDumpFormatVersion;
  meta["seed"] = stream.seed;
  meta["dim"] = stream.dim;
  meta["length"] = stream.size();
  meta["concept_starts"] = stream.concept_starts;
  meta["labelers"] = stream.labelers;
  std::ofstream mout(metadata_path(path), std::ios::binary);
  mout << meta.dump(2) << '\n';
  if (!mout) throw std::runtime_error("failed writing stream metadata for '" + path.string() + "'");
}

LabeledStream load_stream(const std::filesystem::path& path) {
  std::ifstream min(metadata_path(path));
  if (!min) throw ParseError("missing stream metadata '" + metadata_path(path).string() + "'");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(min);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed stream metadata: " + std::string(e.what()));
  }
  const int version = meta.value("format_version", -1);
  if (version != kDumpFormatVersion) {
    throw ParseError("stream metadata version mismatch: expected " +
                     std::to_string(kDumpFormatVersion) + ", found " + std::to_string(version));
  }

  LabeledStream stream;
  std::size_t length = 0;
  try {
    stream.seed = meta.at("seed").get<std::uint64_t>();
    stream.dim = meta.at("dim").get<std::size_t>();
    length = meta.at("length").get<std::size_t>();
    stream.concept_starts = meta.at("concept_starts").get<std::vector<std::size_t>>();
    stream.labelers = meta.at("labelers").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed stream metadata: " + std::string(e.what()));
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open stream dump '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("truncated dump: missing header, last good row none");

  stream.x.reserve(length * stream.dim);
  stream.y.reserve(length);
  long good = -1;
  auto fail = [&](const std::string& why) {
    return ParseError("truncated or corrupt dump at row " + std::to_string(good + 1) + " (" + why +
                      "); last good row " + last_good(good));
  };
  while (stream.y.size() < length) {
    if (!std::getline(in, line) || in.eof()) {
      // A final line without its newline was cut mid-write.
      if (line.empty() || !in.eof()) throw fail("missing row");
      throw fail("incomplete row");
    }
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() != stream.dim + 2) throw fail("wrong field count");
    std::size_t t = 0;
    if (!parse_exact(cells.front(), t) || t != stream.y.size()) throw fail("bad timestamp");
    for (std::size_t i = 0; i < stream.dim; ++i) {
      double v = 0.0;
      if (!parse_exact(cells[1 + i], v)) throw fail("bad feature value");
      stream.x.push_back(v);
    }
    int y = 0;
    if (!parse_exact(cells.back(), y) || (y != 0 && y != 1)) throw fail("bad label");
    stream.y.push_back(y);
    ++good;
  }
  return stream;
}

}  // namespace magicnet::streams
