#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "magicnet/eval.hpp"

namespace magicnet::eval {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'N', 'C'};

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void tensor(std::size_t rows, std::size_t cols, std::span<const double> values) {
    u64(rows);
    u64(cols);
    for (double v : values) f64(v);
  }
  void net(const numcore::GruNet& n) {
    const auto& g = n.gru;
    for (const auto* m : {&g.wz, &g.wr, &g.wh, &g.uz, &g.ur, &g.uh}) {
      tensor(m->rows(), m->cols(), m->data());
    }
    for (const auto* b : {&g.bz, &g.br, &g.bh, &n.head.w}) tensor(b->size(), 1, *b);
    tensor(1, 1, std::span(&n.head.b, 1));
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return need(1, "byte")[0]; }
  std::uint32_t u32() {
    auto b = need(4, "u32 field");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }
  std::uint64_t u64() {
    auto b = need(8, "u64 field");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }

  std::vector<double> tensor(std::size_t& rows, std::size_t& cols) {
    rows = u64();
    cols = u64();
    if (cols != 0 && rows > remaining() / 8 / cols) {
      throw TruncatedCheckpointError("checkpoint truncated: tensor of " + std::to_string(rows) +
                                     "x" + std::to_string(cols) + " at offset " +
                                     std::to_string(pos_) + " exceeds the " +
                                     std::to_string(remaining()) + " bytes left");
    }
    std::vector<double> values(rows * cols);
    for (auto& v : values) v = f64();
    return values;
  }
  numcore::Matrix matrix() {
    std::size_t rows = 0, cols = 0;
    auto values = tensor(rows, cols);
    numcore::Matrix m(rows, cols);
    std::copy(values.begin(), values.end(), m.data().begin());
    return m;
  }
  numcore::Vector vector(const char* name) {
    std::size_t rows = 0, cols = 0;
    auto values = tensor(rows, cols);
    if (cols != 1) {
      throw ShapeMismatchError(std::string("checkpoint tensor ") + name + " must be a column, has " +
                               std::to_string(cols) + " columns");
    }
    return values;
  }
  numcore::GruNet net() {
    numcore::GruNet n;
    auto& g = n.gru;
    for (auto* m : {&g.wz, &g.wr, &g.wh, &g.uz, &g.ur, &g.uh}) *m = matrix();
    g.bz = vector("bz");
    g.br = vector("br");
    g.bh = vector("bh");
    n.head.w = vector("head.w");
    auto b = vector("head.b");
    if (b.size() != 1) throw ShapeMismatchError("checkpoint head bias must hold one value");
    n.head.b = b[0];
    try {
      n.validate();
    } catch (const std::logic_error& e) {
      throw ShapeMismatchError(std::string("checkpoint network shapes disagree: ") + e.what());
    }
    return n;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw TruncatedCheckpointError(std::string("checkpoint truncated: ") + what + " at offset " +
                                     std::to_string(pos_) + " needs " + std::to_string(n) +
                                     " bytes, " + std::to_string(remaining()) + " left");
    }
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const ModelCheckpoint& ckpt) {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(ckpt.format_version);
  w.u8(static_cast<std::uint8_t>(ckpt.kind));
  w.u64(ckpt.seed);
  w.u64(ckpt.concept_index);
  w.u64(ckpt.window);
  w.u64(ckpt.networks.size());
  for (const auto& n : ckpt.networks) {
    w.u64(n.concept_index);
    w.u8(static_cast<std::uint8_t>(n.option));
    w.u8(n.raw_mask ? 1 : 0);
    w.net(n.net);
    if (n.raw_mask) w.net(n.raw_mask->pre);
  }
  return w.take();
}

ModelCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw BadMagicError("not a checkpoint file (bad magic)");
  }
  Reader r(bytes.subspan(4));
  ModelCheckpoint ckpt;
  ckpt.format_version = r.u32();
  if (ckpt.format_version != ModelCheckpoint::kFormatVersion) {
    throw VersionMismatchError("checkpoint format version " + std::to_string(ckpt.format_version) +
                               " is not supported (expected " +
                               std::to_string(ModelCheckpoint::kFormatVersion) + ")");
  }
  const auto kind = r.u8();
  if (kind > static_cast<std::uint8_t>(learners::LearnerKind::Cpnn)) {
    throw ShapeMismatchError("checkpoint has unknown learner kind " + std::to_string(kind));
  }
  ckpt.kind = static_cast<learners::LearnerKind>(kind);
  ckpt.seed = r.u64();
  ckpt.concept_index = r.u64();
  ckpt.window = r.u64();
  const std::uint64_t count = r.u64();
  if (count == 0) throw ShapeMismatchError("checkpoint holds no networks");
  if (count > r.remaining()) {
    throw TruncatedCheckpointError("checkpoint truncated: " + std::to_string(count) +
                                   " networks announced, " + std::to_string(r.remaining()) +
                                   " bytes left");
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    learners::CheckpointNetwork n;
    n.concept_index = r.u64();
    const auto option = r.u8();
    if (option > static_cast<std::uint8_t>(masking::OptionKind::Expand)) {
      throw ShapeMismatchError("checkpoint network has unknown option " + std::to_string(option));
    }
    n.option = static_cast<masking::OptionKind>(option);
    const auto has_mask = r.u8();
    n.net = r.net();
    if (has_mask != 0) n.raw_mask = masking::MaskSet{r.net()};
    ckpt.networks.push_back(std::move(n));
  }
  if (r.remaining() != 0) {
    throw ShapeMismatchError("checkpoint has " + std::to_string(r.remaining()) +
                             " trailing bytes");
  }

  // Cross-network consistency.
  const auto& nets = ckpt.networks;
  if (ckpt.kind == learners::LearnerKind::Cpnn) {
    for (std::size_t i = 1; i < nets.size(); ++i) {
      if (nets[i].net.input_dim() != nets[0].net.input_dim() + nets[i - 1].net.hidden_dim()) {
        throw ShapeMismatchError("cPNN column " + std::to_string(i) +
                                 " input does not match the previous column");
      }
    }
  } else {
    for (const auto& n : nets) {
      if (n.net.input_dim() != nets[0].net.input_dim()) {
        throw ShapeMismatchError("checkpoint networks disagree on the input dimension");
      }
    }
  }
  return ckpt;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace magicnet::eval
