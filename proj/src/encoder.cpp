#include "cgnn/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "cgnn/errors.hpp"
#include "cgnn/rng.hpp"

namespace cgnn {

Arch arch_from_string(const std::string& s) {
  if (s == "gcn") return Arch::GCN;
  if (s == "sage") return Arch::SAGE_MEAN;
  throw ParseError("unknown arch: " + s + " (expected gcn or sage)");
}

std::string arch_to_string(Arch a) { return a == Arch::GCN ? "gcn" : "sage"; }

static Tensor<float> glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<float> w(fan_in, fan_out);
  for (auto& v : w.v) v = static_cast<float>((2.0 * rng.next_double() - 1.0) * limit);
  return w;
}

EncoderParams init_params(Arch arch, Dims dims, std::uint64_t seed) {
  require(dims.in > 0 && dims.hidden > 0 && dims.out > 0, "init_params: dims must be positive");
  EncoderParams p;
  p.arch = arch;
  p.dims = dims;
  Rng rng(seed, {0xe7c0de});
  if (arch == Arch::GCN) {
    p.weights.push_back(glorot(dims.in, dims.hidden, rng));
    p.weights.push_back(glorot(dims.hidden, dims.out, rng));
  } else {
    p.weights.push_back(glorot(dims.in, dims.hidden, rng));
    p.weights.push_back(glorot(dims.in, dims.hidden, rng));
    p.weights.push_back(glorot(dims.hidden, dims.out, rng));
    p.weights.push_back(glorot(dims.hidden, dims.out, rng));
  }
  p.biases.emplace_back(1, dims.hidden, 0.0f);
  p.biases.emplace_back(1, dims.out, 0.0f);
  return p;
}

Tensor<float> encode_forward(const EncoderParams& params, const View& view,
                             const Tensor<float>& features) {
  Tape<float> tape;
  auto r = encode(tape, params, view, features, /*params_require_grad=*/false);
  return tape.val(r.output);
}

static void write_u64(std::ofstream& out, std::uint64_t x) {
  out.write(reinterpret_cast<const char*>(&x), 8);
}

static std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t x = 0;
  in.read(reinterpret_cast<char*>(&x), 8);
  if (!in) throw FormatError("checkpoint truncated");
  return x;
}

void save_checkpoint(const EncoderParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write("CGP1", 4);
  const std::uint8_t tag = static_cast<std::uint8_t>(params.arch);
  out.write(reinterpret_cast<const char*>(&tag), 1);
  write_u64(out, params.dims.in);
  write_u64(out, params.dims.hidden);
  write_u64(out, params.dims.out);
  auto dump = [&](const Tensor<float>& t) {
    write_u64(out, t.rows);
    write_u64(out, t.cols);
    out.write(reinterpret_cast<const char*>(t.v.data()),
              static_cast<std::streamsize>(t.v.size() * 4));
  };
  for (const auto& w : params.weights) dump(w);
  for (const auto& b : params.biases) dump(b);
}

EncoderParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "CGP1", 4) != 0)
    throw FormatError("bad checkpoint magic: " + path);
  std::uint8_t tag = 0;
  in.read(reinterpret_cast<char*>(&tag), 1);
  if (!in || tag > 1) throw FormatError("bad arch tag in checkpoint");
  EncoderParams p;
  p.arch = static_cast<Arch>(tag);
  p.dims.in = read_u64(in);
  p.dims.hidden = read_u64(in);
  p.dims.out = read_u64(in);
  auto slurp = [&]() {
    const std::uint64_t r = read_u64(in);
    const std::uint64_t c = read_u64(in);
    if (r * c > (1ULL << 32)) throw FormatError("checkpoint tensor too large");
    Tensor<float> t(r, c);
    in.read(reinterpret_cast<char*>(t.v.data()), static_cast<std::streamsize>(r * c * 4));
    if (static_cast<std::uint64_t>(in.gcount()) != r * c * 4)
      throw FormatError("checkpoint truncated");
    return t;
  };
  const std::size_t num_weights = p.arch == Arch::GCN ? 2 : 4;
  for (std::size_t i = 0; i < num_weights; ++i) p.weights.push_back(slurp());
  for (std::size_t i = 0; i < 2; ++i) p.biases.push_back(slurp());
  return p;
}

}  // namespace cgnn
