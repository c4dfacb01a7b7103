#include "tta/lm/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "tta/errors.hpp"

namespace tta::lm {

static_assert(std::endian::native == std::endian::little,
              "weight files are little-endian; big-endian hosts need byte swapping");

namespace {

constexpr char kMagic[4] = {'T', 'T', 'A', 'W'};
constexpr double kNormEps = 1e-5;

using json = nlohmann::json;

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

std::vector<NamedTensor> flatten(const ModelWeights& w) {
  std::vector<NamedTensor> out;
  auto mat = [&](std::string name, const Matrix& m) {
    out.push_back({std::move(name), {m.rows(), m.cols()}, m.data()});
  };
  auto vec = [&](std::string name, const std::vector<double>& v) {
    out.push_back({std::move(name), {v.size()}, v});
  };
  mat("tok_embedding", w.token_embedding);
  mat("pos_embedding", w.position_embedding);
  for (std::size_t l = 0; l < w.blocks.size(); ++l) {
    const auto& b = w.blocks[l];
    const std::string p = "blocks." + std::to_string(l) + ".";
    vec(p + "ln1.gain", b.ln1.gain);
    vec(p + "ln1.bias", b.ln1.bias);
    mat(p + "attn.wq", b.wq);
    vec(p + "attn.bq", b.bq);
    mat(p + "attn.wk", b.wk);
    vec(p + "attn.bk", b.bk);
    mat(p + "attn.wv", b.wv);
    vec(p + "attn.bv", b.bv);
    mat(p + "attn.wo", b.wo);
    vec(p + "attn.bo", b.bo);
    vec(p + "ln2.gain", b.ln2.gain);
    vec(p + "ln2.bias", b.ln2.bias);
    mat(p + "mlp.w_up", b.w_up);
    vec(p + "mlp.b_up", b.b_up);
    mat(p + "mlp.w_down", b.w_down);
    vec(p + "mlp.b_down", b.b_down);
  }
  vec("final_norm.gain", w.final_norm.gain);
  vec("final_norm.bias", w.final_norm.bias);
  mat("output_projection", w.output_projection);
  return out;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

class TensorTable {
 public:
  explicit TensorTable(std::map<std::string, NamedTensor> tensors) : tensors_(std::move(tensors)) {}

  Matrix matrix(const std::string& name, std::size_t rows, std::size_t cols) {
    auto t = take(name);
    if (t.shape != std::vector<std::size_t>{rows, cols}) {
      throw DimensionError("tensor '" + name + "' has shape " + shape_string(t.shape) +
                           ", expected " + shape_string({rows, cols}));
    }
    return Matrix(rows, cols, std::move(t.data));
  }

  std::vector<double> vector(const std::string& name, std::size_t n) {
    auto t = take(name);
    if (t.shape != std::vector<std::size_t>{n}) {
      throw DimensionError("tensor '" + name + "' has shape " + shape_string(t.shape) +
                           ", expected " + shape_string({n}));
    }
    return std::move(t.data);
  }

  void expect_consumed() const {
    if (!tensors_.empty()) {
      throw FormatError("unexpected tensor '" + tensors_.begin()->first + "' in weight file");
    }
  }

 private:
  NamedTensor take(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw FormatError("missing tensor '" + name + "' in weight file");
    NamedTensor t = std::move(it->second);
    tensors_.erase(it);
    return t;
  }

  std::map<std::string, NamedTensor> tensors_;
};

// Uniform in [0, 1) with 53 random bits.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void layer_norm(std::span<const double> x, const LayerNormWeights& w, std::span<double> out) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + kNormEps);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv * w.gain[i] + w.bias[i];
}

double gelu(double x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

}  // namespace

void validate(const ModelWeights& w) {
  const auto& c = w.config;
  if (c.d == 0 || c.layers == 0 || c.heads == 0 || c.vocab_size == 0 || c.context_length == 0 ||
      c.mlp_hidden == 0) {
    throw DimensionError("model config has a zero dimension");
  }
  if (c.d % c.heads != 0) {
    throw DimensionError("hidden size " + std::to_string(c.d) + " not divisible by " +
                         std::to_string(c.heads) + " heads");
  }
  if (w.output_projection.rows() != c.vocab_size) {
    throw DimensionError("output_projection has " + std::to_string(w.output_projection.rows()) +
                         " rows but vocab_size is " + std::to_string(c.vocab_size));
  }
  if (w.blocks.size() != c.layers) {
    throw DimensionError("expected " + std::to_string(c.layers) + " blocks, found " +
                         std::to_string(w.blocks.size()));
  }
  for (const auto& t : flatten(w)) {
    for (double v : t.data) {
      if (!std::isfinite(v)) throw FormatError("tensor '" + t.name + "' has a non-finite entry");
    }
  }
}

void save_model(const ModelWeights& weights, const std::filesystem::path& path) {
  validate(weights);
  const auto tensors = flatten(weights);
  json header = json::object();
  const auto& c = weights.config;
  header["format_version"] = c.format_version;
  header["d"] = c.d;
  header["layers"] = c.layers;
  header["heads"] = c.heads;
  header["vocab_size"] = c.vocab_size;
  header["context_length"] = c.context_length;
  header["mlp_hidden"] = c.mlp_hidden;
  json list = json::array();
  for (const auto& t : tensors) list.push_back({{"name", t.name}, {"shape", t.shape}});
  header["tensors"] = list;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write weight file " + path.string());
  out.write(kMagic, 4);
  const auto len = static_cast<std::uint32_t>(text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : tensors) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
}

std::shared_ptr<const ModelWeights> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open weight file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("section 'magic': not a TTAW weight file: " + path.string());
  }
  std::uint32_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 4, sizeof header_len);
  if (bytes.size() < 8 + std::size_t{header_len}) {
    throw FormatError("section 'header': file truncated");
  }
  json header;
  try {
    header = json::parse(bytes.substr(8, header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("section 'header': ") + e.what());
  }

  ModelConfig c;
  try {
    c.format_version = header.at("format_version").get<int>();
    c.d = header.at("d").get<std::size_t>();
    c.layers = header.at("layers").get<std::size_t>();
    c.heads = header.at("heads").get<std::size_t>();
    c.vocab_size = header.at("vocab_size").get<std::size_t>();
    c.context_length = header.at("context_length").get<std::size_t>();
    c.mlp_hidden = header.at("mlp_hidden").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("section 'header': ") + e.what());
  }
  if (c.format_version != kWeightFormatVersion) {
    throw FormatError("section 'header': unsupported format_version " +
                      std::to_string(c.format_version));
  }

  std::map<std::string, NamedTensor> tensors;
  std::size_t offset = 8 + header_len;
  try {
    for (const auto& entry : header.at("tensors")) {
      NamedTensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<std::vector<std::size_t>>();
      std::size_t count = 1;
      for (auto s : t.shape) count *= s;
      const std::size_t nbytes = count * sizeof(double);
      if (offset + nbytes > bytes.size()) {
        throw FormatError("section '" + t.name + "': file truncated");
      }
      t.data.resize(count);
      std::memcpy(t.data.data(), bytes.data() + offset, nbytes);
      offset += nbytes;
      tensors.emplace(t.name, std::move(t));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("section 'tensors': ") + e.what());
  }
  if (offset != bytes.size()) {
    throw FormatError("section 'trailer': " + std::to_string(bytes.size() - offset) +
                      " unexpected trailing bytes");
  }

  TensorTable table(std::move(tensors));
  auto w = std::make_shared<ModelWeights>();
  w->config = c;
  w->token_embedding = table.matrix("tok_embedding", c.vocab_size, c.d);
  w->position_embedding = table.matrix("pos_embedding", c.context_length, c.d);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = "blocks." + std::to_string(l) + ".";
    BlockWeights b;
    b.ln1.gain = table.vector(p + "ln1.gain", c.d);
    b.ln1.bias = table.vector(p + "ln1.bias", c.d);
    b.wq = table.matrix(p + "attn.wq", c.d, c.d);
    b.bq = table.vector(p + "attn.bq", c.d);
    b.wk = table.matrix(p + "attn.wk", c.d, c.d);
    b.bk = table.vector(p + "attn.bk", c.d);
    b.wv = table.matrix(p + "attn.wv", c.d, c.d);
    b.bv = table.vector(p + "attn.bv", c.d);
    b.wo = table.matrix(p + "attn.wo", c.d, c.d);
    b.bo = table.vector(p + "attn.bo", c.d);
    b.ln2.gain = table.vector(p + "ln2.gain", c.d);
    b.ln2.bias = table.vector(p + "ln2.bias", c.d);
    b.w_up = table.matrix(p + "mlp.w_up", c.mlp_hidden, c.d);
    b.b_up = table.vector(p + "mlp.b_up", c.mlp_hidden);
    b.w_down = table.matrix(p + "mlp.w_down", c.d, c.mlp_hidden);
    b.b_down = table.vector(p + "mlp.b_down", c.d);
    w->blocks.push_back(std::move(b));
  }
  w->final_norm.gain = table.vector("final_norm.gain", c.d);
  w->final_norm.bias = table.vector("final_norm.bias", c.d);
  w->output_projection = table.matrix("output_projection", c.vocab_size, c.d);
  table.expect_consumed();
  validate(*w);
  return w;
}

ModelWeights random_model(const ModelConfig& c, std::uint64_t seed, double init_scale) {
  std::mt19937_64 rng(seed);
  auto mat = [&](std::size_t r, std::size_t cols, double scale) {
    Matrix m(r, cols);
    for (auto& v : m.data()) v = normal(rng) * scale;
    return m;
  };
  auto ones = [](std::size_t n) { return std::vector<double>(n, 1.0); };
  auto zeros = [](std::size_t n) { return std::vector<double>(n, 0.0); };

  const double proj_scale = init_scale / std::sqrt(static_cast<double>(c.d));
  ModelWeights w;
  w.config = c;
  w.token_embedding = mat(c.vocab_size, c.d, 1.0);
  w.position_embedding = mat(c.context_length, c.d, 0.1);
  for (std::size_t l = 0; l < c.layers; ++l) {
    BlockWeights b;
    b.ln1 = {ones(c.d), zeros(c.d)};
    b.wq = mat(c.d, c.d, 1.0 / std::sqrt(static_cast<double>(c.d)));
    b.wk = mat(c.d, c.d, 1.0 / std::sqrt(static_cast<double>(c.d)));
    b.wv = mat(c.d, c.d, 1.0 / std::sqrt(static_cast<double>(c.d)));
    b.wo = mat(c.d, c.d, proj_scale);
    b.bq = zeros(c.d);
    b.bk = zeros(c.d);
    b.bv = zeros(c.d);
    b.bo = zeros(c.d);
    b.ln2 = {ones(c.d), zeros(c.d)};
    b.w_up = mat(c.mlp_hidden, c.d, 1.0 / std::sqrt(static_cast<double>(c.d)));
    b.b_up = zeros(c.mlp_hidden);
    b.w_down = mat(c.d, c.mlp_hidden, init_scale / std::sqrt(static_cast<double>(c.mlp_hidden)));
    b.b_down = zeros(c.d);
    w.blocks.push_back(std::move(b));
  }
  w.final_norm = {ones(c.d), zeros(c.d)};
  w.output_projection = mat(c.vocab_size, c.d, init_scale);
  validate(w);
  return w;
}

DecoderSession::DecoderSession(const ModelWeights& weights)
    : weights_(&weights), keys_(weights.config.layers), values_(weights.config.layers) {}

std::vector<double> DecoderSession::append(TokenId id) {
  const auto& w = *weights_;
  const auto& c = w.config;
  if (length_ >= c.context_length) {
    throw CapacityError("sequence exceeds context length " + std::to_string(c.context_length));
  }
  if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
    throw DimensionError("token id " + std::to_string(id) + " outside vocabulary of size " +
                         std::to_string(c.vocab_size));
  }
  const std::size_t d = c.d;
  const std::size_t head_dim = d / c.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const std::size_t pos = length_;

  std::vector<double> x(d);
  {
    auto tok = w.token_embedding.row(static_cast<std::size_t>(id));
    auto p = w.position_embedding.row(pos);
    for (std::size_t i = 0; i < d; ++i) x[i] = tok[i] + p[i];
  }

  std::vector<double> normed(d), q(d), k(d), v(d), attn(d), proj(d);
  std::vector<double> up(c.mlp_hidden), scores(pos + 1);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const auto& b = w.blocks[l];
    layer_norm(x, b.ln1, normed);
    affine(b.wq, b.bq, normed, q);
    affine(b.wk, b.bk, normed, k);
    affine(b.wv, b.bv, normed, v);
    auto& kc = keys_[l];
    auto& vc = values_[l];
    kc.insert(kc.end(), k.begin(), k.end());
    vc.insert(vc.end(), v.begin(), v.end());

    for (std::size_t h = 0; h < c.heads; ++h) {
      const std::size_t off = h * head_dim;
      std::span<const double> qh(q.data() + off, head_dim);
      double max_score = -INFINITY;
      for (std::size_t t = 0; t <= pos; ++t) {
        std::span<const double> kh(kc.data() + t * d + off, head_dim);
        scores[t] = dot(qh, kh) * scale;
        max_score = std::max(max_score, scores[t]);
      }
      double denom = 0.0;
      for (std::size_t t = 0; t <= pos; ++t) {
        scores[t] = std::exp(scores[t] - max_score);
        denom += scores[t];
      }
      for (std::size_t i = 0; i < head_dim; ++i) {
        double acc = 0.0;
        for (std::size_t t = 0; t <= pos; ++t) acc += scores[t] * vc[t * d + off + i];
        attn[off + i] = acc / denom;
      }
    }
    affine(b.wo, b.bo, attn, proj);
    for (std::size_t i = 0; i < d; ++i) x[i] += proj[i];

    layer_norm(x, b.ln2, normed);
    affine(b.w_up, b.b_up, normed, up);
    for (auto& u : up) u = gelu(u);
    affine(b.w_down, b.b_down, up, proj);
    for (std::size_t i = 0; i < d; ++i) x[i] += proj[i];
  }
  std::vector<double> hidden(d);
  layer_norm(x, w.final_norm, hidden);
  ++length_;
  return hidden;
}

ForwardResult forward(const ModelWeights& weights, std::span<const TokenId> ids) {
  const auto& c = weights.config;
  if (ids.empty()) throw InsufficientContextError("forward: empty input");
  if (ids.size() > c.context_length) {
    throw CapacityError("input of " + std::to_string(ids.size()) +
                        " tokens exceeds context length " + std::to_string(c.context_length));
  }
  DecoderSession session(weights);
  ForwardResult result;
  result.hidden.values = Matrix(ids.size(), c.d);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    auto h = session.append(ids[t]);
    std::copy(h.begin(), h.end(), result.hidden.values.row(t).begin());
  }
  result.logits = multiply_transposed(result.hidden.values, weights.output_projection);
  return result;
}

std::vector<double> project(const ModelWeights& weights, std::span<const double> hidden) {
  const auto& w = weights.output_projection;
  std::vector<double> out(w.rows());
  for (std::size_t v = 0; v < w.rows(); ++v) out[v] = dot(w.row(v), hidden);
  return out;
}

}  // namespace tta::lm
