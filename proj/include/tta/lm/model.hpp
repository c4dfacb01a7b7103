#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tta/lm/matrix.hpp"
#include "tta/lm/tokenizer.hpp"

namespace tta::lm {

inline constexpr int kWeightFormatVersion = 1;

struct ModelConfig {
  int format_version = kWeightFormatVersion;
  std::size_t d = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t vocab_size = 512;
  std::size_t context_length = 1024;
  std::size_t mlp_hidden = 256;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerNormWeights {
  std::vector<double> gain;
  std::vector<double> bias;
  friend bool operator==(const LayerNormWeights&, const LayerNormWeights&) = default;
};

struct BlockWeights {
  LayerNormWeights ln1;
  Matrix wq, wk, wv, wo;  // d x d each, y = W x + b
  std::vector<double> bq, bk, bv, bo;
  LayerNormWeights ln2;
  Matrix w_up;    // mlp_hidden x d
  std::vector<double> b_up;
  Matrix w_down;  // d x mlp_hidden
  std::vector<double> b_down;
  friend bool operator==(const BlockWeights&, const BlockWeights&) = default;
};

// Decoder-only transformer parameters. Treated as immutable once built;
// callers share it through std::shared_ptr<const ModelWeights>.
struct ModelWeights {
  ModelConfig config;
  Matrix token_embedding;     // vocab x d
  Matrix position_embedding;  // context_length x d
  std::vector<BlockWeights> blocks;
  LayerNormWeights final_norm;
  Matrix output_projection;   // vocab x d (W_LM)

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

// Final hidden states H, one row per input position.
struct HiddenStates {
  Matrix values;  // n x d
  std::size_t size() const { return values.rows(); }
};

struct ForwardResult {
  HiddenStates hidden;
  Matrix logits;  // n x vocab, exactly H W_LMᵀ
};

std::shared_ptr<const ModelWeights> load_model(const std::filesystem::path& path);
void save_model(const ModelWeights& weights, const std::filesystem::path& path);

// Seeded random initialisation. Normal deviates come from mt19937_64 through
// Box-Muller so the stream is identical across standard libraries.
ModelWeights random_model(const ModelConfig& config, std::uint64_t seed, double init_scale = 0.2);

// Throws DimensionError / FormatError if shapes disagree with config or any
// entry is non-finite.
void validate(const ModelWeights& weights);

ForwardResult forward(const ModelWeights& weights, std::span<const TokenId> ids);

// Base logits for a single hidden row.
std::vector<double> project(const ModelWeights& weights, std::span<const double> hidden);

// Incremental decoder with a key/value cache. forward() is implemented on
// top of it, so feeding the same ids through append() yields bit-identical
// hidden rows.
class DecoderSession {
 public:
  // The weights must outlive the session.
  explicit DecoderSession(const ModelWeights& weights);

  // Appends one token and returns the final hidden row for that position.
  std::vector<double> append(TokenId id);
  std::size_t length() const { return length_; }
  const ModelWeights& weights() const { return *weights_; }

 private:
  const ModelWeights* weights_;
  std::size_t length_ = 0;
  // Per layer: keys and values for every cached position (length x d).
  std::vector<std::vector<double>> keys_;
  std::vector<std::vector<double>> values_;
};

}  // namespace tta::lm
