#pragma once

#include <memory>

#include "tta/lm/model.hpp"
#include "tta/lm/tokenizer.hpp"
#include "tta/llm/backend.hpp"

namespace tta::llm {

// Runs the in-process transformer. The prompt is <bos> followed by the
// encoded transcript; decoding stops at <eos>, after max_tokens, or once a
// ``` fence has been opened and closed.
class LocalBackend final : public Backend {
 public:
  LocalBackend(std::shared_ptr<const lm::ModelWeights> weights, lm::Tokenizer tokenizer, BackendConfig config);
  static std::unique_ptr<LocalBackend> load(const BackendConfig& config);

  BackendKind kind() const override { return BackendKind::Local; }
  std::string model_id() const override { return config_.model_id; }

  std::string complete(const std::vector<ChatMessage>& messages, const CompletionOverrides& overrides = {}) override;
  std::string complete_adapted(const std::vector<ChatMessage>& messages, const adapt::AdaptationVector& delta,
                               const CompletionOverrides& overrides = {}) override;
  AdaptedCompletion adapt_and_complete(const std::vector<ChatMessage>& messages, const adapt::AdaptationVector& delta,
                                       const adapt::AdaptationConfig& config,
                                       const CompletionOverrides& overrides = {}) override;
  bool fits(const std::vector<ChatMessage>& messages, const CompletionOverrides& overrides = {}) const override;
  std::size_t adaptation_dim() const override { return weights_->config.d; }

  std::vector<lm::TokenId> prompt_ids(const std::vector<ChatMessage>& messages) const;

  struct GenerateOptions {
    const adapt::AdaptationVector* delta = nullptr;
    const adapt::AdaptationConfig* update = nullptr;  // run an update before decoding
    bool fixed_length = false;                        // ignore stop conditions
  };
  struct Generation {
    std::string text;
    std::vector<lm::TokenId> tokens;
    std::optional<AdaptedCompletion> adapted;
  };
  Generation generate(const std::vector<lm::TokenId>& prompt, const GenerateOptions& options,
                      const CompletionOverrides& overrides = {}) const;

  const lm::ModelWeights& weights() const { return *weights_; }
  const lm::Tokenizer& tokenizer() const { return tokenizer_; }
  const BackendConfig& config() const { return config_; }

 private:
  std::shared_ptr<const lm::ModelWeights> weights_;
  lm::Tokenizer tokenizer_;
  BackendConfig config_;
};

}  // namespace tta::llm
