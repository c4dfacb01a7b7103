#include "tta/llm/local.hpp"

#include "tta/errors.hpp"
#include "tta/lm/decode.hpp"
#include "tta/util.hpp"

namespace tta::llm {

namespace {

std::uint64_t hash_ids(const std::vector<lm::TokenId>& ids) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(ids.data()), ids.size() * sizeof(lm::TokenId)));
}

std::size_t count_fences(const std::string& text) {
  std::size_t n = 0;
  for (std::size_t pos = text.find("```"); pos != std::string::npos; pos = text.find("```", pos + 3)) ++n;
  return n;
}

}  // namespace

LocalBackend::LocalBackend(std::shared_ptr<const lm::ModelWeights> weights, lm::Tokenizer tokenizer,
                           BackendConfig config)
    : weights_(std::move(weights)), tokenizer_(std::move(tokenizer)), config_(std::move(config)) {
  if (tokenizer_.vocabulary().size() != weights_->config.vocab_size) {
    throw DimensionError("vocabulary has " + std::to_string(tokenizer_.vocabulary().size()) +
                         " tokens but the model expects " + std::to_string(weights_->config.vocab_size));
  }
}

std::unique_ptr<LocalBackend> LocalBackend::load(const BackendConfig& config) {
  const auto model_path = config.model_path.empty() ? data_dir() / "model" / "tiny.ttaw" : config.model_path;
  const auto vocab_path = config.vocab_path.empty() ? data_dir() / "model" / "tiny.vocab" : config.vocab_path;
  return std::make_unique<LocalBackend>(lm::load_model(model_path),
                                        lm::Tokenizer(lm::Vocabulary::load(vocab_path)), config);
}

std::vector<lm::TokenId> LocalBackend::prompt_ids(const std::vector<ChatMessage>& messages) const {
  std::vector<lm::TokenId> ids{lm::Vocabulary::kBos};
  const auto body = tokenizer_.encode(render_transcript(messages));
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

bool LocalBackend::fits(const std::vector<ChatMessage>& messages, const CompletionOverrides& overrides) const {
  const auto max_tokens = static_cast<std::size_t>(overrides.max_tokens.value_or(config_.max_tokens));
  return prompt_ids(messages).size() + max_tokens <= weights_->config.context_length;
}

LocalBackend::Generation LocalBackend::generate(const std::vector<lm::TokenId>& prompt,
                                                const GenerateOptions& options,
                                                const CompletionOverrides& overrides) const {
  const auto& w = *weights_;
  const std::size_t d = w.config.d;
  const int max_tokens = overrides.max_tokens.value_or(config_.max_tokens);
  if (max_tokens < 1) throw ConfigError("max_tokens must be at least 1");
  if (prompt.empty()) throw InsufficientContextError("empty prompt");
  if (prompt.size() + static_cast<std::size_t>(max_tokens) > w.config.context_length) {
    throw CapacityError("prompt of " + std::to_string(prompt.size()) + " tokens plus " + std::to_string(max_tokens) +
                        " generated tokens exceeds the context length " + std::to_string(w.config.context_length));
  }
  if (options.delta && options.delta->dim() != d) {
    throw DimensionError("adaptation vector has length " + std::to_string(options.delta->dim()) +
                         ", model d is " + std::to_string(d));
  }

  Generation out;
  lm::DecoderSession session(w);
  std::vector<double> h;
  const adapt::AdaptationVector* delta = options.delta;
  if (options.update) {
    if (!delta) throw ConfigError("an update needs a starting adaptation vector");
    lm::HiddenStates hidden{lm::Matrix(prompt.size(), d)};
    for (std::size_t t = 0; t < prompt.size(); ++t) {
      h = session.append(prompt[t]);
      std::copy(h.begin(), h.end(), hidden.values.row(t).begin());
    }
    const auto base = lm::multiply_transposed(hidden.values, w.output_projection);
    auto [next, report] = adapt::update(*delta, *options.update, base, w.output_projection, prompt);
    out.adapted = AdaptedCompletion{{}, std::move(next), report};
    delta = &out.adapted->delta;
  } else {
    for (auto id : prompt) h = session.append(id);
  }

  lm::DecodePolicy policy;
  policy.temperature = overrides.temperature.value_or(config_.temperature);
  policy.seed = overrides.seed.value_or(config_.seed ^ hash_ids(prompt));
  lm::TokenSampler sampler(policy);

  for (int i = 0; i < max_tokens; ++i) {
    if (delta) {
      for (std::size_t k = 0; k < d; ++k) h[k] += delta->delta[k];
    }
    const auto logits = lm::project(w, h);
    const lm::TokenId tok = sampler.next(logits);
    if (tok == lm::Vocabulary::kEos && !options.fixed_length) break;
    out.tokens.push_back(tok);
    out.text += tokenizer_.decode_one(tok);
    if (!options.fixed_length && count_fences(out.text) >= 2) break;
    if (i + 1 < max_tokens) h = session.append(tok);
  }
  if (out.adapted) out.adapted->text = out.text;
  return out;
}

std::string LocalBackend::complete(const std::vector<ChatMessage>& messages, const CompletionOverrides& overrides) {
  return generate(prompt_ids(messages), {}, overrides).text;
}

std::string LocalBackend::complete_adapted(const std::vector<ChatMessage>& messages,
                                           const adapt::AdaptationVector& delta,
                                           const CompletionOverrides& overrides) {
  GenerateOptions options;
  options.delta = &delta;
  return generate(prompt_ids(messages), options, overrides).text;
}

AdaptedCompletion LocalBackend::adapt_and_complete(const std::vector<ChatMessage>& messages,
                                                   const adapt::AdaptationVector& delta,
                                                   const adapt::AdaptationConfig& config,
                                                   const CompletionOverrides& overrides) {
  GenerateOptions options;
  options.delta = &delta;
  options.update = &config;
  return std::move(*generate(prompt_ids(messages), options, overrides).adapted);
}

}  // namespace tta::llm
