#include "tta/lm/decode.hpp"

#include <algorithm>
#include <cmath>

#include "tta/errors.hpp"

namespace tta::lm {

TokenId argmax(std::span<const double> logits) {
  if (logits.empty()) throw DimensionError("argmax of empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  std::vector<double> p(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - m) / temperature);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

TokenId TokenSampler::next(std::span<const double> logits) {
  if (policy_.temperature <= 0.0) return argmax(logits);
  const auto p = softmax(logits, policy_.temperature);
  const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  double cum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cum += p[i];
    if (u < cum) return static_cast<TokenId>(i);
  }
  // Rounding left cum slightly below 1; fall back to the last token with mass.
  for (std::size_t i = p.size(); i-- > 0;) {
    if (p[i] > 0.0) return static_cast<TokenId>(i);
  }
  return argmax(logits);
}

TokenId decode_step(std::span<const double> logits, const DecodePolicy& policy) {
  TokenSampler sampler(policy);
  return sampler.next(logits);
}

}  // namespace tta::lm
