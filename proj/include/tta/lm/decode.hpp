#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tta/lm/tokenizer.hpp"

namespace tta::lm {

// temperature == 0 means greedy.
struct DecodePolicy {
  double temperature = 0.0;
  std::uint64_t seed = 0;
};

// Lowest index among the maxima.
TokenId argmax(std::span<const double> logits);

std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);

// Owns the RNG stream for temperature sampling so a fixed seed reproduces the
// same sequence of draws.
class TokenSampler {
 public:
  explicit TokenSampler(DecodePolicy policy) : policy_(policy), rng_(policy.seed) {}

  TokenId next(std::span<const double> logits);
  const DecodePolicy& policy() const { return policy_; }

 private:
  DecodePolicy policy_;
  std::mt19937_64 rng_;
};

// Single-shot convenience: a fresh sampler seeded from policy.seed.
TokenId decode_step(std::span<const double> logits, const DecodePolicy& policy);

}  // namespace tta::lm
