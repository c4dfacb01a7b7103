#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tta/lm/matrix.hpp"
#include "tta/lm/model.hpp"

// Parametric test-time adaptation: a single vector delta added to the final
// hidden states before the output projection, trained online on the
// current context with the next-token loss.
//
// Because delta only enters through the last affine map, the adapted logits
// at position t are   z_t = (h_t + delta) W_LMᵀ = base_t + W_LM delta,
// and the gradient of the mean next-token cross-entropy has the closed form
//
//   dL/ddelta = W_LMᵀ · (1/(n-1)) Σ_t (softmax(z_t) - onehot(target_t)).
//
// The loss is a log-sum-exp of an affine function of delta, hence convex;
// its Hessian is bounded by ||W_LM||₂² / 2, so any step with
// eta · ||W_LM||₂² <= 4 cannot increase the loss.
namespace tta::adapt {

struct AdaptationVector {
  std::vector<double> delta;
  std::size_t steps_applied = 0;
  std::string episode_id;

  static AdaptationVector zeros(std::size_t d, std::string episode_id = {});
  std::size_t dim() const { return delta.size(); }
  bool is_zero() const;

  friend bool operator==(const AdaptationVector&, const AdaptationVector&) = default;
};

enum class ResetPolicy { PerEpisode, PerTurn };
enum class ResetEvent { EpisodeStart, TurnStart };

std::string to_string(ResetPolicy p);
ResetPolicy reset_policy_from_string(const std::string& s);

struct AdaptationConfig {
  double learning_rate = 0.1;
  int update_steps = 1;
  ResetPolicy reset_policy = ResetPolicy::PerEpisode;

  // Throws ConfigError unless learning_rate > 0 and update_steps >= 1.
  void validate() const;
};

struct UpdateReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
  // Norm of the gradient at the starting delta.
  double gradient_norm = 0.0;
  int steps = 0;
};

// (H + 1·deltaᵀ) W_LMᵀ, computed literally.
lm::Matrix apply_bias(const lm::HiddenStates& hidden, const AdaptationVector& delta,
                      const lm::Matrix& output_projection);

// Mean next-token cross-entropy over positions 0..n-2 predicting ids 1..n-1,
// given the unadapted logits of those positions.
double context_loss(const lm::Matrix& base_logits, const lm::Matrix& output_projection,
                    std::span<const double> delta, std::span<const lm::TokenId> ids);
double context_loss(const lm::ModelWeights& weights, const AdaptationVector& delta,
                    std::span<const lm::TokenId> ids);

std::vector<double> delta_gradient(const lm::Matrix& base_logits,
                                   const lm::Matrix& output_projection,
                                   std::span<const double> delta,
                                   std::span<const lm::TokenId> ids);
std::vector<double> delta_gradient(const lm::ModelWeights& weights, const AdaptationVector& delta,
                                   std::span<const lm::TokenId> ids);

// config.update_steps gradient steps, recomputing the gradient each time.
// Throws NumericInstabilityError on a non-finite loss or gradient; the input
// vector is never modified.
std::pair<AdaptationVector, UpdateReport> update(const AdaptationVector& delta,
                                                 const AdaptationConfig& config,
                                                 const lm::Matrix& base_logits,
                                                 const lm::Matrix& output_projection,
                                                 std::span<const lm::TokenId> ids);
std::pair<AdaptationVector, UpdateReport> update(const AdaptationVector& delta,
                                                 const AdaptationConfig& config,
                                                 const lm::ModelWeights& weights,
                                                 std::span<const lm::TokenId> ids);

AdaptationVector maybe_reset(const AdaptationVector& delta, ResetEvent event,
                             const AdaptationConfig& config);

}  // namespace tta::adapt
