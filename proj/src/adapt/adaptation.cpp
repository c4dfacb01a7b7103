#include "tta/adapt/adaptation.hpp"

#include <algorithm>
#include <cmath>

#include "tta/errors.hpp"

namespace tta::adapt {

namespace {

void check_context(const lm::Matrix& base_logits, const lm::Matrix& w,
                   std::span<const double> delta, std::span<const lm::TokenId> ids) {
  if (ids.size() < 2) {
    throw InsufficientContextError("context loss needs at least 2 tokens, got " +
                                   std::to_string(ids.size()));
  }
  if (base_logits.rows() < ids.size() - 1) {
    throw DimensionError("base logits have " + std::to_string(base_logits.rows()) +
                         " rows for " + std::to_string(ids.size()) + " tokens");
  }
  if (base_logits.cols() != w.rows()) {
    throw DimensionError("logit width " + std::to_string(base_logits.cols()) +
                         " does not match vocabulary " + std::to_string(w.rows()));
  }
  if (delta.size() != w.cols()) {
    throw DimensionError("delta has length " + std::to_string(delta.size()) + ", model d is " +
                         std::to_string(w.cols()));
  }
}

// W delta, one entry per vocabulary row.
std::vector<double> logit_shift(const lm::Matrix& w, std::span<const double> delta) {
  std::vector<double> shift(w.rows());
  for (std::size_t v = 0; v < w.rows(); ++v) shift[v] = lm::dot(w.row(v), delta);
  return shift;
}

// Accumulates the per-position softmax-minus-target residual and returns the
// mean loss. residual may be null when only the loss is needed.
double loss_and_residual(const lm::Matrix& base_logits, std::span<const double> shift,
                         std::span<const lm::TokenId> ids, std::vector<double>* residual) {
  const std::size_t vocab = shift.size();
  const std::size_t positions = ids.size() - 1;
  std::vector<double> z(vocab);
  double total = 0.0;
  for (std::size_t t = 0; t < positions; ++t) {
    auto base = base_logits.row(t);
    double m = -INFINITY;
    for (std::size_t v = 0; v < vocab; ++v) {
      z[v] = base[v] + shift[v];
      m = std::max(m, z[v]);
    }
    double sum = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) {
      z[v] = std::exp(z[v] - m);
      sum += z[v];
    }
    const auto target = static_cast<std::size_t>(ids[t + 1]);
    if (target >= vocab) throw DimensionError("target id outside vocabulary");
    total += std::log(sum) + m - (base[target] + shift[target]);
    if (residual) {
      for (std::size_t v = 0; v < vocab; ++v) (*residual)[v] += z[v] / sum;
      (*residual)[target] -= 1.0;
    }
  }
  return total / static_cast<double>(positions);
}

std::vector<double> gradient_from_residual(const lm::Matrix& w, const std::vector<double>& residual,
                                           std::size_t positions) {
  const double scale = 1.0 / static_cast<double>(positions);
  std::vector<double> g(w.cols(), 0.0);
  for (std::size_t v = 0; v < w.rows(); ++v) {
    const double r = residual[v] * scale;
    auto row = w.row(v);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += r * row[i];
  }
  return g;
}

bool finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

AdaptationVector AdaptationVector::zeros(std::size_t d, std::string episode_id) {
  return AdaptationVector{std::vector<double>(d, 0.0), 0, std::move(episode_id)};
}

bool AdaptationVector::is_zero() const {
  return std::all_of(delta.begin(), delta.end(), [](double x) { return x == 0.0; });
}

std::string to_string(ResetPolicy p) {
  return p == ResetPolicy::PerEpisode ? "per_episode" : "per_turn";
}

ResetPolicy reset_policy_from_string(const std::string& s) {
  if (s == "per_episode") return ResetPolicy::PerEpisode;
  if (s == "per_turn") return ResetPolicy::PerTurn;
  throw ConfigError("unknown reset policy '" + s + "' (expected per_episode or per_turn)");
}

void AdaptationConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (update_steps < 1) throw ConfigError("update_steps must be at least 1");
}

lm::Matrix apply_bias(const lm::HiddenStates& hidden, const AdaptationVector& delta,
                      const lm::Matrix& output_projection) {
  const auto& h = hidden.values;
  if (delta.dim() != h.cols() || output_projection.cols() != h.cols()) {
    throw DimensionError("apply_bias: delta length " + std::to_string(delta.dim()) +
                         ", hidden width " + std::to_string(h.cols()) + ", projection width " +
                         std::to_string(output_projection.cols()));
  }
  lm::Matrix shifted(h.rows(), h.cols());
  for (std::size_t t = 0; t < h.rows(); ++t) {
    for (std::size_t i = 0; i < h.cols(); ++i) shifted(t, i) = h(t, i) + delta.delta[i];
  }
  return lm::multiply_transposed(shifted, output_projection);
}

double context_loss(const lm::Matrix& base_logits, const lm::Matrix& output_projection,
                    std::span<const double> delta, std::span<const lm::TokenId> ids) {
  check_context(base_logits, output_projection, delta, ids);
  const auto shift = logit_shift(output_projection, delta);
  return loss_and_residual(base_logits, shift, ids, nullptr);
}

double context_loss(const lm::ModelWeights& weights, const AdaptationVector& delta,
                    std::span<const lm::TokenId> ids) {
  if (ids.size() < 2) {
    throw InsufficientContextError("context loss needs at least 2 tokens");
  }
  const auto fwd = lm::forward(weights, ids);
  return context_loss(fwd.logits, weights.output_projection, delta.delta, ids);
}

std::vector<double> delta_gradient(const lm::Matrix& base_logits,
                                   const lm::Matrix& output_projection,
                                   std::span<const double> delta,
                                   std::span<const lm::TokenId> ids) {
  check_context(base_logits, output_projection, delta, ids);
  const auto shift = logit_shift(output_projection, delta);
  std::vector<double> residual(output_projection.rows(), 0.0);
  loss_and_residual(base_logits, shift, ids, &residual);
  return gradient_from_residual(output_projection, residual, ids.size() - 1);
}

std::vector<double> delta_gradient(const lm::ModelWeights& weights, const AdaptationVector& delta,
                                   std::span<const lm::TokenId> ids) {
  if (ids.size() < 2) {
    throw InsufficientContextError("context loss needs at least 2 tokens");
  }
  const auto fwd = lm::forward(weights, ids);
  return delta_gradient(fwd.logits, weights.output_projection, delta.delta, ids);
}

std::pair<AdaptationVector, UpdateReport> update(const AdaptationVector& delta,
                                                 const AdaptationConfig& config,
                                                 const lm::Matrix& base_logits,
                                                 const lm::Matrix& output_projection,
                                                 std::span<const lm::TokenId> ids) {
  config.validate();
  check_context(base_logits, output_projection, delta.delta, ids);
  const std::size_t positions = ids.size() - 1;

  AdaptationVector next = delta;
  UpdateReport report;
  for (int step = 0; step < config.update_steps; ++step) {
    const auto shift = logit_shift(output_projection, next.delta);
    std::vector<double> residual(output_projection.rows(), 0.0);
    const double loss = loss_and_residual(base_logits, shift, ids, &residual);
    const auto grad = gradient_from_residual(output_projection, residual, positions);
    if (!std::isfinite(loss) || !finite(grad)) {
      throw NumericInstabilityError("non-finite loss or gradient at update step " +
                                    std::to_string(step));
    }
    if (step == 0) {
      report.loss_before = loss;
      double sq = 0.0;
      for (double g : grad) sq += g * g;
      report.gradient_norm = std::sqrt(sq);
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
      next.delta[i] = next.delta[i] - config.learning_rate * grad[i];
    }
  }
  report.loss_after = loss_and_residual(base_logits, logit_shift(output_projection, next.delta),
                                        ids, nullptr);
  if (!std::isfinite(report.loss_after) || !finite(next.delta)) {
    throw NumericInstabilityError("update produced a non-finite delta or loss");
  }
  report.steps = config.update_steps;
  next.steps_applied += static_cast<std::size_t>(config.update_steps);
  return {std::move(next), report};
}

std::pair<AdaptationVector, UpdateReport> update(const AdaptationVector& delta,
                                                 const AdaptationConfig& config,
                                                 const lm::ModelWeights& weights,
                                                 std::span<const lm::TokenId> ids) {
  if (ids.size() < 2) {
    throw InsufficientContextError("context loss needs at least 2 tokens");
  }
  const auto fwd = lm::forward(weights, ids);
  return update(delta, config, fwd.logits, weights.output_projection, ids);
}

AdaptationVector maybe_reset(const AdaptationVector& delta, ResetEvent event,
                             const AdaptationConfig& config) {
  const bool fire =
      (config.reset_policy == ResetPolicy::PerEpisode && event == ResetEvent::EpisodeStart) ||
      (config.reset_policy == ResetPolicy::PerTurn && event == ResetEvent::TurnStart);
  if (!fire) return delta;
  return AdaptationVector::zeros(delta.dim(), delta.episode_id);
}

}  // namespace tta::adapt
