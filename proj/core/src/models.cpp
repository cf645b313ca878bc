#include "pac2/models.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pac2 {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

void check_shape(const Model& model, std::size_t got) {
  const std::size_t want = layout_of(model).total_size();
  if (got != want)
    throw ShapeError("parameter vector of length " + std::to_string(got) +
                     " does not match model layout of size " + std::to_string(want));
}
}  // namespace

ParamLayout layout_of(const Model& model) {
  if (const auto* lin = std::get_if<GaussianLinearModel>(&model)) {
    (void)lin;
    return ParamLayout{{"theta0", 1}, {"theta1", 1}};
  }
  const auto& mlp = std::get<MlpRegressionModel>(model);
  const auto h = static_cast<std::size_t>(mlp.hidden);
  return ParamLayout{{"w1", h}, {"b1", h}, {"w2", h}, {"b2", 1}};
}

double noise_var_of(const Model& model) {
  return std::visit([](const auto& m) { return m.noise_var; }, model);
}

double mean_function(const Model& model, std::span<const double> theta, double x) {
  check_shape(model, theta.size());
  if (std::holds_alternative<GaussianLinearModel>(model)) return theta[0] + theta[1] * x;
  const auto& mlp = std::get<MlpRegressionModel>(model);
  const auto h = static_cast<std::size_t>(mlp.hidden);
  const auto w1 = theta.subspan(0, h), b1 = theta.subspan(h, h), w2 = theta.subspan(2 * h, h);
  const double b2 = theta[3 * h];
  double out = b2;
  for (std::size_t j = 0; j < h; ++j) out += w2[j] * softplus_stable(w1[j] * x + b1[j]);
  return out;
}

double log_likelihood(const Model& model, std::span<const double> theta, double x, double y) {
  const double f = mean_function(model, theta, x);
  const double s2 = noise_var_of(model);
  const double r = y - f;
  return -0.5 * (kLog2Pi + std::log(s2)) - r * r / (2.0 * s2);
}

double log_likelihood(const Model& model, const ParamVector& theta, double x, double y) {
  if (theta.layout != layout_of(model)) throw ShapeError("parameter layout does not match model");
  return log_likelihood(model, std::span<const double>(theta.values), x, y);
}

Value mean_function(const Model& model, Graph& g, std::span<const Value> theta, double x) {
  (void)g;  // nodes attach through the Value handles
  check_shape(model, theta.size());
  if (std::holds_alternative<GaussianLinearModel>(model)) return theta[0] + theta[1] * x;
  const auto& mlp = std::get<MlpRegressionModel>(model);
  const auto h = static_cast<std::size_t>(mlp.hidden);
  Value out = theta[3 * h];  // b2
  for (std::size_t j = 0; j < h; ++j)
    out = out + theta[2 * h + j] * softplus(theta[j] * x + theta[h + j]);
  return out;
}

Value log_likelihood(const Model& model, Graph& g, std::span<const Value> theta, double x,
                     double y) {
  const Value f = mean_function(model, g, theta, x);
  const double s2 = noise_var_of(model);
  const Value r = g.constant(y) - f;
  return g.constant(-0.5 * (kLog2Pi + std::log(s2))) - square(r) * (1.0 / (2.0 * s2));
}

double predictive_sample(const Model& model, std::span<const double> theta, double x, Rng& rng) {
  return mean_function(model, theta, x) + std::sqrt(noise_var_of(model)) * rng.normal();
}

double clamped_log_loss(const Model& model, std::span<const double> theta, double x, double y,
                        double B) {
  if (B <= 0.0) throw std::domain_error("clamp bound B must be positive");
  const double loss = -log_likelihood(model, theta, x, y);
  return std::min(std::max(loss, 0.0), B);
}

}  // namespace pac2
