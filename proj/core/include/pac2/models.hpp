#pragma once

#include <span>
#include <variant>
#include <vector>

#include "pac2/graph.hpp"
#include "pac2/param_vector.hpp"
#include "pac2/rng.hpp"

namespace pac2 {

// y ~ Normal(theta0 + theta1 * x, noise_var)
struct GaussianLinearModel {
  double noise_var = 1.0;
};

// One softplus hidden layer, scalar input and output:
//   f(x) = w2 . softplus(w1 * x + b1) + b2
struct MlpRegressionModel {
  int hidden = 20;
  double noise_var = 1.0;
};

using Model = std::variant<GaussianLinearModel, MlpRegressionModel>;

ParamLayout layout_of(const Model& model);
double noise_var_of(const Model& model);

// Forward mean f_theta(x), plain arithmetic.
double mean_function(const Model& model, std::span<const double> theta, double x);

// Gaussian log-density of y at the forward mean, in nats.
double log_likelihood(const Model& model, std::span<const double> theta, double x, double y);
double log_likelihood(const Model& model, const ParamVector& theta, double x, double y);

// Graph forms; gradients flow into theta.
Value mean_function(const Model& model, Graph& g, std::span<const Value> theta, double x);
Value log_likelihood(const Model& model, Graph& g, std::span<const Value> theta, double x,
                     double y);

// y = f_theta(x) + eps, eps ~ Normal(0, noise_var)
double predictive_sample(const Model& model, std::span<const double> theta, double x, Rng& rng);

// min(max(-log_likelihood, 0), B); used for bound certificates only.
double clamped_log_loss(const Model& model, std::span<const double> theta, double x, double y,
                        double B);

}  // namespace pac2
