#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pac2/dataset.hpp"
#include "pac2/models.hpp"
#include "pac2/posteriors.hpp"
#include "pac2/rng.hpp"

namespace pac2 {

struct PredictiveLL {
  double mean = 0.0;
  double std_error = 0.0;  // Monte-Carlo standard error over test points
};

// Mean over test points of ln[(1/S) sum_s p(y|x,theta_s)], theta_s ~ rho.
// Exact particle average for ensembles (S ignored).
PredictiveLL predictive_log_likelihood(const Posterior& rho, const Model& model,
                                       const Dataset& test, int S, Rng& rng);

struct UncertaintyBands {
  std::vector<double> mean;
  std::vector<double> epistemic_sd;  // spread of f_theta(x) across draws
  std::vector<double> total_sd;      // spread of sampled y across draws
};

UncertaintyBands uncertainty_bands(const Posterior& rho, const Model& model,
                                   std::span<const double> xs, int draws, Rng& rng);

struct PerturbationReport {
  std::vector<double> losses;          // total -log p(D) per perturbed parameter
  double coefficient_percent = 0.0;    // (sd / mean) * 100
  double mode_loss = 0.0;              // loss at the unperturbed mode
  double mean_loss = 0.0;
  double sd_loss = 0.0;
};

// Gaussian perturbations theta + eps, eps ~ N(0, perturb_variance I).
// Throws std::domain_error when the mean perturbed loss is <= 0 (the
// variation coefficient is undefined there).
PerturbationReport perturbation_sensitivity(
    const std::function<double(std::span<const double>)>& total_loss,
    std::span<const double> mode, int n_perturb, double perturb_variance, Rng& rng);

PerturbationReport perturbation_sensitivity(const Model& model, const Dataset& data,
                                            const ParamVector& mode, int n_perturb,
                                            double perturb_variance, Rng& rng);

struct VhatEstimate {
  double sum = 0.0;        // summed over data, the scale reported in run metrics
  double per_datum = 0.0;  // sum / n
};

// Empirical variance credit of the second-order criterion at a trained
// posterior: Monte-Carlo over S sample pairs for Gaussian families, exact for
// Dirac and particle posteriors.
VhatEstimate vhat_at_solution(const Posterior& rho, const Model& model, const Dataset& data,
                              bool tight_h, int pairs, double epsilon, Rng& rng);

}  // namespace pac2
