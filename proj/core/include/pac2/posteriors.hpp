#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pac2/graph.hpp"
#include "pac2/models.hpp"
#include "pac2/param_vector.hpp"
#include "pac2/rng.hpp"

namespace pac2 {

// Zero-mean isotropic Gaussian prior over parameter space.
struct GaussianPrior {
  double stddev = 1.0;
};

struct DiracPosterior {
  ParamVector theta;
};

// Fully factorized Gaussian; sigma_i = softplus(s_i) keeps scales positive
// with bounded gradients on long runs.
struct MeanFieldGaussian {
  ParamLayout layout;
  std::vector<double> mu;
  std::vector<double> s;
};

// Dense Gaussian with covariance L L^T; the diagonal of L is parameterized
// through softplus(diag_raw), the strict lower triangle is stored row-wise.
struct FullGaussian {
  ParamLayout layout;
  std::vector<double> mu;
  std::vector<double> diag_raw;
  std::vector<double> offdiag;

  std::size_t dim() const { return mu.size(); }
  // dense lower-triangular factor
  std::vector<double> scale_matrix() const;
};

// Uniformly weighted mixture of Dirac atoms.
struct ParticleEnsemble {
  std::vector<ParamVector> particles;

  std::size_t size() const { return particles.size(); }
};

using Posterior = std::variant<DiracPosterior, MeanFieldGaussian, FullGaussian, ParticleEnsemble>;

const ParamLayout& layout_of(const Posterior& p);
std::string family_name(const Posterior& p);

// Default-initialized posteriors: mu ~ N(0, 0.1^2), sigma = 0.05,
// particles ~ N(0, 0.1^2) i.i.d.
Posterior init_dirac(const ParamLayout& layout, Rng& rng);
Posterior init_mean_field(const ParamLayout& layout, Rng& rng);
Posterior init_full_gaussian(const ParamLayout& layout, Rng& rng);
Posterior init_particle_ensemble(const ParamLayout& layout, std::size_t count, Rng& rng);

// Draw one parameter vector. Gaussians use mu + scale * eps so that the same
// noise reproduces the pathwise map; the ensemble picks a uniform particle.
ParamVector sample(const Posterior& p, Rng& rng);
std::size_t sample_index(const ParticleEnsemble& p, Rng& rng);

// ln pi(theta) under the Gaussian prior.
double log_prior_density(const GaussianPrior& prior, std::span<const double> theta);

// Closed-form KL(rho, prior) for the Gaussian families.
// Throws UnsupportedFamilyError for Dirac/particle posteriors.
double kl_to_prior(const Posterior& p, const GaussianPrior& prior);

// -(1/E) sum_j ln pi(theta_j): the point-mass regularizer standing in for a
// KL against a finite-precision prior. Not a true KL; named accordingly.
double ensemble_log_prior_regularizer(const Posterior& p, const GaussianPrior& prior);

// log of E_rho[p(y|x,theta)]. Exact for Dirac/ensemble; S-sample Monte Carlo
// estimate through log-sum-exp for Gaussian families.
double log_predictive_mixture_density(const Posterior& p, const Model& model, double x, double y,
                                      int S, Rng& rng);
double predictive_mixture_density(const Posterior& p, const Model& model, double x, double y,
                                  int S, Rng& rng);

// --- flat variational parameterization used by the trainer ----------------

std::size_t lambda_size(const Posterior& p);
std::vector<double> pack_lambda(const Posterior& p);
Posterior unpack_lambda(const Posterior& prototype, std::span<const double> lambda);

// Graph-side reparameterized draw: theta values as a function of the lambda
// leaves and externally drawn standard-normal noise.
std::vector<Value> reparameterized_sample(const Posterior& prototype, Graph& g,
                                          std::span<const Value> lambda,
                                          std::span<const double> noise);
std::size_t noise_dimension(const Posterior& prototype);

// Graph-side closed-form KL for Gaussian families.
Value kl_to_prior(const Posterior& prototype, Graph& g, std::span<const Value> lambda,
                  const GaussianPrior& prior);

// Graph-side ln pi(theta) for a set of theta values.
Value log_prior_density(Graph& g, std::span<const Value> theta, const GaussianPrior& prior);

// --- serialization ---------------------------------------------------------

std::string posterior_to_json(const Posterior& p);
Posterior posterior_from_json(const std::string& text);

}  // namespace pac2
