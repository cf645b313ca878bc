#pragma once

#include <cstddef>
#include <span>

#include "pac2/dataset.hpp"
#include "pac2/graph.hpp"
#include "pac2/models.hpp"
#include "pac2/posteriors.hpp"
#include "pac2/rng.hpp"

namespace pac2 {

enum class Variant {
  kMap,
  kElbo,
  kPac2Simple,
  kPac2H,
  kEnsemblePac,
  kEnsemblePac2Simple,
  kEnsemblePac2H,
};

const char* variant_name(Variant v);
Variant variant_from_string(const std::string& name);

struct ObjectiveConfig {
  Variant variant = Variant::kMap;
  double epsilon = 0.1;      // log-domain stabilizer added to the running max
  std::size_t minibatch = 0; // 0 = full batch
  int mc_pairs = 1;          // Monte-Carlo draws/pairs per step
};

// Tight variance coefficient in normalized log-domain, alpha = ln(mu/m) < 0:
//   h(alpha) = alpha / (1 - e^alpha)^2 + 1 / (e^alpha (1 - e^alpha))
// Satisfies h(alpha) >= 1/2 with the limit attained as alpha -> 0-.
// Throws std::domain_error for alpha >= 0 (signals a missing epsilon offset).
double h_of_alpha(double alpha);

// Build one stochastic evaluation of the training criterion as a graph value
// (minimization form). `lambda` are the variational parameter leaves laid out
// per pack_lambda; batch indices select the data subset; rng supplies the
// reparameterization noise, drawn in a fixed order. Per-datum terms are
// averaged over the batch while KL/regularizer terms always carry full-n
// weights; sum-form criteria (MAP, ensembles) scale the batch mean back by n.
Value build_objective(Graph& g, const ObjectiveConfig& cfg, const Posterior& prototype,
                      std::span<const Value> lambda, const Model& model, const Dataset& data,
                      std::span<const std::size_t> batch, const GaussianPrior& prior, Rng& rng);

// Convenience: full-batch index list 0..n-1.
std::vector<std::size_t> full_batch(std::size_t n);

}  // namespace pac2
