#include "pac2/objectives.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pac2 {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kMap: return "map";
    case Variant::kElbo: return "elbo";
    case Variant::kPac2Simple: return "pac2_simple";
    case Variant::kPac2H: return "pac2_h";
    case Variant::kEnsemblePac: return "ensemble_pac";
    case Variant::kEnsemblePac2Simple: return "ensemble_pac2_simple";
    case Variant::kEnsemblePac2H: return "ensemble_pac2_h";
  }
  return "?";
}

Variant variant_from_string(const std::string& name) {
  for (Variant v : {Variant::kMap, Variant::kElbo, Variant::kPac2Simple, Variant::kPac2H,
                    Variant::kEnsemblePac, Variant::kEnsemblePac2Simple, Variant::kEnsemblePac2H})
    if (name == variant_name(v)) return v;
  throw std::invalid_argument("unknown objective variant: " + name);
}

double h_of_alpha(double alpha) {
  if (!(alpha < 0.0))
    throw std::domain_error("h_of_alpha needs alpha < 0; is the epsilon stabilizer missing?");
  const double u = std::exp(alpha);
  const double one_minus_u = -std::expm1(alpha);  // 1 - e^alpha without cancellation
  return alpha / (one_minus_u * one_minus_u) + 1.0 / (u * one_minus_u);
}

std::vector<std::size_t> full_batch(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

namespace {

std::vector<double> draw_noise(const Posterior& proto, Rng& rng) {
  std::vector<double> noise(noise_dimension(proto));
  for (double& v : noise) v = rng.normal();
  return noise;
}

Value map_objective(Graph& g, const Posterior& proto, std::span<const Value> lambda,
                    const Model& model, const Dataset& data, std::span<const std::size_t> batch,
                    const GaussianPrior& prior) {
  (void)proto;
  Value fit = g.constant(0.0);
  for (std::size_t i : batch) fit = fit - log_likelihood(model, g, lambda, data.x[i], data.y[i]);
  const double scale = static_cast<double>(data.size()) / static_cast<double>(batch.size());
  return fit * scale - log_prior_density(g, lambda, prior);
}

Value elbo_objective(Graph& g, const ObjectiveConfig& cfg, const Posterior& proto,
                     std::span<const Value> lambda, const Model& model, const Dataset& data,
                     std::span<const std::size_t> batch, const GaussianPrior& prior, Rng& rng) {
  const double n = static_cast<double>(data.size());
  Value fit = g.constant(0.0);
  for (int k = 0; k < cfg.mc_pairs; ++k) {
    const std::vector<double> noise = draw_noise(proto, rng);
    const std::vector<Value> theta = reparameterized_sample(proto, g, lambda, noise);
    for (std::size_t i : batch) fit = fit - log_likelihood(model, g, theta, data.x[i], data.y[i]);
  }
  fit = fit / (static_cast<double>(batch.size()) * cfg.mc_pairs);
  return fit + kl_to_prior(proto, g, lambda, prior) * (1.0 / n);
}

// Stable two-sample criterion. Per datum, with log-likelihoods l, l' of the
// two reparameterized draws:
//   m = stop_gradient(max(l, l') + eps)
//   q = e^{l-m},  q' = e^{l'-m}
//   alpha = ln((q + q')/2)                (always <= -eps < 0)
//   V_sym = (q - q')^2 / 2                (both pair orderings averaged)
//   c = h(alpha) or 1/2, held constant through the backward pass
// Contribution: -l - c * V_sym; KL enters with weight 2/n.
Value pac2_variational_objective(Graph& g, const ObjectiveConfig& cfg, const Posterior& proto,
                                 std::span<const Value> lambda, const Model& model,
                                 const Dataset& data, std::span<const std::size_t> batch,
                                 const GaussianPrior& prior, Rng& rng, bool tight_h) {
  const double n = static_cast<double>(data.size());
  Value acc = g.constant(0.0);
  for (int k = 0; k < cfg.mc_pairs; ++k) {
    const std::vector<double> noise_a = draw_noise(proto, rng);
    const std::vector<double> noise_b = draw_noise(proto, rng);
    const std::vector<Value> theta = reparameterized_sample(proto, g, lambda, noise_a);
    const std::vector<Value> theta_prime = reparameterized_sample(proto, g, lambda, noise_b);
    for (std::size_t i : batch) {
      const Value l = log_likelihood(model, g, theta, data.x[i], data.y[i]);
      const Value lp = log_likelihood(model, g, theta_prime, data.x[i], data.y[i]);
      const Value m = g.stop_gradient(max(l, lp) + cfg.epsilon);
      const Value q = exp(l - m);
      const Value qp = exp(lp - m);
      const double alpha = std::log(0.5 * (q.value() + qp.value()));
      const double c = tight_h ? h_of_alpha(alpha) : 0.5;
      const Value v_sym = square(q - qp) * 0.5;
      acc = acc - l - v_sym * c;
    }
  }
  acc = acc / (static_cast<double>(batch.size()) * cfg.mc_pairs);
  return acc + kl_to_prior(proto, g, lambda, prior) * (2.0 / n);
}

// Accumulated per datum, mirroring the second-order builder exactly so the
// degenerate (zero-diversity) case of the latter reproduces this criterion
// bit for bit.
Value ensemble_pac_objective(Graph& g, const Posterior& proto, std::span<const Value> lambda,
                             const Model& model, const Dataset& data,
                             std::span<const std::size_t> batch, const GaussianPrior& prior) {
  const auto& ens = std::get<ParticleEnsemble>(proto);
  const std::size_t E = ens.size();
  const std::size_t dim = ens.particles.front().size();
  const double scale = static_cast<double>(data.size()) / static_cast<double>(batch.size());
  Value total = g.constant(0.0);
  for (std::size_t i : batch) {
    Value fit = g.constant(0.0);
    for (std::size_t j = 0; j < E; ++j)
      fit = fit - log_likelihood(model, g, lambda.subspan(j * dim, dim), data.x[i], data.y[i]);
    total = total + fit * scale;
  }
  for (std::size_t j = 0; j < E; ++j)
    total = total - log_prior_density(g, lambda.subspan(j * dim, dim), prior);
  return total;
}

// Stable ensemble criterion. Per datum, with per-particle log-likelihoods l_j:
//   m = stop_gradient(max_j l_j + eps),  q_j = e^{l_j - m}
//   alpha = ln((1/E) sum_j q_j)          (<= -eps < 0)
//   div = sum_j q_j^2 - (sum_j q_j)^2/E  (= sum_j (q_j - mean q)^2)
// which is the (1/E)-normalized double sum over particle pairs. Coefficient
// c = h(alpha) or 1/2, held constant. Fit and diversity sums are scaled back
// to full-n totals under minibatching.
Value ensemble_pac2_objective(Graph& g, const ObjectiveConfig& cfg, const Posterior& proto,
                              std::span<const Value> lambda, const Model& model,
                              const Dataset& data, std::span<const std::size_t> batch,
                              const GaussianPrior& prior, bool tight_h) {
  const auto& ens = std::get<ParticleEnsemble>(proto);
  const std::size_t E = ens.size();
  const std::size_t dim = ens.particles.front().size();
  const double scale = static_cast<double>(data.size()) / static_cast<double>(batch.size());

  Value total = g.constant(0.0);
  std::vector<Value> l(E);
  std::vector<Value> q(E);
  for (std::size_t i : batch) {
    bool all_equal = true;
    for (std::size_t j = 0; j < E; ++j) {
      l[j] = log_likelihood(model, g, lambda.subspan(j * dim, dim), data.x[i], data.y[i]);
      all_equal = all_equal && l[j].value() == l[0].value();
    }
    Value fit = g.constant(0.0);
    for (std::size_t j = 0; j < E; ++j) fit = fit - l[j];
    // Coincident particles carry exactly zero diversity; the credit's gradient
    // also vanishes there, so the term can be dropped outright.
    if (E == 1 || all_equal) {
      total = total + fit * scale;
      continue;
    }
    Value running = l[0];
    for (std::size_t j = 1; j < E; ++j) running = max(running, l[j]);
    const Value m = g.stop_gradient(running + cfg.epsilon);
    Value sum_q = g.constant(0.0), sum_q2 = g.constant(0.0);
    for (std::size_t j = 0; j < E; ++j) {
      q[j] = exp(l[j] - m);
      sum_q = sum_q + q[j];
      sum_q2 = sum_q2 + square(q[j]);
    }
    const Value diversity = sum_q2 - square(sum_q) / static_cast<double>(E);
    const double alpha = std::log(sum_q.value() / static_cast<double>(E));
    const double c = tight_h ? h_of_alpha(alpha) : 0.5;
    total = total + (fit - diversity * c) * scale;
  }
  for (std::size_t j = 0; j < E; ++j)
    total = total - log_prior_density(g, lambda.subspan(j * dim, dim), prior);
  return total;
}

}  // namespace

Value build_objective(Graph& g, const ObjectiveConfig& cfg, const Posterior& prototype,
                      std::span<const Value> lambda, const Model& model, const Dataset& data,
                      std::span<const std::size_t> batch, const GaussianPrior& prior, Rng& rng) {
  if (data.empty()) throw std::domain_error("objective needs a non-empty dataset");
  if (batch.empty()) throw std::domain_error("objective needs a non-empty batch");
  if (!(cfg.epsilon > 0.0)) throw std::domain_error("epsilon stabilizer must be positive");
  if (cfg.mc_pairs < 1) throw std::domain_error("mc_pairs must be at least 1");
  if (lambda.size() != lambda_size(prototype))
    throw ShapeError("lambda leaves do not match posterior parameterization");
  const bool gaussian_family = std::holds_alternative<MeanFieldGaussian>(prototype) ||
                               std::holds_alternative<FullGaussian>(prototype);
  if ((cfg.variant == Variant::kElbo || cfg.variant == Variant::kPac2Simple ||
       cfg.variant == Variant::kPac2H) &&
      !gaussian_family)
    throw UnsupportedFamilyError("reparameterized objectives need a Gaussian family");
  if ((cfg.variant == Variant::kEnsemblePac || cfg.variant == Variant::kEnsemblePac2Simple ||
       cfg.variant == Variant::kEnsemblePac2H) &&
      !std::holds_alternative<ParticleEnsemble>(prototype))
    throw UnsupportedFamilyError("ensemble objectives need a particle ensemble");

  switch (cfg.variant) {
    case Variant::kMap:
      return map_objective(g, prototype, lambda, model, data, batch, prior);
    case Variant::kElbo:
      return elbo_objective(g, cfg, prototype, lambda, model, data, batch, prior, rng);
    case Variant::kPac2Simple:
      return pac2_variational_objective(g, cfg, prototype, lambda, model, data, batch, prior, rng,
                                        /*tight_h=*/false);
    case Variant::kPac2H:
      return pac2_variational_objective(g, cfg, prototype, lambda, model, data, batch, prior, rng,
                                        /*tight_h=*/true);
    case Variant::kEnsemblePac:
      return ensemble_pac_objective(g, prototype, lambda, model, data, batch, prior);
    case Variant::kEnsemblePac2Simple:
      return ensemble_pac2_objective(g, cfg, prototype, lambda, model, data, batch, prior,
                                     /*tight_h=*/false);
    case Variant::kEnsemblePac2H:
      return ensemble_pac2_objective(g, cfg, prototype, lambda, model, data, batch, prior,
                                     /*tight_h=*/true);
  }
  throw std::invalid_argument("unknown objective variant");
}

}  // namespace pac2
