#pragma once

// Shared fixtures and independent oracles for the test suites. Everything in
// here recomputes quantities through plain arithmetic, separate from the
// graph-based implementation paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "pac2/bounds.hpp"
#include "pac2/dataset.hpp"
#include "pac2/gradcheck.hpp"
#include "pac2/graph.hpp"
#include "pac2/models.hpp"
#include "pac2/objectives.hpp"
#include "pac2/posteriors.hpp"
#include "pac2/rng.hpp"

namespace pac2::testing {

// Straight-line softplus MLP forward pass (no graph engine).
inline double mlp_forward_oracle(std::span<const double> theta, int hidden, double x) {
  const auto h = static_cast<std::size_t>(hidden);
  double out = theta[3 * h];
  for (std::size_t j = 0; j < h; ++j) {
    const double z = theta[j] * x + theta[h + j];
    const double sp = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    out += theta[2 * h + j] * sp;
  }
  return out;
}

inline double normal_log_density(double y, double mean, double var) {
  const double r = y - mean;
  return -0.5 * std::log(2.0 * 3.14159265358979323846 * var) - r * r / (2.0 * var);
}

// Misspecified two-parameter Bernoulli toy: separated likelihood rows with the
// data distribution strictly between them (mixture-realizable, per-theta
// misspecified), mirroring the reference construction.
inline DiscreteToyModel random_misspecified_toy(Rng& rng) {
  const double a = rng.uniform(0.05, 0.45);
  const double b = rng.uniform(0.55, 0.95);
  const double lam = rng.uniform(0.25, 0.75);
  const double nu1 = lam * a + (1.0 - lam) * b;
  DiscreteToyModel toy;
  toy.x_labels = {"0", "1"};
  toy.theta_labels = {"A", "B"};
  toy.likelihood = {{1.0 - a, a}, {1.0 - b, b}};
  toy.nu = {1.0 - nu1, nu1};
  toy.prior = {0.5, 0.5};
  toy.validate();
  return toy;
}

// Same rows, data distribution set to one likelihood row (perfect specification).
inline DiscreteToyModel random_perfect_toy(Rng& rng) {
  DiscreteToyModel toy = random_misspecified_toy(rng);
  toy.nu = toy.likelihood[1];
  return toy;
}

// Canonical 50-draw sample matching the reference toy's Bernoulli(0.4) exactly:
// 20 ones, 30 zeros.
inline std::vector<int> canonical_toy_draws() {
  std::vector<int> data(50, 0);
  for (int i = 0; i < 20; ++i) data[static_cast<std::size_t>(i)] = 1;
  return data;
}

// Small regression fixture for gradient checks.
inline Dataset small_dataset(Rng& rng, std::size_t n) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-2.0, 2.0);
    d.push_back(x, std::sin(x) + 0.3 * rng.normal());
  }
  return d;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// --- plain-double replay of the training criteria -------------------------
//
// Recomputes objective values without the graph engine, with the option of
// holding the stop-gradient quantities (per-datum m and coefficient c) at
// base-point values. Finite differences of the frozen replay are the oracle
// for the analytic gradients around stop_gradient.

inline double oracle_softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

inline double oracle_h(double alpha) {
  const double u = std::exp(alpha);
  const double omu = -std::expm1(alpha);
  return alpha / (omu * omu) + 1.0 / (u * omu);
}

inline double oracle_log_likelihood(const Model& model, std::span<const double> theta, double x,
                                    double y) {
  double mean = 0.0;
  double var = 1.0;
  if (const auto* lin = std::get_if<GaussianLinearModel>(&model)) {
    mean = theta[0] + theta[1] * x;
    var = lin->noise_var;
  } else {
    const auto& mlp = std::get<MlpRegressionModel>(model);
    mean = mlp_forward_oracle(theta, mlp.hidden, x);
    var = mlp.noise_var;
  }
  return normal_log_density(y, mean, var);
}

inline double oracle_log_prior(std::span<const double> theta, double prior_sd) {
  double lp = 0.0;
  for (double t : theta)
    lp += normal_log_density(t, 0.0, prior_sd * prior_sd);
  return lp;
}

// theta(lambda, eps) per family, plain arithmetic
inline std::vector<double> oracle_transform(const Posterior& proto, std::span<const double> lambda,
                                            std::span<const double> eps) {
  if (std::holds_alternative<DiracPosterior>(proto) ||
      std::holds_alternative<ParticleEnsemble>(proto))
    return {lambda.begin(), lambda.end()};
  if (const auto* m = std::get_if<MeanFieldGaussian>(&proto)) {
    const std::size_t n = m->mu.size();
    std::vector<double> theta(n);
    for (std::size_t i = 0; i < n; ++i)
      theta[i] = lambda[i] + oracle_softplus(lambda[n + i]) * eps[i];
    return theta;
  }
  const auto& f = std::get<FullGaussian>(proto);
  const std::size_t d = f.dim();
  std::vector<double> theta(d);
  std::size_t k = 0;
  for (std::size_t i = 0; i < d; ++i) {
    theta[i] = lambda[i] + oracle_softplus(lambda[d + i]) * eps[i];
    for (std::size_t j = 0; j < i; ++j) theta[i] += lambda[2 * d + k + j] * eps[j];
    k += i;
  }
  return theta;
}

inline double oracle_kl(const Posterior& proto, std::span<const double> lambda, double prior_sd) {
  const double ps2 = prior_sd * prior_sd;
  if (const auto* m = std::get_if<MeanFieldGaussian>(&proto)) {
    const std::size_t n = m->mu.size();
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sig = oracle_softplus(lambda[n + i]);
      kl += std::log(prior_sd / sig) + (sig * sig + lambda[i] * lambda[i]) / (2.0 * ps2) - 0.5;
    }
    return kl;
  }
  const auto& f = std::get<FullGaussian>(proto);
  const std::size_t d = f.dim();
  double trace = 0.0, logdet = 0.0, musq = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < d; ++i) {
    const double dii = oracle_softplus(lambda[d + i]);
    trace += dii * dii;
    for (std::size_t j = 0; j < i; ++j) trace += lambda[2 * d + k + j] * lambda[2 * d + k + j];
    k += i;
    logdet += 2.0 * std::log(dii);
    musq += lambda[i] * lambda[i];
  }
  return 0.5 * ((trace + musq) / ps2 - static_cast<double>(d) - logdet +
                static_cast<double>(d) * std::log(ps2));
}

// noise recorded in the production draw order (one stream, pairs in sequence)
struct RecordedNoise {
  std::vector<std::vector<double>> a;  // [pair][dim]
  std::vector<std::vector<double>> b;
};

inline RecordedNoise record_noise(const Posterior& proto, int pairs, bool two_per_pair, Rng rng) {
  RecordedNoise out;
  const std::size_t dim = noise_dimension(proto);
  for (int k = 0; k < pairs; ++k) {
    std::vector<double> na(dim), nb(dim);
    for (double& v : na) v = rng.normal();
    if (two_per_pair)
      for (double& v : nb) v = rng.normal();
    out.a.push_back(std::move(na));
    out.b.push_back(std::move(nb));
  }
  return out;
}

// stop-gradient quantities captured at the base point
struct FrozenStops {
  std::vector<std::vector<double>> m;  // [pair][datum] (ensembles: [0][datum])
  std::vector<std::vector<double>> c;
};

// Full replay of one stochastic objective evaluation. When `frozen` is given,
// m and c are taken from it instead of being recomputed, and when `capture`
// is given the recomputed values are stored there.
inline double oracle_objective(Variant variant, const Posterior& proto,
                               std::span<const double> lambda, const Model& model,
                               const Dataset& data, double prior_sd, double epsilon,
                               const RecordedNoise& noise, const FrozenStops* frozen,
                               FrozenStops* capture) {
  const double n = static_cast<double>(data.size());
  const auto pairs = static_cast<int>(noise.a.size());
  if (variant == Variant::kMap) {
    double fit = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
      fit -= oracle_log_likelihood(model, lambda, data.x[i], data.y[i]);
    return fit - oracle_log_prior(lambda, prior_sd);
  }
  if (variant == Variant::kElbo) {
    double fit = 0.0;
    for (int k = 0; k < pairs; ++k) {
      const std::vector<double> theta = oracle_transform(proto, lambda, noise.a[k]);
      for (std::size_t i = 0; i < data.size(); ++i)
        fit -= oracle_log_likelihood(model, theta, data.x[i], data.y[i]);
    }
    return fit / (n * pairs) + oracle_kl(proto, lambda, prior_sd) / n;
  }
  if (variant == Variant::kPac2Simple || variant == Variant::kPac2H) {
    const bool tight = variant == Variant::kPac2H;
    if (capture) {
      capture->m.assign(pairs, std::vector<double>(data.size(), 0.0));
      capture->c.assign(pairs, std::vector<double>(data.size(), 0.0));
    }
    double acc = 0.0;
    for (int k = 0; k < pairs; ++k) {
      const std::vector<double> theta = oracle_transform(proto, lambda, noise.a[k]);
      const std::vector<double> theta_p = oracle_transform(proto, lambda, noise.b[k]);
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double l = oracle_log_likelihood(model, theta, data.x[i], data.y[i]);
        const double lp = oracle_log_likelihood(model, theta_p, data.x[i], data.y[i]);
        const double m = frozen ? frozen->m[k][i] : std::max(l, lp) + epsilon;
        const double q = std::exp(l - m), qp = std::exp(lp - m);
        const double c =
            frozen ? frozen->c[k][i] : (tight ? oracle_h(std::log(0.5 * (q + qp))) : 0.5);
        if (capture) {
          capture->m[k][i] = m;
          capture->c[k][i] = c;
        }
        acc += -l - c * 0.5 * (q - qp) * (q - qp);
      }
    }
    return acc / (n * pairs) + 2.0 * oracle_kl(proto, lambda, prior_sd) / n;
  }
  // ensembles
  const auto& ens = std::get<ParticleEnsemble>(proto);
  const std::size_t E = ens.size();
  const std::size_t dim = ens.particles.front().size();
  double total = 0.0;
  if (capture) {
    capture->m.assign(1, std::vector<double>(data.size(), 0.0));
    capture->c.assign(1, std::vector<double>(data.size(), 0.0));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<double> l(E);
    for (std::size_t j = 0; j < E; ++j)
      l[j] = oracle_log_likelihood(model, lambda.subspan(j * dim, dim), data.x[i], data.y[i]);
    for (std::size_t j = 0; j < E; ++j) total -= l[j];
    if (variant == Variant::kEnsemblePac || E == 1) continue;
    bool all_equal = true;
    for (std::size_t j = 0; j < E; ++j) all_equal = all_equal && l[j] == l[0];
    if (all_equal && !frozen) continue;
    const double m = frozen ? frozen->m[0][i]
                            : *std::max_element(l.begin(), l.end()) + epsilon;
    double sum_q = 0.0, sum_q2 = 0.0;
    for (std::size_t j = 0; j < E; ++j) {
      const double q = std::exp(l[j] - m);
      sum_q += q;
      sum_q2 += q * q;
    }
    const double diversity = sum_q2 - sum_q * sum_q / static_cast<double>(E);
    const double c = frozen ? frozen->c[0][i]
                            : (variant == Variant::kEnsemblePac2H
                                   ? oracle_h(std::log(sum_q / static_cast<double>(E)))
                                   : 0.5);
    if (capture) {
      capture->m[0][i] = m;
      capture->c[0][i] = c;
    }
    total -= c * diversity;
  }
  for (std::size_t j = 0; j < E; ++j)
    total -= oracle_log_prior(lambda.subspan(j * dim, dim), prior_sd);
  return total;
}

// Full-batch production evaluation with a replayable rng.
inline double eval_objective(const ObjectiveConfig& cfg, const Posterior& proto,
                             std::span<const double> lambda, const Model& model,
                             const Dataset& data, const GaussianPrior& prior, Rng rng) {
  Graph g;
  std::vector<Value> leaves;
  for (double v : lambda) leaves.push_back(g.leaf(v));
  const std::vector<std::size_t> batch = full_batch(data.size());
  return build_objective(g, cfg, proto, leaves, model, data, batch, prior, rng).value();
}

inline EvalResult eval_objective_grad(const ObjectiveConfig& cfg, const Posterior& proto,
                                      std::span<const double> lambda, const Model& model,
                                      const Dataset& data, const GaussianPrior& prior, Rng rng) {
  Graph g;
  std::vector<Value> leaves;
  for (double v : lambda) leaves.push_back(g.leaf(v));
  const std::vector<std::size_t> batch = full_batch(data.size());
  const Value root = build_objective(g, cfg, proto, leaves, model, data, batch, prior, rng);
  g.backward(root);
  return EvalResult{root.value(), g.leaf_gradients()};
}

// Worst relative gradient error of one variant at `points` random parameter
// vectors, against central finite differences of the frozen-stop replay.
inline double stop_gradient_fd_check(Variant variant, const Posterior& proto, const Model& model,
                                     const Dataset& data, double epsilon, int points,
                                     std::uint64_t seed) {
  const GaussianPrior prior{1.0};
  ObjectiveConfig cfg;
  cfg.variant = variant;
  cfg.epsilon = epsilon;
  const bool needs_noise = variant == Variant::kElbo || variant == Variant::kPac2Simple ||
                           variant == Variant::kPac2H;
  const bool two_draws = variant == Variant::kPac2Simple || variant == Variant::kPac2H;
  double worst = 0.0;
  Rng point_rng(seed);
  for (int p = 0; p < points; ++p) {
    std::vector<double> lambda(lambda_size(proto));
    for (double& v : lambda) v = 0.4 * point_rng.normal();
    const Rng draw_rng(seed * 1000003 + static_cast<std::uint64_t>(p));
    const RecordedNoise noise =
        needs_noise ? record_noise(proto, cfg.mc_pairs, two_draws, draw_rng)
                    : RecordedNoise{{{}}, {{}}};
    // production value + analytic gradient
    const EvalResult res = eval_objective_grad(cfg, proto, lambda, model, data, prior, draw_rng);
    // replay check: the plain-double oracle reproduces the value
    FrozenStops stops;
    const double replay = oracle_objective(variant, proto, lambda, model, data, prior.stddev,
                                           epsilon, noise, nullptr, &stops);
    if (std::abs(replay - res.value) > 1e-9 * std::max(1.0, std::abs(res.value)))
      return std::numeric_limits<double>::infinity();
    // finite differences of the frozen replay
    auto frozen_value = [&](std::span<const double> lam) {
      return oracle_objective(variant, proto, lam, model, data, prior.stddev, epsilon, noise,
                              &stops, nullptr);
    };
    worst = std::max(worst, gradient_check(frozen_value, lambda, res.gradient));
  }
  return worst;
}

}  // namespace pac2::testing
