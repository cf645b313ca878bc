#include "pac2/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pac2/objectives.hpp"

namespace pac2 {

namespace {
PredictiveLL predictive_ll_unchecked(const Posterior& rho, const Model& model, const Dataset& test,
                                     int S, Rng& rng) {
  const std::size_t n = test.size();
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = log_predictive_mixture_density(rho, model, test.x[i], test.y[i], S, rng);
    sum += v;
    sum_sq += v * v;
  }
  PredictiveLL out;
  out.mean = sum / static_cast<double>(n);
  if (n > 1) {
    const double var = (sum_sq - sum * sum / static_cast<double>(n)) / static_cast<double>(n - 1);
    out.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
  }
  return out;
}
}  // namespace

PredictiveLL predictive_log_likelihood(const Posterior& rho, const Model& model,
                                       const Dataset& test, int S, Rng& rng) {
  if (test.empty()) throw std::domain_error("empty test set");
  if (S < 1) throw std::domain_error("sample count must be at least 1");
  return predictive_ll_unchecked(rho, model, test, S, rng);
}

UncertaintyBands uncertainty_bands(const Posterior& rho, const Model& model,
                                   std::span<const double> xs, int draws, Rng& rng) {
  if (draws < 2) throw std::domain_error("uncertainty bands need at least 2 draws");
  UncertaintyBands out;
  out.mean.reserve(xs.size());
  out.epistemic_sd.reserve(xs.size());
  out.total_sd.reserve(xs.size());
  std::vector<double> f(static_cast<std::size_t>(draws));
  std::vector<double> y(static_cast<std::size_t>(draws));
  for (double x : xs) {
    for (int d = 0; d < draws; ++d) {
      const ParamVector theta = sample(rho, rng);
      f[d] = mean_function(model, theta.values, x);
      y[d] = f[d] + std::sqrt(noise_var_of(model)) * rng.normal();
    }
    auto mean_sd = [&](const std::vector<double>& v) {
      double m = 0.0;
      for (double e : v) m += e;
      m /= static_cast<double>(v.size());
      double s2 = 0.0;
      for (double e : v) s2 += (e - m) * (e - m);
      s2 /= static_cast<double>(v.size() - 1);
      return std::pair<double, double>(m, std::sqrt(s2));
    };
    const auto [fm, fs] = mean_sd(f);
    const auto [ym, ys] = mean_sd(y);
    (void)ym;
    out.mean.push_back(fm);
    out.epistemic_sd.push_back(fs);
    out.total_sd.push_back(ys);
  }
  return out;
}

PerturbationReport perturbation_sensitivity(
    const std::function<double(std::span<const double>)>& total_loss,
    std::span<const double> mode, int n_perturb, double perturb_variance, Rng& rng) {
  if (n_perturb < 2) throw std::domain_error("need at least 2 perturbations");
  if (perturb_variance < 0.0) throw std::domain_error("perturbation variance must be >= 0");
  PerturbationReport out;
  out.mode_loss = total_loss(mode);
  const double sd = std::sqrt(perturb_variance);
  std::vector<double> perturbed(mode.begin(), mode.end());
  out.losses.reserve(static_cast<std::size_t>(n_perturb));
  for (int k = 0; k < n_perturb; ++k) {
    for (std::size_t i = 0; i < perturbed.size(); ++i) perturbed[i] = mode[i] + sd * rng.normal();
    out.losses.push_back(total_loss(perturbed));
  }
  double mean = 0.0;
  for (double l : out.losses) mean += l;
  mean /= static_cast<double>(out.losses.size());
  const auto [lo, hi] = std::minmax_element(out.losses.begin(), out.losses.end());
  double var = 0.0;
  if (*lo != *hi) {
    for (double l : out.losses) var += (l - mean) * (l - mean);
    var /= static_cast<double>(out.losses.size() - 1);
  }
  out.mean_loss = mean;
  out.sd_loss = std::sqrt(var);
  if (!(mean > 0.0))
    throw std::domain_error("variation coefficient undefined: mean perturbed loss <= 0");
  out.coefficient_percent = out.sd_loss / mean * 100.0;
  return out;
}

PerturbationReport perturbation_sensitivity(const Model& model, const Dataset& data,
                                            const ParamVector& mode, int n_perturb,
                                            double perturb_variance, Rng& rng) {
  data.validate();
  if (data.empty()) throw std::domain_error("empty dataset");
  auto loss = [&](std::span<const double> theta) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
      total -= log_likelihood(model, theta, data.x[i], data.y[i]);
    return total;
  };
  return perturbation_sensitivity(loss, mode.values, n_perturb, perturb_variance, rng);
}

namespace {

// per-datum credit for one (theta, theta') pair, the two orderings averaged
double pair_credit(const Model& model, double x, double y, std::span<const double> theta,
                   std::span<const double> theta_prime, bool tight_h, double epsilon) {
  const double l = log_likelihood(model, theta, x, y);
  const double lp = log_likelihood(model, theta_prime, x, y);
  const double m = std::max(l, lp) + epsilon;
  const double q = std::exp(l - m);
  const double qp = std::exp(lp - m);
  const double v_sym = 0.5 * (q - qp) * (q - qp);
  if (v_sym == 0.0) return 0.0;
  const double alpha = std::log(0.5 * (q + qp));
  const double c = tight_h ? h_of_alpha(alpha) : 0.5;
  return c * v_sym;
}

double ensemble_credit(const Model& model, double x, double y, const ParticleEnsemble& ens,
                       bool tight_h, double epsilon) {
  const std::size_t E = ens.size();
  std::vector<double> l(E);
  double mx = -std::numeric_limits<double>::infinity();
  bool all_equal = true;
  for (std::size_t j = 0; j < E; ++j) {
    l[j] = log_likelihood(model, ens.particles[j].values, x, y);
    mx = std::max(mx, l[j]);
    all_equal = all_equal && l[j] == l[0];
  }
  if (all_equal) return 0.0;  // coincident atoms carry no diversity
  const double m = mx + epsilon;
  double sum_q = 0.0, sum_q2 = 0.0;
  for (std::size_t j = 0; j < E; ++j) {
    const double q = std::exp(l[j] - m);
    sum_q += q;
    sum_q2 += q * q;
  }
  const double diversity = sum_q2 - sum_q * sum_q / static_cast<double>(E);
  if (diversity == 0.0) return 0.0;
  const double alpha = std::log(sum_q / static_cast<double>(E));
  const double c = tight_h ? h_of_alpha(alpha) : 0.5;
  return c * diversity;
}

}  // namespace

VhatEstimate vhat_at_solution(const Posterior& rho, const Model& model, const Dataset& data,
                              bool tight_h, int pairs, double epsilon, Rng& rng) {
  data.validate();
  if (data.empty()) throw std::domain_error("empty dataset");
  if (pairs < 1) throw std::domain_error("pair count must be at least 1");
  VhatEstimate out;
  if (std::holds_alternative<DiracPosterior>(rho)) {
    out.sum = 0.0;  // single atom: zero variance exactly
  } else if (const auto* ens = std::get_if<ParticleEnsemble>(&rho)) {
    if (ens->size() > 1) {
      for (std::size_t i = 0; i < data.size(); ++i)
        out.sum += ensemble_credit(model, data.x[i], data.y[i], *ens, tight_h, epsilon);
    }
  } else {
    double acc = 0.0;
    for (int s = 0; s < pairs; ++s) {
      const ParamVector theta = sample(rho, rng);
      const ParamVector theta_prime = sample(rho, rng);
      for (std::size_t i = 0; i < data.size(); ++i)
        acc += pair_credit(model, data.x[i], data.y[i], theta.values, theta_prime.values, tight_h,
                           epsilon);
    }
    out.sum = acc / static_cast<double>(pairs);
  }
  out.per_datum = out.sum / static_cast<double>(data.size());
  return out;
}

}  // namespace pac2
