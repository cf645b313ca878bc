#include "pac2/posteriors.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace pac2 {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

// softplus^{-1}(y) = ln(e^y - 1)
double inverse_softplus(double y) { return std::log(std::expm1(y)); }

constexpr double kInitMuSd = 0.1;
constexpr double kInitSigma = 0.05;
}  // namespace

std::vector<double> FullGaussian::scale_matrix() const {
  const std::size_t d = dim();
  std::vector<double> L(d * d, 0.0);
  std::size_t k = 0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) L[i * d + j] = offdiag[k++];
    L[i * d + i] = softplus_stable(diag_raw[i]);
  }
  return L;
}

const ParamLayout& layout_of(const Posterior& p) {
  if (const auto* d = std::get_if<DiracPosterior>(&p)) return d->theta.layout;
  if (const auto* m = std::get_if<MeanFieldGaussian>(&p)) return m->layout;
  if (const auto* f = std::get_if<FullGaussian>(&p)) return f->layout;
  const auto& e = std::get<ParticleEnsemble>(p);
  if (e.particles.empty()) throw std::invalid_argument("empty particle ensemble");
  return e.particles.front().layout;
}

std::string family_name(const Posterior& p) {
  if (std::holds_alternative<DiracPosterior>(p)) return "dirac";
  if (std::holds_alternative<MeanFieldGaussian>(p)) return "mean_field_gaussian";
  if (std::holds_alternative<FullGaussian>(p)) return "full_gaussian";
  return "particle_ensemble";
}

Posterior init_dirac(const ParamLayout& layout, Rng& rng) {
  std::vector<double> theta(layout.total_size());
  for (double& v : theta) v = kInitMuSd * rng.normal();
  return DiracPosterior{ParamVector(layout, std::move(theta))};
}

Posterior init_mean_field(const ParamLayout& layout, Rng& rng) {
  MeanFieldGaussian q;
  q.layout = layout;
  q.mu.resize(layout.total_size());
  for (double& v : q.mu) v = kInitMuSd * rng.normal();
  q.s.assign(layout.total_size(), inverse_softplus(kInitSigma));
  return q;
}

Posterior init_full_gaussian(const ParamLayout& layout, Rng& rng) {
  FullGaussian q;
  q.layout = layout;
  q.mu.resize(layout.total_size());
  for (double& v : q.mu) v = kInitMuSd * rng.normal();
  q.diag_raw.assign(layout.total_size(), inverse_softplus(kInitSigma));
  q.offdiag.assign(layout.total_size() * (layout.total_size() - 1) / 2, 0.0);
  return q;
}

Posterior init_particle_ensemble(const ParamLayout& layout, std::size_t count, Rng& rng) {
  if (count < 1) throw std::domain_error("ensemble needs at least one particle");
  ParticleEnsemble e;
  e.particles.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    std::vector<double> theta(layout.total_size());
    for (double& v : theta) v = kInitMuSd * rng.normal();
    e.particles.emplace_back(layout, std::move(theta));
  }
  return e;
}

std::size_t sample_index(const ParticleEnsemble& p, Rng& rng) {
  return static_cast<std::size_t>(rng.below(p.particles.size()));
}

ParamVector sample(const Posterior& p, Rng& rng) {
  if (const auto* d = std::get_if<DiracPosterior>(&p)) return d->theta;
  if (const auto* m = std::get_if<MeanFieldGaussian>(&p)) {
    std::vector<double> theta(m->mu.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
      theta[i] = m->mu[i] + softplus_stable(m->s[i]) * rng.normal();
    return ParamVector(m->layout, std::move(theta));
  }
  if (const auto* f = std::get_if<FullGaussian>(&p)) {
    const std::size_t d = f->dim();
    std::vector<double> eps(d);
    for (double& e : eps) e = rng.normal();
    const std::vector<double> L = f->scale_matrix();
    std::vector<double> theta(f->mu);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j <= i; ++j) theta[i] += L[i * d + j] * eps[j];
    return ParamVector(f->layout, std::move(theta));
  }
  const auto& e = std::get<ParticleEnsemble>(p);
  return e.particles[sample_index(e, rng)];
}

double log_prior_density(const GaussianPrior& prior, std::span<const double> theta) {
  const double s2 = prior.stddev * prior.stddev;
  double lp = 0.0;
  for (double t : theta) lp += -0.5 * (kLog2Pi + std::log(s2)) - t * t / (2.0 * s2);
  return lp;
}

double kl_to_prior(const Posterior& p, const GaussianPrior& prior) {
  const double ps = prior.stddev;
  if (const auto* m = std::get_if<MeanFieldGaussian>(&p)) {
    double kl = 0.0;
    for (std::size_t i = 0; i < m->mu.size(); ++i) {
      const double sig = softplus_stable(m->s[i]);
      kl += std::log(ps / sig) + (sig * sig + m->mu[i] * m->mu[i]) / (2.0 * ps * ps) - 0.5;
    }
    return kl;
  }
  if (const auto* f = std::get_if<FullGaussian>(&p)) {
    const std::size_t d = f->dim();
    const std::vector<double> L = f->scale_matrix();
    double trace = 0.0, logdet = 0.0, musq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j <= i; ++j) trace += L[i * d + j] * L[i * d + j];
      logdet += 2.0 * std::log(L[i * d + i]);
      musq += f->mu[i] * f->mu[i];
    }
    return 0.5 * ((trace + musq) / (ps * ps) - static_cast<double>(d) - logdet +
                  static_cast<double>(d) * std::log(ps * ps));
  }
  throw UnsupportedFamilyError(
      "kl_to_prior is only defined for Gaussian families; use "
      "ensemble_log_prior_regularizer for point-mass posteriors");
}

double ensemble_log_prior_regularizer(const Posterior& p, const GaussianPrior& prior) {
  if (const auto* d = std::get_if<DiracPosterior>(&p))
    return -log_prior_density(prior, d->theta.values);
  if (const auto* e = std::get_if<ParticleEnsemble>(&p)) {
    double acc = 0.0;
    for (const ParamVector& t : e->particles) acc += -log_prior_density(prior, t.values);
    return acc / static_cast<double>(e->particles.size());
  }
  throw UnsupportedFamilyError("regularizer is defined for point-mass posteriors only");
}

double log_predictive_mixture_density(const Posterior& p, const Model& model, double x, double y,
                                      int S, Rng& rng) {
  // m + ln(mean of e^{l - m}): exact when all atoms coincide
  auto log_mean_exp = [](const std::vector<double>& ls) {
    double m = ls[0];
    for (double v : ls) m = std::max(m, v);
    double total = 0.0;
    for (double v : ls) total += std::exp(v - m);
    return m + std::log(total / static_cast<double>(ls.size()));
  };
  if (const auto* d = std::get_if<DiracPosterior>(&p))
    return log_likelihood(model, std::span<const double>(d->theta.values), x, y);
  if (const auto* e = std::get_if<ParticleEnsemble>(&p)) {
    std::vector<double> ls;
    ls.reserve(e->particles.size());
    for (const ParamVector& t : e->particles)
      ls.push_back(log_likelihood(model, std::span<const double>(t.values), x, y));
    return log_mean_exp(ls);
  }
  if (S < 1) throw std::domain_error("sample count must be at least 1");
  std::vector<double> ls;
  ls.reserve(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    const ParamVector theta = sample(p, rng);
    ls.push_back(log_likelihood(model, std::span<const double>(theta.values), x, y));
  }
  return log_mean_exp(ls);
}

double predictive_mixture_density(const Posterior& p, const Model& model, double x, double y,
                                  int S, Rng& rng) {
  return std::exp(log_predictive_mixture_density(p, model, x, y, S, rng));
}

// --- flat lambda parameterization ------------------------------------------

std::size_t lambda_size(const Posterior& p) {
  if (const auto* d = std::get_if<DiracPosterior>(&p)) return d->theta.size();
  if (const auto* m = std::get_if<MeanFieldGaussian>(&p)) return 2 * m->mu.size();
  if (const auto* f = std::get_if<FullGaussian>(&p))
    return 2 * f->dim() + f->dim() * (f->dim() - 1) / 2;
  const auto& e = std::get<ParticleEnsemble>(p);
  return e.particles.size() * e.particles.front().size();
}

std::vector<double> pack_lambda(const Posterior& p) {
  std::vector<double> out;
  out.reserve(lambda_size(p));
  if (const auto* d = std::get_if<DiracPosterior>(&p)) {
    out = d->theta.values;
  } else if (const auto* m = std::get_if<MeanFieldGaussian>(&p)) {
    out.insert(out.end(), m->mu.begin(), m->mu.end());
    out.insert(out.end(), m->s.begin(), m->s.end());
  } else if (const auto* f = std::get_if<FullGaussian>(&p)) {
    out.insert(out.end(), f->mu.begin(), f->mu.end());
    out.insert(out.end(), f->diag_raw.begin(), f->diag_raw.end());
    out.insert(out.end(), f->offdiag.begin(), f->offdiag.end());
  } else {
    for (const ParamVector& t : std::get<ParticleEnsemble>(p).particles)
      out.insert(out.end(), t.values.begin(), t.values.end());
  }
  return out;
}

Posterior unpack_lambda(const Posterior& prototype, std::span<const double> lambda) {
  if (lambda.size() != lambda_size(prototype))
    throw ShapeError("lambda vector does not match posterior parameterization");
  if (const auto* d = std::get_if<DiracPosterior>(&prototype))
    return DiracPosterior{ParamVector(d->theta.layout, {lambda.begin(), lambda.end()})};
  if (const auto* m = std::get_if<MeanFieldGaussian>(&prototype)) {
    const std::size_t n = m->mu.size();
    MeanFieldGaussian out;
    out.layout = m->layout;
    out.mu.assign(lambda.begin(), lambda.begin() + n);
    out.s.assign(lambda.begin() + n, lambda.begin() + 2 * n);
    return out;
  }
  if (const auto* f = std::get_if<FullGaussian>(&prototype)) {
    const std::size_t d = f->dim();
    FullGaussian out;
    out.layout = f->layout;
    out.mu.assign(lambda.begin(), lambda.begin() + d);
    out.diag_raw.assign(lambda.begin() + d, lambda.begin() + 2 * d);
    out.offdiag.assign(lambda.begin() + 2 * d, lambda.end());
    return out;
  }
  const auto& e = std::get<ParticleEnsemble>(prototype);
  const std::size_t dim = e.particles.front().size();
  ParticleEnsemble out;
  out.particles.reserve(e.particles.size());
  for (std::size_t j = 0; j < e.particles.size(); ++j)
    out.particles.emplace_back(e.particles.front().layout,
                               std::vector<double>(lambda.begin() + j * dim,
                                                   lambda.begin() + (j + 1) * dim));
  return out;
}

std::size_t noise_dimension(const Posterior& prototype) {
  if (std::holds_alternative<MeanFieldGaussian>(prototype) ||
      std::holds_alternative<FullGaussian>(prototype))
    return layout_of(prototype).total_size();
  return 0;
}

std::vector<Value> reparameterized_sample(const Posterior& prototype, Graph& g,
                                          std::span<const Value> lambda,
                                          std::span<const double> noise) {
  if (const auto* m = std::get_if<MeanFieldGaussian>(&prototype)) {
    const std::size_t n = m->mu.size();
    if (noise.size() != n) throw ShapeError("noise dimension mismatch");
    std::vector<Value> theta;
    theta.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      theta.push_back(lambda[i] + softplus(lambda[n + i]) * noise[i]);
    return theta;
  }
  if (const auto* f = std::get_if<FullGaussian>(&prototype)) {
    const std::size_t d = f->dim();
    if (noise.size() != d) throw ShapeError("noise dimension mismatch");
    std::vector<Value> theta;
    theta.reserve(d);
    std::size_t k = 0;
    for (std::size_t i = 0; i < d; ++i) {
      Value t = lambda[i] + softplus(lambda[d + i]) * noise[i];
      for (std::size_t j = 0; j < i; ++j) t = t + lambda[2 * d + k + j] * noise[j];
      k += i;
      theta.push_back(t);
    }
    return theta;
  }
  // point-mass families: lambda entries are the parameters themselves
  (void)g;
  return std::vector<Value>(lambda.begin(), lambda.end());
}

Value kl_to_prior(const Posterior& prototype, Graph& g, std::span<const Value> lambda,
                  const GaussianPrior& prior) {
  const double ps2 = prior.stddev * prior.stddev;
  if (const auto* m = std::get_if<MeanFieldGaussian>(&prototype)) {
    const std::size_t n = m->mu.size();
    Value kl = g.constant(0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const Value sig = softplus(lambda[n + i]);
      kl = kl + (std::log(prior.stddev) - log(sig)) +
           (square(sig) + square(lambda[i])) * (1.0 / (2.0 * ps2)) - 0.5;
    }
    return kl;
  }
  if (const auto* f = std::get_if<FullGaussian>(&prototype)) {
    const std::size_t d = f->dim();
    Value trace = g.constant(0.0), logdet = g.constant(0.0), musq = g.constant(0.0);
    std::size_t k = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const Value dii = softplus(lambda[d + i]);
      trace = trace + square(dii);
      for (std::size_t j = 0; j < i; ++j) trace = trace + square(lambda[2 * d + k + j]);
      k += i;
      logdet = logdet + 2.0 * log(dii);
      musq = musq + square(lambda[i]);
    }
    return 0.5 * ((trace + musq) * (1.0 / ps2) - static_cast<double>(d) - logdet +
                  static_cast<double>(d) * std::log(ps2));
  }
  throw UnsupportedFamilyError("graph KL is only defined for Gaussian families");
}

Value log_prior_density(Graph& g, std::span<const Value> theta, const GaussianPrior& prior) {
  const double s2 = prior.stddev * prior.stddev;
  Value lp = g.constant(-0.5 * (kLog2Pi + std::log(s2)) * static_cast<double>(theta.size()));
  Value sq = g.constant(0.0);
  for (const Value& t : theta) sq = sq + square(t);
  return lp - sq * (1.0 / (2.0 * s2));
}

// --- serialization ----------------------------------------------------------

namespace {
using ordered_json = nlohmann::ordered_json;

ordered_json layout_to_json(const ParamLayout& layout) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : layout.slices()) arr.push_back({{"name", s.name}, {"size", s.size}});
  return arr;
}

ParamLayout layout_from_json(const ordered_json& arr) {
  std::vector<SliceSpec> slices;
  for (const auto& s : arr) slices.push_back({s.at("name").get<std::string>(), s.at("size").get<std::size_t>()});
  return ParamLayout(std::move(slices));
}
}  // namespace

std::string posterior_to_json(const Posterior& p) {
  ordered_json j;
  j["family"] = family_name(p);
  j["layout"] = layout_to_json(layout_of(p));
  if (const auto* d = std::get_if<DiracPosterior>(&p)) {
    j["theta"] = d->theta.values;
  } else if (const auto* m = std::get_if<MeanFieldGaussian>(&p)) {
    j["mu"] = m->mu;
    j["s"] = m->s;
  } else if (const auto* f = std::get_if<FullGaussian>(&p)) {
    j["mu"] = f->mu;
    j["diag_raw"] = f->diag_raw;
    j["offdiag"] = f->offdiag;
  } else {
    const auto& e = std::get<ParticleEnsemble>(p);
    ordered_json particles = ordered_json::array();
    for (const ParamVector& t : e.particles) particles.push_back(t.values);
    j["particles"] = particles;
  }
  return j.dump(2);
}

Posterior posterior_from_json(const std::string& text) {
  const ordered_json j = ordered_json::parse(text);
  const std::string family = j.at("family").get<std::string>();
  const ParamLayout layout = layout_from_json(j.at("layout"));
  if (family == "dirac")
    return DiracPosterior{ParamVector(layout, j.at("theta").get<std::vector<double>>())};
  if (family == "mean_field_gaussian") {
    MeanFieldGaussian m;
    m.layout = layout;
    m.mu = j.at("mu").get<std::vector<double>>();
    m.s = j.at("s").get<std::vector<double>>();
    return m;
  }
  if (family == "full_gaussian") {
    FullGaussian f;
    f.layout = layout;
    f.mu = j.at("mu").get<std::vector<double>>();
    f.diag_raw = j.at("diag_raw").get<std::vector<double>>();
    f.offdiag = j.at("offdiag").get<std::vector<double>>();
    return f;
  }
  if (family == "particle_ensemble") {
    ParticleEnsemble e;
    for (const auto& t : j.at("particles"))
      e.particles.emplace_back(layout, t.get<std::vector<double>>());
    return e;
  }
  throw UnsupportedFamilyError("unknown posterior family tag: " + family);
}

}  // namespace pac2
