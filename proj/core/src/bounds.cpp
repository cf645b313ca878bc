#include "pac2/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "pac2/rng.hpp"

namespace pac2 {

namespace {
constexpr double kSumTol = 1e-12;

void check_distribution(const std::vector<double>& w, const char* what) {
  double total = 0.0;
  for (double v : w) {
    if (v < 0.0) throw std::invalid_argument(std::string(what) + " has a negative entry");
    total += v;
  }
  if (std::abs(total - 1.0) > kSumTol)
    throw std::invalid_argument(std::string(what) + " does not sum to 1");
}

void check_mixture(const DiscreteToyModel& toy, const DiscreteMixture& rho) {
  if (rho.weights.size() != toy.num_params())
    throw std::invalid_argument("mixture size does not match parameter set");
  check_distribution(rho.weights, "mixture rho");
}

// predictive mass per outcome
std::vector<double> predictive(const DiscreteToyModel& toy, const DiscreteMixture& rho) {
  std::vector<double> p(toy.num_outcomes(), 0.0);
  for (std::size_t t = 0; t < toy.num_params(); ++t)
    for (std::size_t x = 0; x < toy.num_outcomes(); ++x)
      p[x] += rho.weights[t] * toy.likelihood[t][x];
  return p;
}

double log_sum_exp(const std::vector<double>& v) {
  double m = v[0];
  for (double e : v) m = std::max(m, e);
  if (!std::isfinite(m)) return m;
  double total = 0.0;
  for (double e : v) total += std::exp(e - m);
  return m + std::log(total);
}
}  // namespace

void DiscreteToyModel::validate() const {
  if (likelihood.size() != num_params())
    throw std::invalid_argument("likelihood table rows do not match parameter set");
  for (const auto& row : likelihood) {
    if (row.size() != num_outcomes())
      throw std::invalid_argument("likelihood row length does not match sample space");
    check_distribution(row, "likelihood row");
  }
  check_distribution(nu, "data distribution nu");
  check_distribution(prior, "prior");
}

DiscreteToyModel reference_toy() {
  DiscreteToyModel toy;
  toy.x_labels = {"0", "1"};
  toy.theta_labels = {"A", "B"};
  toy.likelihood = {{0.8, 0.2}, {0.2, 0.8}};
  toy.nu = {0.6, 0.4};
  toy.prior = {0.5, 0.5};
  toy.validate();
  return toy;
}

double entropy(const DiscreteToyModel& toy) {
  double h = 0.0;
  for (double v : toy.nu)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double expected_code_length(const DiscreteToyModel& toy, const DiscreteMixture& rho) {
  check_mixture(toy, rho);
  const std::vector<double> p = predictive(toy, rho);
  double total = 0.0;
  for (std::size_t x = 0; x < toy.num_outcomes(); ++x) {
    if (toy.nu[x] == 0.0) continue;
    if (p[x] <= 0.0) throw NumericError("infinite code length: predictive mass 0 on outcome " +
                                        toy.x_labels[x]);
    total -= toy.nu[x] * std::log(p[x]);
  }
  return total;
}

double jensen_bound(const DiscreteToyModel& toy, const DiscreteMixture& rho) {
  check_mixture(toy, rho);
  double total = 0.0;
  for (std::size_t t = 0; t < toy.num_params(); ++t) {
    if (rho.weights[t] == 0.0) continue;
    double L = 0.0;
    for (std::size_t x = 0; x < toy.num_outcomes(); ++x) {
      if (toy.nu[x] == 0.0) continue;
      if (toy.likelihood[t][x] <= 0.0)
        throw NumericError("infinite code length: theta " + toy.theta_labels[t] +
                           " has zero likelihood on outcome " + toy.x_labels[x]);
      L -= toy.nu[x] * std::log(toy.likelihood[t][x]);
    }
    total += rho.weights[t] * L;
  }
  return total;
}

double jensen2_bound(const DiscreteToyModel& toy, const DiscreteMixture& rho) {
  check_mixture(toy, rho);
  const std::vector<double> p = predictive(toy, rho);
  double variance_term = 0.0;
  for (std::size_t x = 0; x < toy.num_outcomes(); ++x) {
    if (toy.nu[x] == 0.0) continue;
    double mx = 0.0;  // max over the support of rho only
    for (std::size_t t = 0; t < toy.num_params(); ++t)
      if (rho.weights[t] > 0.0) mx = std::max(mx, toy.likelihood[t][x]);
    double var = 0.0;
    for (std::size_t t = 0; t < toy.num_params(); ++t) {
      const double d = toy.likelihood[t][x] - p[x];
      var += rho.weights[t] * d * d;
    }
    if (var > 0.0) variance_term += toy.nu[x] * var / (2.0 * mx * mx);
  }
  return jensen_bound(toy, rho) - variance_term;
}

namespace {
GridMinimum scan_two_param(const BoundSelector& selector, const DiscreteToyModel& toy, double lo,
                           double hi, double step) {
  GridMinimum best;
  best.value = std::numeric_limits<double>::infinity();
  // ascending scan with strict improvement keeps the smallest w on ties,
  // which is the lexicographically smallest mixture
  for (double w = lo; w <= hi + step * 0.5; w += step) {
    const double wc = std::min(std::max(w, 0.0), 1.0);
    DiscreteMixture rho{{wc, 1.0 - wc}};
    const double v = selector(toy, rho);
    if (v < best.value) {
      best.value = v;
      best.rho = rho;
    }
  }
  return best;
}

void enumerate_compositions(std::size_t dims, std::size_t ticks,
                            const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> counts(dims, 0);
  // lexicographic enumeration of counts summing to `ticks`
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t left) {
    if (pos == dims - 1) {
      counts[pos] = left;
      visit(counts);
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      counts[pos] = c;
      rec(pos + 1, left - c);
    }
  };
  rec(0, ticks);
}
}  // namespace

GridMinimum grid_minimize(const BoundSelector& selector, const DiscreteToyModel& toy,
                          double resolution) {
  if (!(resolution > 0.0) || resolution > 0.5)
    throw std::domain_error("grid resolution must be in (0, 0.5]");
  const std::size_t k = toy.num_params();
  if (k == 2) {
    GridMinimum coarse = scan_two_param(selector, toy, 0.0, 1.0, resolution);
    const double w0 = coarse.rho.weights[0];
    // dense refinement around the incumbent
    return scan_two_param(selector, toy, std::max(0.0, w0 - resolution),
                          std::min(1.0, w0 + resolution), resolution / 100.0);
  }
  if (k > 4) throw std::domain_error("grid_minimize supports at most 4 parameters");
  const auto ticks = static_cast<std::size_t>(std::llround(1.0 / resolution));
  GridMinimum best;
  best.value = std::numeric_limits<double>::infinity();
  enumerate_compositions(k, ticks, [&](const std::vector<std::size_t>& counts) {
    DiscreteMixture rho;
    rho.weights.resize(k);
    for (std::size_t i = 0; i < k; ++i)
      rho.weights[i] = static_cast<double>(counts[i]) / static_cast<double>(ticks);
    const double v = selector(toy, rho);
    if (v < best.value) {
      best.value = v;
      best.rho = rho;
    }
  });
  return best;
}

DiscreteMixture exact_pac2_update(const DiscreteToyModel& toy, const std::vector<int>& data,
                                  const DiscreteMixture& rho_t) {
  check_mixture(toy, rho_t);
  const std::vector<double> pbar = predictive(toy, rho_t);
  // per-outcome normalizer: max over the full parameter set
  std::vector<double> max_sq(toy.num_outcomes(), 0.0);
  for (std::size_t x = 0; x < toy.num_outcomes(); ++x) {
    double mx = 0.0;
    for (std::size_t t = 0; t < toy.num_params(); ++t) mx = std::max(mx, toy.likelihood[t][x]);
    max_sq[x] = mx * mx;
  }
  std::vector<double> logits(toy.num_params());
  for (std::size_t t = 0; t < toy.num_params(); ++t) {
    double e = toy.prior[t] > 0.0 ? std::log(toy.prior[t])
                                  : -std::numeric_limits<double>::infinity();
    for (int xi : data) {
      const auto x = static_cast<std::size_t>(xi);
      const double p = toy.likelihood[t][x];
      e += (p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
      e += (p * p - p * pbar[x]) / (2.0 * max_sq[x]);
    }
    logits[t] = e;
  }
  const double lz = log_sum_exp(logits);
  if (!std::isfinite(lz)) throw NumericError("all-zero unnormalized posterior mass");
  DiscreteMixture out;
  out.weights.resize(toy.num_params());
  for (std::size_t t = 0; t < toy.num_params(); ++t) out.weights[t] = std::exp(logits[t] - lz);
  return out;
}

double total_variation(const DiscreteMixture& a, const DiscreteMixture& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.weights.size(); ++i) tv += std::abs(a.weights[i] - b.weights[i]);
  return 0.5 * tv;
}

FixedPointResult iterate_pac2_update(const DiscreteToyModel& toy, const std::vector<int>& data,
                                     const DiscreteMixture& init, int max_iterations, double tol) {
  FixedPointResult res;
  res.rho = init;
  for (int it = 0; it < max_iterations; ++it) {
    DiscreteMixture next = exact_pac2_update(toy, data, res.rho);
    res.final_tv = total_variation(next, res.rho);
    res.rho = std::move(next);
    res.iterations = it + 1;
    if (res.final_tv < tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

DiscreteMixture bayes_posterior(const DiscreteToyModel& toy, const std::vector<int>& data) {
  std::vector<double> logits(toy.num_params());
  for (std::size_t t = 0; t < toy.num_params(); ++t) {
    double e = toy.prior[t] > 0.0 ? std::log(toy.prior[t])
                                  : -std::numeric_limits<double>::infinity();
    for (int xi : data) {
      const double p = toy.likelihood[t][static_cast<std::size_t>(xi)];
      e += (p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
    }
    logits[t] = e;
  }
  const double lz = log_sum_exp(logits);
  if (!std::isfinite(lz)) throw NumericError("all-zero posterior mass");
  DiscreteMixture out;
  out.weights.resize(toy.num_params());
  for (std::size_t t = 0; t < toy.num_params(); ++t) out.weights[t] = std::exp(logits[t] - lz);
  return out;
}

double discrete_kl(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("KL between different-size simplices");
  double kl = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    if (b[i] == 0.0) return std::numeric_limits<double>::infinity();
    kl += a[i] * std::log(a[i] / b[i]);
  }
  return kl;
}

namespace {
// per-theta mean empirical log-loss over the observed outcomes
std::vector<double> empirical_log_loss(const DiscreteToyModel& toy, const std::vector<int>& data) {
  std::vector<double> out(toy.num_params(), 0.0);
  for (std::size_t t = 0; t < toy.num_params(); ++t) {
    for (int xi : data) {
      const double p = toy.likelihood[t][static_cast<std::size_t>(xi)];
      out[t] -= (p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
    }
    out[t] /= static_cast<double>(data.size());
  }
  return out;
}
}  // namespace

double empirical_first_order_objective(const DiscreteToyModel& toy, const std::vector<int>& data,
                                       const DiscreteMixture& rho) {
  check_mixture(toy, rho);
  if (data.empty()) throw std::domain_error("empty dataset");
  const std::vector<double> loss = empirical_log_loss(toy, data);
  double v = 0.0;
  for (std::size_t t = 0; t < toy.num_params(); ++t)
    if (rho.weights[t] > 0.0) v += rho.weights[t] * loss[t];
  return v + discrete_kl(rho.weights, toy.prior) / static_cast<double>(data.size());
}

double empirical_second_order_objective(const DiscreteToyModel& toy, const std::vector<int>& data,
                                        const DiscreteMixture& rho) {
  check_mixture(toy, rho);
  if (data.empty()) throw std::domain_error("empty dataset");
  const std::vector<double> loss = empirical_log_loss(toy, data);
  const std::vector<double> pbar = predictive(toy, rho);
  double v = 0.0;
  for (std::size_t t = 0; t < toy.num_params(); ++t)
    if (rho.weights[t] > 0.0) v += rho.weights[t] * loss[t];
  double vhat = 0.0;
  for (int xi : data) {
    const auto x = static_cast<std::size_t>(xi);
    double mx = 0.0;
    for (std::size_t t = 0; t < toy.num_params(); ++t) mx = std::max(mx, toy.likelihood[t][x]);
    double var = 0.0;
    for (std::size_t t = 0; t < toy.num_params(); ++t) {
      const double d = toy.likelihood[t][x] - pbar[x];
      var += rho.weights[t] * d * d;
    }
    vhat += var / (2.0 * mx * mx);
  }
  vhat /= static_cast<double>(data.size());
  return v - vhat + 2.0 * discrete_kl(rho.weights, toy.prior) / static_cast<double>(data.size());
}

double coordinate_second_order_objective(const DiscreteToyModel& toy, const std::vector<int>& data,
                                         const DiscreteMixture& rho, const DiscreteMixture& ref) {
  check_mixture(toy, rho);
  check_mixture(toy, ref);
  if (data.empty()) throw std::domain_error("empty dataset");
  const std::vector<double> pbar = predictive(toy, ref);
  const double n = static_cast<double>(data.size());
  double v = 0.0;
  for (std::size_t t = 0; t < toy.num_params(); ++t) {
    if (rho.weights[t] == 0.0) continue;
    double g = 0.0;
    for (int xi : data) {
      const auto x = static_cast<std::size_t>(xi);
      double mx = 0.0;
      for (std::size_t u = 0; u < toy.num_params(); ++u) mx = std::max(mx, toy.likelihood[u][x]);
      const double p = toy.likelihood[t][x];
      g -= (p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
      g -= (p * p - p * pbar[x]) / (2.0 * mx * mx);
    }
    v += rho.weights[t] * g / n;
  }
  return v + discrete_kl(rho.weights, toy.prior) / n;
}

std::vector<int> sample_outcomes(const DiscreteToyModel& toy, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    int pick = static_cast<int>(toy.num_outcomes()) - 1;
    for (std::size_t x = 0; x < toy.num_outcomes(); ++x) {
      acc += toy.nu[x];
      if (u < acc) {
        pick = static_cast<int>(x);
        break;
      }
    }
    out.push_back(pick);
  }
  return out;
}

BoundCertificate pac_bayes_certificate(int order, double empirical_loss, double variance_term,
                                       double kl, double B, double xi, int n) {
  if (order != 1 && order != 2) throw std::domain_error("certificate order must be 1 or 2");
  if (!(B > 0.0)) throw std::domain_error("clamp bound B must be positive");
  if (!(xi > 0.0 && xi < 1.0)) throw std::domain_error("confidence xi must lie in (0,1)");
  if (n < 1) throw std::domain_error("sample count must be at least 1");
  if (order == 1 && variance_term != 0.0)
    throw std::domain_error("variance term is only meaningful for order 2");

  BoundCertificate cert;
  cert.order = order;
  cert.B = B;
  cert.xi = xi;
  cert.n = n;
  cert.empirical_loss = empirical_loss;
  cert.variance_term = variance_term;
  cert.kl = kl;
  const double log_inv_xi = std::log(1.0 / xi);
  if (order == 1) {
    cert.multiplier = B / (-std::expm1(-B));
    cert.additive = 0.0;
    cert.value = cert.multiplier * (empirical_loss + (kl + log_inv_xi) / n);
  } else {
    cert.multiplier = (B + 1.0) / (-std::expm1(-B - 1.0));
    cert.additive = 0.5 * (cert.multiplier - 1.0);
    cert.value = cert.multiplier * (empirical_loss - variance_term + (2.0 * kl + log_inv_xi) / n) +
                 cert.additive;
  }
  return cert;
}

std::string toy_to_json(const DiscreteToyModel& toy) {
  nlohmann::ordered_json j;
  j["x_labels"] = toy.x_labels;
  j["theta_labels"] = toy.theta_labels;
  j["likelihood"] = toy.likelihood;
  j["nu"] = toy.nu;
  j["prior"] = toy.prior;
  return j.dump(2);
}

DiscreteToyModel toy_from_json(const std::string& text) {
  const auto j = nlohmann::ordered_json::parse(text);
  DiscreteToyModel toy;
  toy.x_labels = j.at("x_labels").get<std::vector<std::string>>();
  toy.theta_labels = j.at("theta_labels").get<std::vector<std::string>>();
  toy.likelihood = j.at("likelihood").get<std::vector<std::vector<double>>>();
  toy.nu = j.at("nu").get<std::vector<double>>();
  toy.prior = j.at("prior").get<std::vector<double>>();
  toy.validate();
  return toy;
}

}  // namespace pac2
