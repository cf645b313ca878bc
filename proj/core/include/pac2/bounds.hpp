#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pac2/errors.hpp"

namespace pac2 {

// Finite sample space, finite parameter set, exact data distribution.
// Everything downstream of this type is computed by enumeration.
struct DiscreteToyModel {
  std::vector<std::string> x_labels;
  std::vector<std::string> theta_labels;
  std::vector<std::vector<double>> likelihood;  // [theta][x], rows sum to 1
  std::vector<double> nu;                       // data distribution over X
  std::vector<double> prior;                    // prior weights over Theta

  std::size_t num_outcomes() const { return x_labels.size(); }
  std::size_t num_params() const { return theta_labels.size(); }
  void validate() const;
};

// X={0,1}, Theta={A,B}, p(1|A)=0.2, p(1|B)=0.8, nu=Bernoulli(0.4), uniform prior.
// Misspecified per-theta yet mixture-realizable: the predictive can match nu.
DiscreteToyModel reference_toy();

struct DiscreteMixture {
  std::vector<double> weights;
};

double entropy(const DiscreteToyModel& toy);

// -sum_x nu(x) ln sum_theta rho(theta) p(x|theta). Throws NumericError when the
// predictive puts zero mass on an outcome with nu(x) > 0.
double expected_code_length(const DiscreteToyModel& toy, const DiscreteMixture& rho);

// First-order bound: sum_theta rho(theta) L(theta).
double jensen_bound(const DiscreteToyModel& toy, const DiscreteMixture& rho);

// Second-order bound: jensen minus the normalized variance term, with the
// per-outcome max taken over the support of rho.
double jensen2_bound(const DiscreteToyModel& toy, const DiscreteMixture& rho);

using BoundSelector = std::function<double(const DiscreteToyModel&, const DiscreteMixture&)>;

struct GridMinimum {
  DiscreteMixture rho;
  double value = 0.0;
};

// Brute-force minimizer over a simplex grid. For |Theta| = 2 the coarse scan
// is refined at resolution/100 around the incumbent; |Theta| <= 4 uses a dense
// composition enumeration. Ties break toward the lexicographically smallest rho.
GridMinimum grid_minimize(const BoundSelector& selector, const DiscreteToyModel& toy,
                          double resolution);

// One step of the exact second-order posterior update (log-domain, normalized
// through log-sum-exp): rho' ∝ prior * exp(sum_i ln p + (p^2 - p pbar)/(2 max^2)).
DiscreteMixture exact_pac2_update(const DiscreteToyModel& toy, const std::vector<int>& data,
                                  const DiscreteMixture& rho_t);

struct FixedPointResult {
  DiscreteMixture rho;
  int iterations = 0;
  bool converged = false;
  double final_tv = 0.0;
};

// Iterate exact_pac2_update until the total-variation change drops below tol.
// Non-convergence is reported through `converged`, never silently accepted.
FixedPointResult iterate_pac2_update(const DiscreteToyModel& toy, const std::vector<int>& data,
                                     const DiscreteMixture& init, int max_iterations = 10000,
                                     double tol = 1e-12);

DiscreteMixture bayes_posterior(const DiscreteToyModel& toy, const std::vector<int>& data);

double discrete_kl(const std::vector<double>& a, const std::vector<double>& b);

// Exact empirical bound criteria on the toy (mean log-loss form, KL over n).
double empirical_first_order_objective(const DiscreteToyModel& toy, const std::vector<int>& data,
                                       const DiscreteMixture& rho);
double empirical_second_order_objective(const DiscreteToyModel& toy, const std::vector<int>& data,
                                        const DiscreteMixture& rho);
// The update's own criterion: second-order terms with the mixture in the
// cross-moment held at `ref`. Its exact minimizer is exact_pac2_update(ref).
double coordinate_second_order_objective(const DiscreteToyModel& toy, const std::vector<int>& data,
                                         const DiscreteMixture& rho, const DiscreteMixture& ref);

double total_variation(const DiscreteMixture& a, const DiscreteMixture& b);

// Draw outcome indices from nu.
std::vector<int> sample_outcomes(const DiscreteToyModel& toy, std::size_t n, std::uint64_t seed);

struct BoundCertificate {
  int order = 1;
  double B = 0.0;
  double xi = 0.0;
  int n = 0;
  double empirical_loss = 0.0;
  double variance_term = 0.0;
  double kl = 0.0;
  double multiplier = 0.0;
  double additive = 0.0;  // A, order 2 only
  double value = 0.0;
};

// order 1: [B/(1-e^-B)] (loss + (KL + ln(1/xi))/n)
// order 2: [(B+1)/(1-e^-(B+1))] (loss - variance + (2 KL + ln(1/xi))/n) + A,
//          A = ((B+1)/(1-e^-(B+1)) - 1)/2
BoundCertificate pac_bayes_certificate(int order, double empirical_loss, double variance_term,
                                       double kl, double B, double xi, int n);

std::string toy_to_json(const DiscreteToyModel& toy);
DiscreteToyModel toy_from_json(const std::string& text);

}  // namespace pac2
