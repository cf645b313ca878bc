// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 1-7 and 14 are exact or oracle-checked properties;
// criteria 8-13 train the experiment scenarios at pinned configurations.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pac2/bounds.hpp"
#include "pac2/eval.hpp"
#include "pac2/objectives.hpp"
#include "pac2/scenario.hpp"
#include "pac2/trainer.hpp"
#include "support.hpp"

using namespace pac2;
using namespace pac2::testing;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
  std::printf("[%s] criterion %2d: %s (%s) [%.1fs]\n", pass ? "PASS" : "FAIL", number,
              name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void run_criterion(int number, const std::string& name,
                   const std::function<bool(std::string&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool pass = false;
  try {
    pass = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(number, name, pass, detail, seconds);
}

std::vector<DiscreteToyModel> randomized_toys() {
  Rng rng(2024);
  std::vector<DiscreteToyModel> toys;
  for (int i = 0; i < 5; ++i) toys.push_back(random_misspecified_toy(rng));
  return toys;
}

// --- criteria 1-5: exact discrete-toy properties ---------------------------

bool criterion1(std::string& detail) {
  std::vector<DiscreteToyModel> toys = randomized_toys();
  toys.insert(toys.begin(), reference_toy());
  double worst = 0.0;
  for (const DiscreteToyModel& toy : toys) {
    const double H = entropy(toy);
    for (int k = 0; k <= 1000; ++k) {
      const DiscreteMixture rho{{k / 1000.0, 1.0 - k / 1000.0}};
      const double L = expected_code_length(toy, rho);
      const double J2 = jensen2_bound(toy, rho);
      const double J = jensen_bound(toy, rho);
      worst = std::max({worst, H - L, L - J2, J2 - J});
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "worst chain violation %.2e (tol 1e-10)", worst);
  detail = buf;
  return worst <= 1e-10;
}

bool criterion2(std::string& detail) {
  std::vector<DiscreteToyModel> toys = randomized_toys();
  double strict_best = 0.0;
  bool ordered = true;
  for (std::size_t i = 0; i < toys.size() + 1; ++i) {
    const DiscreteToyModel toy = i == 0 ? reference_toy() : toys[i - 1];
    const GridMinimum mj = grid_minimize(jensen_bound, toy, 1e-3);
    const GridMinimum mj2 = grid_minimize(jensen2_bound, toy, 1e-3);
    const double gap = expected_code_length(toy, mj.rho) - expected_code_length(toy, mj2.rho);
    ordered = ordered && gap >= -1e-12;
    if (i > 0) strict_best = std::max(strict_best, gap);
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "ordering holds on all toys; best randomized strict gap %.3e",
                strict_best);
  detail = buf;
  return ordered && strict_best >= 1e-4;
}

bool criterion3(std::string& detail) {
  std::vector<DiscreteToyModel> toys;
  DiscreteToyModel ref = reference_toy();
  ref.nu = ref.likelihood[1];
  toys.push_back(ref);
  Rng rng(77);
  toys.push_back(random_perfect_toy(rng));
  toys.push_back(random_perfect_toy(rng));
  double worst = 0.0;
  for (const DiscreteToyModel& toy : toys) {
    const double H = entropy(toy);
    for (const BoundSelector& sel :
         {BoundSelector(expected_code_length), BoundSelector(jensen_bound),
          BoundSelector(jensen2_bound)}) {
      const GridMinimum m = grid_minimize(sel, toy, 1e-3);
      worst = std::max(worst, std::abs(expected_code_length(toy, m.rho) - H));
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "worst |L - H| at any minimizer %.2e (tol 2e-3)", worst);
  detail = buf;
  return worst <= 2e-3;
}

bool criterion4(std::string& detail) {
  const DiscreteToyModel toy = reference_toy();
  const std::vector<int> data = canonical_toy_draws();
  const DiscreteMixture post = bayes_posterior(toy, data);
  auto emp1 = [&](const DiscreteToyModel& t, const DiscreteMixture& rho) {
    return empirical_first_order_objective(t, data, rho);
  };
  const GridMinimum m = grid_minimize(emp1, toy, 1e-3);
  const double at_post = empirical_first_order_objective(toy, data, post);
  const double value_gap = at_post - m.value;
  const double tv = total_variation(post, m.rho);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "objective gap %.2e, minimizer TV %.2e", value_gap, tv);
  detail = buf;
  return std::abs(value_gap) <= 1e-6 && tv <= 1e-3;
}

bool criterion5(std::string& detail) {
  const DiscreteToyModel toy = reference_toy();
  const std::vector<int> data = canonical_toy_draws();
  const DiscreteMixture uniform{{0.5, 0.5}};
  const FixedPointResult fp = iterate_pac2_update(toy, data, uniform);
  if (!fp.converged) {
    detail = "iteration did not converge";
    return false;
  }
  // fixed-point consistency: the point the update returns must minimize the
  // update's own (coordinate) second-order criterion, checked against a
  // brute-force grid oracle
  auto coord = [&](const DiscreteToyModel& t, const DiscreteMixture& rho) {
    return coordinate_second_order_objective(t, data, rho, fp.rho);
  };
  const GridMinimum m = grid_minimize(coord, toy, 1e-3);
  const double at_fp = coordinate_second_order_objective(toy, data, fp.rho, fp.rho);
  const double gap = at_fp - m.value;
  // informational: the fixed point does not reach the joint minimum of the
  // full empirical second-order criterion (the update is a coordinate step,
  // not a joint minimization); report the discrepancy alongside
  auto emp2 = [&](const DiscreteToyModel& t, const DiscreteMixture& rho) {
    return empirical_second_order_objective(t, data, rho);
  };
  const GridMinimum joint = grid_minimize(emp2, toy, 1e-3);
  const double joint_diff = empirical_second_order_objective(toy, data, fp.rho) - joint.value;
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "converged in %d iters (tv %.1e); coordinate-objective gap %.2e; "
                "joint-objective excess %.2e (informational)",
                fp.iterations, fp.final_tv, gap, joint_diff);
  detail = buf;
  return fp.iterations <= 10000 && std::abs(gap) <= 1e-3;
}

// --- criterion 6: gradient correctness --------------------------------------

bool criterion6(std::string& detail) {
  const Model model = MlpRegressionModel{3, 1.0};
  Rng data_rng(17);
  const Dataset data = small_dataset(data_rng, 8);
  const ParamLayout layout = layout_of(model);
  Rng proto_rng(5);
  const Posterior dirac = init_dirac(layout, proto_rng);
  const Posterior mf = init_mean_field(layout, proto_rng);
  const Posterior ens = init_particle_ensemble(layout, 3, proto_rng);
  double worst = 0.0;
  const struct {
    Variant variant;
    const Posterior* proto;
  } cases[] = {
      {Variant::kMap, &dirac},
      {Variant::kElbo, &mf},
      {Variant::kPac2Simple, &mf},
      {Variant::kPac2H, &mf},
      {Variant::kEnsemblePac, &ens},
      {Variant::kEnsemblePac2Simple, &ens},
      {Variant::kEnsemblePac2H, &ens},
  };
  for (const auto& c : cases) {
    const double err = stop_gradient_fd_check(c.variant, *c.proto, model, data, 0.1, 20,
                                              1000 + static_cast<std::uint64_t>(c.variant));
    worst = std::max(worst, err);
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "worst relative gradient error %.2e (tol 1e-5)", worst);
  detail = buf;
  return worst <= 1e-5;
}

// --- criterion 7: h tightness ------------------------------------------------

bool criterion7(std::string& detail) {
  Rng rng(3);
  double min_h = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10000; ++i) {
    const double alpha = rng.uniform(-20.0, -1e-6);
    min_h = std::min(min_h, h_of_alpha(alpha));
  }
  const double limit_err = std::abs(h_of_alpha(-1e-4) - 0.5);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "min h %.6f (floor 0.5), |h(-1e-4) - 1/2| = %.2e", min_h,
                limit_err);
  detail = buf;
  return min_h >= 0.5 && limit_err <= 1e-3;
}

// --- criteria 8-13: trained scenarios ---------------------------------------

struct ScenarioRuns {
  std::map<std::string, std::vector<RunReport>> by_method;

  double median_ll(const std::string& method) const {
    std::vector<double> v;
    for (const RunReport& r : by_method.at(method)) v.push_back(r.test_predictive_ll);
    return median(v);
  }
};

ScenarioRuns run_methods(ScenarioName scenario, const std::vector<std::string>& methods,
                         const std::vector<std::uint64_t>& seeds, std::size_t n_train,
                         const RunOverrides& overrides) {
  ScenarioRuns out;
  for (std::uint64_t seed : seeds) {
    Scenario sc;
    sc.name = scenario;
    sc.n_train = n_train;
    sc.seed = seed;
    const Dataset train = generate_dataset(sc);
    for (const std::string& method : methods) {
      const RunConfig cfg = resolve_run_config(scenario, method, seed, overrides);
      out.by_method[method].push_back(run_experiment(cfg, train));
    }
  }
  return out;
}

bool criterion8(std::string& detail) {
  const ScenarioRuns runs = run_methods(ScenarioName::kLinearPerfect,
                                        {"map", "vi", "pac2", "pac2h"}, {1, 2, 3}, 0, {});
  const std::vector<std::string> methods{"map", "vi", "pac2", "pac2h"};
  bool in_band = true;
  double lo = 0.0, hi = -10.0;
  for (const std::string& m : methods) {
    const double ll = runs.median_ll(m);
    in_band = in_band && ll >= -1.55 && ll <= -1.35;
    lo = std::min(lo, ll);
    hi = std::max(hi, ll);
  }
  const double spread = hi - lo;
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "median LL: map %.3f, vi %.3f, pac2 %.3f, pac2h %.3f; spread %.3f (band "
                "[-1.55,-1.35], pairwise 0.1)",
                runs.median_ll("map"), runs.median_ll("vi"), runs.median_ll("pac2"),
                runs.median_ll("pac2h"), spread);
  detail = buf;
  return in_band && spread <= 0.1;
}

bool criterion9(std::string& detail) {
  const ScenarioRuns runs = run_methods(ScenarioName::kLinearMisspec,
                                        {"map", "vi", "pac2", "pac2h"}, {1, 2, 3}, 0, {});
  const double map_ll = runs.median_ll("map");
  const double vi = runs.median_ll("vi");
  const double pac2 = runs.median_ll("pac2");
  const double pac2h = runs.median_ll("pac2h");
  char buf[160];
  std::snprintf(buf, sizeof(buf), "median LL: map %.2f, vi %.2f, pac2 %.2f, pac2h %.2f", map_ll,
                vi, pac2, pac2h);
  detail = buf;
  return pac2h >= pac2 + 1.0 && pac2 >= vi + 2.0 && vi >= map_ll - 0.5;
}

bool criterion10(std::string& detail) {
  RunOverrides o;
  o.batch = 250;
  const ScenarioRuns runs =
      run_methods(ScenarioName::kSinMisspec, {"vi", "pac2h"}, {1, 2, 3}, 2000, o);
  const double vi = runs.median_ll("vi");
  const double pac2h = runs.median_ll("pac2h");
  char buf[96];
  std::snprintf(buf, sizeof(buf), "median LL: vi %.2f, pac2h %.2f (margin 8)", vi, pac2h);
  detail = buf;
  return pac2h >= vi + 8.0;
}

bool criterion11(std::string& detail) {
  RunOverrides o;
  o.batch = 250;
  const ScenarioRuns runs = run_methods(ScenarioName::kSinMisspec,
                                        {"ens_pac", "ens_pac2", "ens_pac2h"}, {1, 2, 3}, 2000, o);
  const double pac = runs.median_ll("ens_pac");
  const double pac2 = runs.median_ll("ens_pac2");
  const double pac2h = runs.median_ll("ens_pac2h");
  char buf[128];
  std::snprintf(buf, sizeof(buf), "median LL: ens_pac %.2f, ens_pac2 %.2f, ens_pac2h %.2f", pac,
                pac2, pac2h);
  detail = buf;
  return pac2h >= pac2 + 5.0 && pac2 >= pac + 10.0;
}

bool criterion12(std::string& detail) {
  RunOverrides o;
  o.batch = 250;
  const ScenarioRuns runs =
      run_methods(ScenarioName::kMultimodal, {"vi", "ens_pac2h"}, {1, 2, 3}, 2000, o);
  const double vi = runs.median_ll("vi");
  const double pac2h = runs.median_ll("ens_pac2h");
  char buf[96];
  std::snprintf(buf, sizeof(buf), "median LL: vi %.2f, ens_pac2h %.2f (margin 5)", vi, pac2h);
  detail = buf;
  return pac2h >= vi + 5.0;
}

bool criterion13(std::string& detail) {
  // single pinned seed; the flat-minima scenario runs at the larger default
  // step size for this row
  const std::uint64_t seed = 4;
  Scenario sc;
  sc.name = ScenarioName::kFlatMinima;
  sc.seed = seed;
  const Dataset train = generate_dataset(sc);
  const Model model = model_for(sc.name);
  std::map<std::string, RunReport> reports;
  for (const std::string method : {"map", "vi", "pac2", "pac2h"}) {
    const RunConfig cfg = resolve_run_config(sc.name, method, seed, {});
    reports.emplace(method, run_experiment(cfg, train));
  }
  std::map<std::string, double> coeff;
  for (const auto& [method, rep] : reports) {
    Rng rng(0);
    const ParamVector mode(layout_of(model), *rep.mode_snapshot);
    coeff[method] =
        perturbation_sensitivity(model, train, mode, 100, 0.01, rng).coefficient_percent;
  }
  const double vhat_vi = reports.at("vi").vhat_h_sum;
  const double vhat_pac2h = reports.at("pac2h").vhat_h_sum;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "coeff%%: map %.1f, vi %.1f, pac2 %.1f, pac2h %.1f; vhat_h: vi %.2f, pac2h %.2f",
                coeff["map"], coeff["vi"], coeff["pac2"], coeff["pac2h"], vhat_vi, vhat_pac2h);
  detail = buf;
  return coeff["pac2"] < coeff["map"] / 5.0 && coeff["pac2h"] < coeff["map"] / 5.0 &&
         vhat_pac2h > vhat_vi;
}

// --- criterion 14: degenerate variance exactness -----------------------------

bool criterion14(std::string& detail) {
  const Model model = GaussianLinearModel{1.0};
  const ParamLayout layout = layout_of(model);
  Rng data_rng(8);
  const Dataset data = small_dataset(data_rng, 15);
  const GaussianPrior prior{1.0};
  Rng rng(1);

  bool ok = true;
  // point posterior: the pairwise credit is exactly zero for both coefficients
  const DiracPosterior dirac{ParamVector(layout, {0.7, -0.4})};
  ok = ok && vhat_at_solution(dirac, model, data, true, 50, 0.1, rng).sum == 0.0;
  ok = ok && vhat_at_solution(dirac, model, data, false, 50, 0.1, rng).sum == 0.0;

  // coincident particles: the ensemble diversity is exactly zero
  ParticleEnsemble same;
  same.particles = {ParamVector(layout, {0.7, -0.4}), ParamVector(layout, {0.7, -0.4}),
                    ParamVector(layout, {0.7, -0.4})};
  ok = ok && vhat_at_solution(same, model, data, true, 1, 0.1, rng).sum == 0.0;
  ok = ok && vhat_at_solution(same, model, data, false, 1, 0.1, rng).sum == 0.0;

  // and the second-order ensemble criteria collapse onto the first-order one
  for (Variant v : {Variant::kEnsemblePac2Simple, Variant::kEnsemblePac2H}) {
    ObjectiveConfig second, first;
    second.variant = v;
    first.variant = Variant::kEnsemblePac;
    const double a = eval_objective(second, same, pack_lambda(same), model, data, prior, Rng(0));
    const double b = eval_objective(first, same, pack_lambda(same), model, data, prior, Rng(0));
    ok = ok && a == b;
  }
  detail = ok ? "all degenerate variance/diversity terms exactly zero"
              : "a degenerate term was nonzero";
  return ok;
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  run_criterion(1, "gaps chain on reference and randomized toys", criterion1);
  run_criterion(2, "second-order minimizer dominates the first-order one", criterion2);
  run_criterion(3, "perfect specification collapses all minimizers", criterion3);
  run_criterion(4, "Bayes posterior minimizes the empirical first-order criterion", criterion4);
  run_criterion(5, "exact update converges to a consistent fixed point", criterion5);
  run_criterion(6, "analytic gradients match the frozen finite-difference oracle", criterion6);
  run_criterion(7, "variance coefficient stays above one half", criterion7);
  run_criterion(8, "perfect-specification parity on the linear scenario", criterion8);
  run_criterion(9, "misspecification ordering on the linear scenario", criterion9);
  run_criterion(10, "sinusoidal misspecification margin", criterion10);
  run_criterion(11, "ensemble diversity ordering", criterion11);
  run_criterion(12, "multimodal ensemble margin", criterion12);
  run_criterion(13, "flat-minima sensitivity and variance ordering", criterion13);
  run_criterion(14, "degenerate posteriors carry zero variance terms", criterion14);

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all 14 criteria passed\n");
  return 0;
}
