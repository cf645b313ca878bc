#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "pac2/bounds.hpp"
#include "pac2/dataset.hpp"
#include "pac2/eval.hpp"
#include "pac2/models.hpp"
#include "pac2/posteriors.hpp"
#include "pac2/trainer.hpp"

namespace pac2 {

enum class ScenarioName {
  kLinearPerfect,
  kLinearMisspec,
  kSinPerfect,
  kSinMisspec,
  kMultimodal,
  kFlatMinima,
  kGapsToy,
};

std::string to_string(ScenarioName name);
ScenarioName scenario_from_string(const std::string& name);

struct Scenario {
  ScenarioName name = ScenarioName::kLinearPerfect;
  std::size_t n_train = 0;  // 0: scenario default
  std::uint64_t seed = 0;
};

std::size_t default_n_train(ScenarioName name);

// Draws the training set for a scenario; fully determined by (name, n, seed).
Dataset generate_dataset(const Scenario& scenario);
// Fresh draw from the same generative distribution (test sets).
Dataset generate_test_set(ScenarioName name, std::size_t n, Rng& rng);

// Probabilistic model fit in a scenario (linear for the linear rows, the
// 20-unit softplus network elsewhere; noise variance 0.01 in the flat-minima
// row).
Model model_for(ScenarioName name);

// Input range of the scenario's generative distribution.
std::pair<double, double> x_range(ScenarioName name);

void write_dataset_csv(const Dataset& data, const std::string& path, bool x_only = false);
Dataset read_dataset_csv(const std::string& path);
std::string dataset_meta_json(const Scenario& scenario);

// ---------------------------------------------------------------------------

struct RunOverrides {
  std::optional<int> steps;
  std::optional<double> learning_rate;
  std::optional<std::size_t> batch;
  std::optional<int> mc_pairs;
  std::optional<int> ensemble_size;
  std::optional<double> epsilon;
  std::optional<int> eval_samples;
  std::optional<std::size_t> test_size;
  std::optional<double> xi;
  std::optional<double> clamp_factor;
};

struct RunConfig {
  ScenarioName scenario = ScenarioName::kLinearPerfect;
  std::string method;  // map | vi | pac2 | pac2h | ens_pac | ens_pac2 | ens_pac2h
  std::uint64_t seed = 1;
  int steps = 2000;
  double learning_rate = 0.01;
  std::size_t batch = 0;  // 0: full batch
  int mc_pairs = 1;
  int ensemble_size = 3;
  double epsilon = 0.1;
  int eval_samples = 300;     // posterior draws per test point
  std::size_t test_size = 10000;
  double xi = 0.05;           // certificate confidence parameter
  double clamp_factor = 1.5;  // B = factor * max train log-loss
};

RunConfig resolve_run_config(ScenarioName scenario, const std::string& method, std::uint64_t seed,
                             const RunOverrides& overrides = {});

struct RunReport {
  RunConfig config;
  Posterior posterior;
  std::optional<std::vector<double>> mode_snapshot;  // MAP point / posterior mean
  double train_objective_final = 0.0;
  double train_objective_smoothed = 0.0;  // window-100 trailing mean at the last step
  double test_predictive_ll = 0.0;
  double test_predictive_ll_stderr = 0.0;
  double vhat_sum = 0.0;        // variance credit with the method's own coefficient
  double vhat_per_datum = 0.0;
  double vhat_h_sum = 0.0;      // tight-h version, comparable across methods
  BoundCertificate certificate;
  std::string dataset_path;
  std::string trace_path;
  std::vector<double> trace;  // per-step objective, exported separately as CSV
};

// Train + evaluate one method on one dataset. Deterministic per config.
RunReport run_experiment(const RunConfig& config, const Dataset& train);

std::string run_report_to_json(const RunReport& report);
RunReport run_report_from_json(const std::string& text);

void write_trace_csv(const std::vector<double>& trace, const std::string& path);

}  // namespace pac2
