// Command-line front end: scenario data generation, training runs, the exact
// gap analysis on discrete toys, and flat-minima perturbation reports.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pac2/bounds.hpp"
#include "pac2/eval.hpp"
#include "pac2/scenario.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct GenerateArgs {
  std::string scenario;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::string out_dir = ".";
};

int run_generate(const GenerateArgs& args) {
  pac2::Scenario scenario;
  scenario.name = pac2::scenario_from_string(args.scenario);
  scenario.seed = args.seed;
  scenario.n_train = args.n_train;
  const pac2::Dataset data = pac2::generate_dataset(scenario);
  fs::create_directories(args.out_dir);
  const std::string base = (fs::path(args.out_dir) / args.scenario).string();
  pac2::write_dataset_csv(data, base + ".csv",
                          scenario.name == pac2::ScenarioName::kGapsToy);
  write_file(base + ".meta.json", pac2::dataset_meta_json(scenario) + "\n");
  std::cout << "wrote " << base << ".csv (" << data.size() << " rows)\n";
  return kExitOk;
}

struct RunArgs {
  std::string scenario;
  std::string method;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::string data_path;
  std::string config_path;
  // flag overrides; negative/zero sentinel means "not set"
  int steps = -1;
  double lr = -1.0;
  long long batch = -1;
  int mc_pairs = -1;
  int ensemble_size = -1;
  double epsilon = -1.0;
};

pac2::RunOverrides overrides_from(const RunArgs& args) {
  pac2::RunOverrides o;
  // config file first, flags override
  if (!args.config_path.empty()) {
    const ordered_json j = ordered_json::parse(read_file(args.config_path));
    if (j.contains("steps")) o.steps = j["steps"].get<int>();
    if (j.contains("learning_rate")) o.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("batch")) o.batch = j["batch"].get<std::size_t>();
    if (j.contains("mc_pairs")) o.mc_pairs = j["mc_pairs"].get<int>();
    if (j.contains("ensemble_size")) o.ensemble_size = j["ensemble_size"].get<int>();
    if (j.contains("epsilon")) o.epsilon = j["epsilon"].get<double>();
    if (j.contains("eval_samples")) o.eval_samples = j["eval_samples"].get<int>();
    if (j.contains("test_size")) o.test_size = j["test_size"].get<std::size_t>();
    if (j.contains("xi")) o.xi = j["xi"].get<double>();
    if (j.contains("clamp_factor")) o.clamp_factor = j["clamp_factor"].get<double>();
  }
  if (args.steps > 0) o.steps = args.steps;
  if (args.lr > 0.0) o.learning_rate = args.lr;
  if (args.batch >= 0) o.batch = static_cast<std::size_t>(args.batch);
  if (args.mc_pairs > 0) o.mc_pairs = args.mc_pairs;
  if (args.ensemble_size > 0) o.ensemble_size = args.ensemble_size;
  if (args.epsilon > 0.0) o.epsilon = args.epsilon;
  return o;
}

int run_run(const RunArgs& args) {
  const pac2::ScenarioName scenario = pac2::scenario_from_string(args.scenario);
  const std::string data_path = args.data_path.empty()
                                    ? (fs::path(args.out_dir) / (args.scenario + ".csv")).string()
                                    : args.data_path;
  if (!fs::exists(data_path))
    throw CLI::ValidationError("dataset not found: " + data_path + " (run `generate` first)");
  const pac2::Dataset train = pac2::read_dataset_csv(data_path);

  const pac2::RunConfig cfg =
      pac2::resolve_run_config(scenario, args.method, args.seed, overrides_from(args));
  pac2::RunReport report = pac2::run_experiment(cfg, train);

  fs::create_directories(args.out_dir);
  const std::string stem =
      args.scenario + "_" + args.method + "_seed" + std::to_string(args.seed);
  report.dataset_path = fs::path(data_path).filename().string();
  report.trace_path = stem + ".trace.csv";
  pac2::write_trace_csv(report.trace, (fs::path(args.out_dir) / report.trace_path).string());
  const std::string report_path = (fs::path(args.out_dir) / (stem + ".report.json")).string();
  write_file(report_path, pac2::run_report_to_json(report) + "\n");

  // band curves along the scenario's input range
  {
    const auto [lo, hi] = pac2::x_range(scenario);
    std::vector<double> grid;
    for (int k = 0; k <= 60; ++k) grid.push_back(lo + (hi - lo) * k / 60.0);
    pac2::Rng band_rng = pac2::Rng(cfg.seed).fork(5);
    const pac2::UncertaintyBands bands = pac2::uncertainty_bands(
        report.posterior, pac2::model_for(scenario), grid, 100, band_rng);
    std::ofstream out(fs::path(args.out_dir) / (stem + ".bands.csv"), std::ios::binary);
    out << "x,mean,epistemic_sd,total_sd\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
      out << format_double(grid[i]) << "," << format_double(bands.mean[i]) << ","
          << format_double(bands.epistemic_sd[i]) << "," << format_double(bands.total_sd[i])
          << "\n";
  }

  std::cout << "method " << args.method << " on " << args.scenario
            << ": test predictive LL = " << report.test_predictive_ll
            << " (stderr " << report.test_predictive_ll_stderr << ")\n"
            << "report: " << report_path << "\n";
  return kExitOk;
}

struct GapsArgs {
  std::string toy_path;
  double resolution = 1e-3;
  std::uint64_t seed = 0;
  std::size_t n_data = 50;
  std::string out_dir = ".";
};

int run_gaps(const GapsArgs& args) {
  const pac2::DiscreteToyModel toy =
      args.toy_path.empty() ? pac2::reference_toy()
                            : pac2::toy_from_json(read_file(args.toy_path));
  if (toy.num_params() != 2)
    throw CLI::ValidationError("gap curves need a 2-parameter toy");

  fs::create_directories(args.out_dir);
  const double H = pac2::entropy(toy);

  // grid curve
  const std::string csv_path = (fs::path(args.out_dir) / "gaps.csv").string();
  {
    std::ofstream out(csv_path, std::ios::binary);
    out << "w,entropy,code_length,jensen2,jensen\n";
    const auto steps = static_cast<std::size_t>(std::llround(1.0 / args.resolution));
    for (std::size_t k = 0; k <= steps; ++k) {
      const double w = static_cast<double>(k) / static_cast<double>(steps);
      pac2::DiscreteMixture rho{{w, 1.0 - w}};
      out << format_double(w) << "," << format_double(H) << ","
          << format_double(pac2::expected_code_length(toy, rho)) << ","
          << format_double(pac2::jensen2_bound(toy, rho)) << ","
          << format_double(pac2::jensen_bound(toy, rho)) << "\n";
    }
  }

  const auto min_L = pac2::grid_minimize(pac2::expected_code_length, toy, args.resolution);
  const auto min_J = pac2::grid_minimize(pac2::jensen_bound, toy, args.resolution);
  const auto min_J2 = pac2::grid_minimize(pac2::jensen2_bound, toy, args.resolution);
  const double L_at_J = pac2::expected_code_length(toy, min_J.rho);
  const double L_at_J2 = pac2::expected_code_length(toy, min_J2.rho);

  const std::vector<int> data = pac2::sample_outcomes(toy, args.n_data, args.seed);
  pac2::DiscreteMixture uniform{std::vector<double>(toy.num_params(),
                                                    1.0 / static_cast<double>(toy.num_params()))};
  const pac2::FixedPointResult fp = pac2::iterate_pac2_update(toy, data, uniform);

  // certificate terms, exact on the toy: B is the worst log-loss in the table
  double B = 0.0;
  for (const auto& row : toy.likelihood)
    for (double p : row) B = std::max(B, -std::log(p));
  const double xi = 0.05;
  const pac2::DiscreteMixture post = pac2::bayes_posterior(toy, data);
  auto mean_loss = [&](const pac2::DiscreteMixture& rho) {
    double acc = 0.0;
    for (std::size_t t = 0; t < toy.num_params(); ++t) {
      if (rho.weights[t] == 0.0) continue;
      double l = 0.0;
      for (int x : data) l -= std::log(toy.likelihood[t][static_cast<std::size_t>(x)]);
      acc += rho.weights[t] * l / static_cast<double>(data.size());
    }
    return acc;
  };
  auto variance_of = [&](const pac2::DiscreteMixture& rho) {
    const double with_var = pac2::empirical_second_order_objective(toy, data, rho);
    const double without =
        mean_loss(rho) + 2.0 * pac2::discrete_kl(rho.weights, toy.prior) /
                             static_cast<double>(data.size());
    return without - with_var;
  };
  const auto cert1 =
      pac2::pac_bayes_certificate(1, mean_loss(post), 0.0,
                                  pac2::discrete_kl(post.weights, toy.prior), B, xi,
                                  static_cast<int>(data.size()));
  const auto cert2 =
      pac2::pac_bayes_certificate(2, mean_loss(fp.rho), variance_of(fp.rho),
                                  pac2::discrete_kl(fp.rho.weights, toy.prior), B, xi,
                                  static_cast<int>(data.size()));

  ordered_json summary;
  summary["entropy"] = H;
  summary["resolution"] = args.resolution;
  summary["minimizers"] = {
      {"code_length", {{"w", min_L.rho.weights[0]}, {"value", min_L.value}}},
      {"jensen",
       {{"w", min_J.rho.weights[0]}, {"value", min_J.value}, {"code_length_at", L_at_J}}},
      {"jensen2",
       {{"w", min_J2.rho.weights[0]}, {"value", min_J2.value}, {"code_length_at", L_at_J2}}},
  };
  summary["gaps"] = {
      {"kl_gap", min_L.value - H},
      {"jensen_gap", L_at_J - min_L.value},
      {"jensen2_gap", L_at_J2 - min_L.value},
  };
  summary["dataset"] = {{"n", data.size()}, {"seed", args.seed}};
  summary["fixed_point"] = {
      {"weights", fp.rho.weights},
      {"iterations", fp.iterations},
      {"converged", fp.converged},
      {"final_tv", fp.final_tv},
      {"empirical_second_order_objective",
       pac2::empirical_second_order_objective(toy, data, fp.rho)},
  };
  auto cert_json = [](const pac2::BoundCertificate& c) {
    return ordered_json{{"order", c.order},       {"B", c.B},
                        {"xi", c.xi},             {"n", c.n},
                        {"empirical_loss", c.empirical_loss},
                        {"variance_term", c.variance_term},
                        {"kl", c.kl},             {"multiplier", c.multiplier},
                        {"additive", c.additive}, {"value", c.value}};
  };
  summary["certificates"] = {{"order1_at_bayes_posterior", cert_json(cert1)},
                             {"order2_at_fixed_point", cert_json(cert2)}};
  const std::string summary_path = (fs::path(args.out_dir) / "gaps_summary.json").string();
  write_file(summary_path, summary.dump(2) + "\n");
  std::cout << "wrote " << csv_path << " and " << summary_path << "\n";
  return kExitOk;
}

struct PerturbArgs {
  std::string report_path;
  int n_perturb = 100;
  double variance = 0.01;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string data_path;
};

int run_perturb(const PerturbArgs& args) {
  const pac2::RunReport report = pac2::run_report_from_json(read_file(args.report_path));
  if (!report.mode_snapshot)
    throw CLI::ValidationError("run report has no mode/mean parameter snapshot");
  const std::string data_path =
      args.data_path.empty()
          ? (fs::path(args.report_path).parent_path() / report.dataset_path).string()
          : args.data_path;
  const pac2::Dataset data = pac2::read_dataset_csv(data_path);
  const pac2::Model model = pac2::model_for(report.config.scenario);
  const pac2::ParamVector mode(pac2::layout_of(model), *report.mode_snapshot);

  pac2::Rng rng(args.seed);
  const pac2::PerturbationReport result =
      pac2::perturbation_sensitivity(model, data, mode, args.n_perturb, args.variance, rng);

  fs::create_directories(args.out_dir);
  const std::string stem = fs::path(args.report_path).stem().string() + ".perturb";
  // histogram over [min, max] with 20 bins
  const std::string hist_path = (fs::path(args.out_dir) / (stem + ".hist.csv")).string();
  {
    const auto [lo_it, hi_it] = std::minmax_element(result.losses.begin(), result.losses.end());
    const double lo = *lo_it, hi = *hi_it;
    const int bins = 20;
    const double width = (hi - lo) > 0 ? (hi - lo) / bins : 1.0;
    std::vector<int> counts(bins, 0);
    for (double l : result.losses) {
      int b = static_cast<int>((l - lo) / width);
      if (b >= bins) b = bins - 1;
      ++counts[b];
    }
    std::ofstream out(hist_path, std::ios::binary);
    out << "bin_low,bin_high,count\n";
    for (int b = 0; b < bins; ++b)
      out << format_double(lo + b * width) << "," << format_double(lo + (b + 1) * width) << ","
          << counts[b] << "\n";
  }
  ordered_json j;
  j["coefficient_percent"] = result.coefficient_percent;
  j["mode_loss"] = result.mode_loss;
  j["mean_loss"] = result.mean_loss;
  j["sd_loss"] = result.sd_loss;
  j["n_perturb"] = args.n_perturb;
  j["variance"] = args.variance;
  j["seed"] = args.seed;
  const std::string json_path = (fs::path(args.out_dir) / (stem + ".json")).string();
  write_file(json_path, j.dump(2) + "\n");
  std::cout << "coefficient: " << result.coefficient_percent << "%\n"
            << "wrote " << hist_path << " and " << json_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predictive posteriors trained by minimizing first- and second-order "
               "PAC-Bayes bounds over Bayesian mixture code lengths"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "Sample a scenario dataset to CSV");
  generate->add_option("--scenario", gen.scenario, "scenario name")->required();
  generate->add_option("--seed", gen.seed, "master seed");
  generate->add_option("--n-train", gen.n_train, "override the scenario's training-set size");
  generate->add_option("--out-dir", gen.out_dir, "output directory");

  RunArgs run;
  CLI::App* runc = app.add_subcommand("run", "Train one method on a scenario and evaluate it");
  runc->add_option("--scenario", run.scenario, "scenario name")->required();
  runc->add_option("--method", run.method,
                   "map | vi | pac2 | pac2h | ens_pac | ens_pac2 | ens_pac2h")
      ->required();
  runc->add_option("--seed", run.seed, "master seed");
  runc->add_option("--steps", run.steps, "optimizer steps");
  runc->add_option("--lr", run.lr, "learning rate");
  runc->add_option("--batch", run.batch, "minibatch size (0 = full batch)");
  runc->add_option("--mc-pairs", run.mc_pairs, "Monte-Carlo draws/pairs per step");
  runc->add_option("--ensemble-size", run.ensemble_size, "particles in ensemble methods");
  runc->add_option("--epsilon", run.epsilon, "log-domain stabilizer");
  runc->add_option("--config", run.config_path, "JSON config file (flags override it)");
  runc->add_option("--data", run.data_path, "dataset CSV (default: <out-dir>/<scenario>.csv)");
  runc->add_option("--out-dir", run.out_dir, "output directory");

  GapsArgs gaps;
  CLI::App* gapsc = app.add_subcommand("gaps", "Exact gap analysis on a discrete toy");
  gapsc->add_option("--toy", gaps.toy_path, "toy JSON file (default: built-in reference toy)");
  gapsc->add_option("--resolution", gaps.resolution, "grid resolution");
  gapsc->add_option("--seed", gaps.seed, "seed for the observed draws");
  gapsc->add_option("--n", gaps.n_data, "number of observed draws");
  gapsc->add_option("--out-dir", gaps.out_dir, "output directory");

  PerturbArgs pert;
  CLI::App* pertc = app.add_subcommand("perturb", "Flat-minima sensitivity of a trained run");
  pertc->add_option("--report", pert.report_path, "run report JSON")->required();
  pertc->add_option("--n-perturb", pert.n_perturb, "number of perturbations");
  pertc->add_option("--variance", pert.variance, "perturbation variance");
  pertc->add_option("--seed", pert.seed, "seed");
  pertc->add_option("--data", pert.data_path, "dataset CSV override");
  pertc->add_option("--out-dir", pert.out_dir, "output directory");

  try {
    app.parse(argc, argv);
    if (generate->parsed()) return run_generate(gen);
    if (runc->parsed()) return run_run(run);
    if (gapsc->parsed()) return run_gaps(gaps);
    if (pertc->parsed()) return run_perturb(pert);
    return kExitUsage;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message; exit code pinned to the usage value
    return kExitUsage;
  } catch (const pac2::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
