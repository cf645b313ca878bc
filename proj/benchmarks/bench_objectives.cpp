#include <benchmark/benchmark.h>

#include "pac2/objectives.hpp"
#include "pac2/trainer.hpp"

namespace {

pac2::Dataset synth_data(std::size_t n) {
  pac2::Rng rng(7);
  pac2::Dataset d;
  for (std::size_t i = 0; i < n; ++i) d.push_back(rng.uniform(-4, 4), 5.0 * rng.normal());
  return d;
}

// One optimizer step (build + backward + update) of each training criterion
// on the 20-unit network.
void BM_train_step(benchmark::State& state, pac2::Variant variant) {
  const pac2::Model model = pac2::MlpRegressionModel{20, 1.0};
  const pac2::Dataset data = synth_data(250);
  pac2::Rng init(3);
  const pac2::ParamLayout layout = pac2::layout_of(model);
  pac2::Posterior proto =
      variant == pac2::Variant::kElbo || variant == pac2::Variant::kPac2H
          ? pac2::init_mean_field(layout, init)
          : pac2::init_particle_ensemble(layout, 3, init);
  pac2::ObjectiveConfig obj;
  obj.variant = variant;
  pac2::OptimizerConfig opt;
  opt.steps = 1;
  opt.seed = 11;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pac2::train(obj, model, proto, data, opt, pac2::GaussianPrior{1.0}));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}

}  // namespace

BENCHMARK_CAPTURE(BM_train_step, elbo, pac2::Variant::kElbo);
BENCHMARK_CAPTURE(BM_train_step, pac2_h, pac2::Variant::kPac2H);
BENCHMARK_CAPTURE(BM_train_step, ensemble_pac2_h, pac2::Variant::kEnsemblePac2H);
