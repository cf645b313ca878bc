#include <benchmark/benchmark.h>

#include <vector>

#include "pac2/graph.hpp"
#include "pac2/models.hpp"
#include "pac2/rng.hpp"

namespace {

// One forward+backward pass of the network log-likelihood over a batch,
// reusing the tape storage as the trainer does.
void BM_mlp_log_likelihood_grad(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const pac2::Model model = pac2::MlpRegressionModel{20, 1.0};
  pac2::Rng rng(1);
  std::vector<double> theta(pac2::layout_of(model).total_size());
  for (double& v : theta) v = 0.3 * rng.normal();
  std::vector<double> xs(batch), ys(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    xs[i] = rng.uniform(-4, 4);
    ys[i] = rng.normal();
  }
  pac2::Graph g;
  std::vector<pac2::Value> leaves;
  for (auto _ : state) {
    g.clear();
    leaves.clear();
    for (double v : theta) leaves.push_back(g.leaf(v));
    pac2::Value total = g.constant(0.0);
    for (std::size_t i = 0; i < batch; ++i)
      total = total - pac2::log_likelihood(model, g, leaves, xs[i], ys[i]);
    g.backward(total);
    benchmark::DoNotOptimize(g.leaf_gradients());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}

void BM_log_sum_exp_node(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  pac2::Rng rng(2);
  std::vector<double> inputs(width);
  for (double& v : inputs) v = rng.uniform(-100.0, 100.0);
  pac2::Graph g;
  for (auto _ : state) {
    g.clear();
    std::vector<pac2::Value> xs;
    xs.reserve(width);
    for (double v : inputs) xs.push_back(g.leaf(v));
    const pac2::Value root = g.log_sum_exp(xs);
    g.backward(root);
    benchmark::DoNotOptimize(g.adjoint(xs[0]));
  }
}

}  // namespace

BENCHMARK(BM_mlp_log_likelihood_grad)->Arg(25)->Arg(250);
BENCHMARK(BM_log_sum_exp_node)->Arg(8)->Arg(64);
