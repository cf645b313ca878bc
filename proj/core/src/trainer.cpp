#include "pac2/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace pac2 {

namespace {

class AdamState {
 public:
  AdamState(std::size_t dim, const OptimizerConfig& cfg) : cfg_(cfg), m_(dim, 0.0), v_(dim, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    ++t_;
    if (cfg_.algorithm == OptAlgorithm::kSgd) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg_.learning_rate * grad[i];
      return;
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      params[i] -= cfg_.learning_rate * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
    }
  }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_, v_;
  int t_ = 0;
};

// partial Fisher-Yates over an index pool, without replacement
void draw_batch(std::vector<std::size_t>& pool, std::size_t batch_size, Rng& rng,
                std::vector<std::size_t>& out) {
  out.clear();
  for (std::size_t k = 0; k < batch_size; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(pool.size() - k));
    std::swap(pool[k], pool[j]);
    out.push_back(pool[k]);
  }
}

}  // namespace

TrainResult train(const ObjectiveConfig& objective, const Model& model, const Posterior& init,
                  const Dataset& data, const OptimizerConfig& opt, const GaussianPrior& prior) {
  data.validate();
  if (opt.steps < 1) throw std::domain_error("step count must be at least 1");
  if (objective.minibatch > data.size())
    throw std::domain_error("minibatch size exceeds dataset size");

  std::vector<double> lambda = pack_lambda(init);
  AdamState state(lambda.size(), opt);
  Rng rng(opt.seed);

  TrainTrace trace;
  trace.objective.reserve(static_cast<std::size_t>(opt.steps));

  const bool use_minibatch = objective.minibatch > 0 && objective.minibatch < data.size();
  std::vector<std::size_t> pool = full_batch(data.size());
  std::vector<std::size_t> batch;
  if (!use_minibatch) batch = pool;

  Graph g;
  std::vector<Value> leaves;
  auto started = std::chrono::steady_clock::now();

  for (int step = 0; step < opt.steps; ++step) {
    if (use_minibatch) draw_batch(pool, objective.minibatch, rng, batch);
    g.clear();
    leaves.clear();
    for (double p : lambda) leaves.push_back(g.leaf(p));
    try {
      const Value root = build_objective(g, objective, init, leaves, model, data, batch, prior, rng);
      g.backward(root);
      trace.objective.push_back(root.value());
    } catch (const NumericError& err) {
      throw TrainError(err.what(), step, lambda);
    }
    std::vector<double> grad = g.leaf_gradients();
    state.step(lambda, grad);

    if (opt.snapshot_interval > 0 && (step + 1) % opt.snapshot_interval == 0)
      trace.snapshots.emplace_back(step + 1, lambda);
    if ((step + 1) % 100 == 0) {
      const auto now = std::chrono::steady_clock::now();
      trace.wall_ms_per_100.push_back(
          std::chrono::duration<double, std::milli>(now - started).count());
      started = now;
    }
  }
  trace.snapshots.emplace_back(opt.steps, lambda);

  TrainResult result{unpack_lambda(init, lambda), std::move(lambda), std::move(trace)};
  return result;
}

MinimizeResult minimize(const ObjectiveBuilder& builder, std::vector<double> init,
                        const OptimizerConfig& opt) {
  if (opt.steps < 1) throw std::domain_error("step count must be at least 1");
  AdamState state(init.size(), opt);
  TrainTrace trace;
  Graph g;
  std::vector<Value> leaves;
  for (int step = 0; step < opt.steps; ++step) {
    g.clear();
    leaves.clear();
    for (double p : init) leaves.push_back(g.leaf(p));
    try {
      const Value root = builder(g, leaves);
      g.backward(root);
      trace.objective.push_back(root.value());
    } catch (const NumericError& err) {
      throw TrainError(err.what(), step, init);
    }
    std::vector<double> grad = g.leaf_gradients();
    state.step(init, grad);
  }
  return MinimizeResult{std::move(init), std::move(trace)};
}

std::vector<double> moving_average(const std::vector<double>& series, int window) {
  if (window < 1) throw std::domain_error("window must be at least 1");
  std::vector<double> out(series.size());
  double running = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    running += series[i];
    if (i >= static_cast<std::size_t>(window)) running -= series[i - window];
    const auto denom = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    out[i] = running / static_cast<double>(denom);
  }
  return out;
}

}  // namespace pac2
