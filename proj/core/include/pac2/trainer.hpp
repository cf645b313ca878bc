#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pac2/dataset.hpp"
#include "pac2/objectives.hpp"
#include "pac2/posteriors.hpp"

namespace pac2 {

enum class OptAlgorithm { kAdam, kSgd };

struct OptimizerConfig {
  OptAlgorithm algorithm = OptAlgorithm::kAdam;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int steps = 1000;
  std::uint64_t seed = 0;
  int snapshot_interval = 0;  // 0: keep the final snapshot only
};

struct TrainTrace {
  std::vector<double> objective;                            // one entry per step
  std::vector<std::pair<int, std::vector<double>>> snapshots;
  std::vector<double> wall_ms_per_100;                      // not serialized
};

struct TrainResult {
  Posterior posterior;
  std::vector<double> lambda;
  TrainTrace trace;
};

// Gradient descent over the variational parameters of `init`. Deterministic
// given the master seed; per step the minibatch indices are drawn first, then
// the reparameterization noise.
TrainResult train(const ObjectiveConfig& objective, const Model& model, const Posterior& init,
                  const Dataset& data, const OptimizerConfig& opt, const GaussianPrior& prior);

// Optimize an arbitrary scalar builder over a flat parameter vector.
struct MinimizeResult {
  std::vector<double> params;
  TrainTrace trace;
};
MinimizeResult minimize(const ObjectiveBuilder& builder, std::vector<double> init,
                        const OptimizerConfig& opt);

// Trailing mean with warm-up partial windows; length preserved.
std::vector<double> moving_average(const std::vector<double>& series, int window);

}  // namespace pac2
