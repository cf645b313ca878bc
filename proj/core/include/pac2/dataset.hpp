#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pac2 {

// Paired scalar observations.
struct Dataset {
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const { return x.size(); }
  bool empty() const { return x.empty(); }

  void push_back(double xi, double yi) {
    x.push_back(xi);
    y.push_back(yi);
  }

  void validate() const {
    if (x.size() != y.size()) throw std::invalid_argument("dataset x/y length mismatch");
  }
};

}  // namespace pac2
