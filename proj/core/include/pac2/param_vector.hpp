#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pac2/errors.hpp"

namespace pac2 {

// Named slice of a flat parameter vector, e.g. {"w1", 20}.
struct SliceSpec {
  std::string name;
  std::size_t size = 0;

  bool operator==(const SliceSpec&) const = default;
};

class ParamLayout {
 public:
  ParamLayout() = default;
  ParamLayout(std::initializer_list<SliceSpec> slices) : slices_(slices) { recompute(); }
  explicit ParamLayout(std::vector<SliceSpec> slices) : slices_(std::move(slices)) { recompute(); }

  std::size_t total_size() const { return total_; }
  const std::vector<SliceSpec>& slices() const { return slices_; }

  std::size_t offset_of(const std::string& name) const {
    std::size_t off = 0;
    for (const auto& s : slices_) {
      if (s.name == name) return off;
      off += s.size;
    }
    throw ShapeError("no slice named '" + name + "' in layout");
  }

  std::size_t size_of(const std::string& name) const {
    for (const auto& s : slices_) {
      if (s.name == name) return s.size;
    }
    throw ShapeError("no slice named '" + name + "' in layout");
  }

  bool operator==(const ParamLayout&) const = default;

 private:
  void recompute() {
    total_ = 0;
    for (const auto& s : slices_) total_ += s.size;
  }

  std::vector<SliceSpec> slices_;
  std::size_t total_ = 0;
};

// Flat real parameter vector with a named layout. All entries finite.
struct ParamVector {
  ParamLayout layout;
  std::vector<double> values;

  ParamVector() = default;
  ParamVector(ParamLayout l, std::vector<double> v) : layout(std::move(l)), values(std::move(v)) {
    validate();
  }

  static ParamVector zeros(ParamLayout l) {
    std::vector<double> v(l.total_size(), 0.0);
    return ParamVector(std::move(l), std::move(v));
  }

  std::size_t size() const { return values.size(); }

  std::span<const double> slice(const std::string& name) const {
    return std::span<const double>(values).subspan(layout.offset_of(name), layout.size_of(name));
  }
  std::span<double> slice(const std::string& name) {
    return std::span<double>(values).subspan(layout.offset_of(name), layout.size_of(name));
  }

  void validate() const {
    if (values.size() != layout.total_size())
      throw ShapeError("parameter vector length " + std::to_string(values.size()) +
                       " does not match layout size " + std::to_string(layout.total_size()));
    for (double v : values)
      if (!std::isfinite(v)) throw NumericError("non-finite parameter entry");
  }
};

}  // namespace pac2
