#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pac2/errors.hpp"
#include "pac2/param_vector.hpp"

namespace pac2 {

enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kSoftplus,
  kTanh,
  kSquare,
  kMax,
  kLogSumExp,
  kStopGradient,
};

const char* op_name(Op op);

class Graph;

// Handle to a node on the tape. Only valid for the graph that created it.
class Value {
 public:
  Value() = default;

  double value() const;
  Graph* graph() const { return graph_; }
  std::uint32_t index() const { return index_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Value(Graph* g, std::uint32_t i) : graph_(g), index_(i) {}

  Graph* graph_ = nullptr;
  std::uint32_t index_ = 0;
};

// Scalar reverse-mode tape. Nodes are appended in topological order with
// their local partials cached at construction; backward() is a single
// reverse sweep. One graph instance per thread of execution.
class Graph {
 public:
  Value leaf(double v);
  Value constant(double v);

  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value div(Value a, Value b);
  Value neg(Value a);
  Value exp(Value a);
  Value log(Value a);
  Value softplus(Value a);
  Value tanh(Value a);
  Value square(Value a);
  // ties route the gradient to the first argument
  Value max(Value a, Value b);
  Value log_sum_exp(std::span<const Value> xs);
  Value stop_gradient(Value a);

  double value(Value v) const { return nodes_[v.index_].value; }

  // Reverse sweep from root; adjoints of all nodes become available.
  // Throws NumericError if any leaf adjoint is non-finite.
  void backward(Value root);

  double adjoint(Value v) const { return adjoints_[v.index_]; }

  // Gradients of the leaves, in creation order.
  std::vector<double> leaf_gradients() const;

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_leaves() const { return leaves_.size(); }

  // Drop all nodes but keep allocated storage for reuse.
  void clear();

 private:
  friend class Value;

  struct Node {
    Op op;
    std::uint32_t first = 0;  // offset into args_/partials_
    std::uint32_t nargs = 0;
    double value = 0.0;
  };

  Value push0(Op op, double value);
  Value push1(Op op, Value a, double value, double da);
  Value push2(Op op, Value a, Value b, double value, double da, double db);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> args_;
  std::vector<double> partials_;
  std::vector<double> adjoints_;
  std::vector<std::uint32_t> leaves_;
};

inline double Value::value() const { return graph_->value(*this); }

// expression helpers
inline Value operator+(Value a, Value b) { return a.graph()->add(a, b); }
inline Value operator-(Value a, Value b) { return a.graph()->sub(a, b); }
inline Value operator*(Value a, Value b) { return a.graph()->mul(a, b); }
inline Value operator/(Value a, Value b) { return a.graph()->div(a, b); }
inline Value operator-(Value a) { return a.graph()->neg(a); }
inline Value operator+(Value a, double b) { return a + a.graph()->constant(b); }
inline Value operator+(double a, Value b) { return b.graph()->constant(a) + b; }
inline Value operator-(Value a, double b) { return a - a.graph()->constant(b); }
inline Value operator-(double a, Value b) { return b.graph()->constant(a) - b; }
inline Value operator*(Value a, double b) { return a * a.graph()->constant(b); }
inline Value operator*(double a, Value b) { return b.graph()->constant(a) * b; }
inline Value operator/(Value a, double b) { return a / a.graph()->constant(b); }
inline Value operator/(double a, Value b) { return b.graph()->constant(a) / b; }
inline Value exp(Value a) { return a.graph()->exp(a); }
inline Value log(Value a) { return a.graph()->log(a); }
inline Value softplus(Value a) { return a.graph()->softplus(a); }
inline Value tanh(Value a) { return a.graph()->tanh(a); }
inline Value square(Value a) { return a.graph()->square(a); }
inline Value max(Value a, Value b) { return a.graph()->max(a, b); }
inline Value stop_gradient(Value a) { return a.graph()->stop_gradient(a); }

// Builds a scalar objective from parameter leaves.
using ObjectiveBuilder = std::function<Value(Graph&, std::span<const Value>)>;

struct EvalResult {
  double value = 0.0;
  std::vector<double> gradient;
};

// Evaluate the objective and its gradient with respect to every parameter.
EvalResult evaluate_with_gradient(const ObjectiveBuilder& builder, const ParamVector& params);
EvalResult evaluate_with_gradient(const ObjectiveBuilder& builder, std::span<const double> params);

// Forward value only; identical construction path, no backward sweep.
double evaluate(const ObjectiveBuilder& builder, std::span<const double> params);

// overflow-safe scalar softplus: max(z,0) + log1p(exp(-|z|))
double softplus_stable(double z);

}  // namespace pac2
