#include "pac2/graph.hpp"

#include <algorithm>
#include <cmath>

namespace pac2 {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConst: return "const";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSoftplus: return "softplus";
    case Op::kTanh: return "tanh";
    case Op::kSquare: return "square";
    case Op::kMax: return "max";
    case Op::kLogSumExp: return "log_sum_exp";
    case Op::kStopGradient: return "stop_gradient";
  }
  return "?";
}

double softplus_stable(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

namespace {
inline void check_finite(double v, Op op) {
  if (!std::isfinite(v)) throw NumericError("non-finite forward value", op_name(op));
}
}  // namespace

Value Graph::push0(Op op, double value) {
  check_finite(value, op);
  nodes_.push_back(Node{op, 0, 0, value});
  return Value(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Value Graph::push1(Op op, Value a, double value, double da) {
  check_finite(value, op);
  const auto first = static_cast<std::uint32_t>(args_.size());
  args_.push_back(a.index_);
  partials_.push_back(da);
  nodes_.push_back(Node{op, first, 1, value});
  return Value(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Value Graph::push2(Op op, Value a, Value b, double value, double da, double db) {
  check_finite(value, op);
  const auto first = static_cast<std::uint32_t>(args_.size());
  args_.push_back(a.index_);
  args_.push_back(b.index_);
  partials_.push_back(da);
  partials_.push_back(db);
  nodes_.push_back(Node{op, first, 2, value});
  return Value(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Value Graph::leaf(double v) {
  Value out = push0(Op::kLeaf, v);
  leaves_.push_back(out.index_);
  return out;
}

Value Graph::constant(double v) { return push0(Op::kConst, v); }

Value Graph::add(Value a, Value b) { return push2(Op::kAdd, a, b, value(a) + value(b), 1.0, 1.0); }

Value Graph::sub(Value a, Value b) { return push2(Op::kSub, a, b, value(a) - value(b), 1.0, -1.0); }

Value Graph::mul(Value a, Value b) {
  const double va = value(a), vb = value(b);
  return push2(Op::kMul, a, b, va * vb, vb, va);
}

Value Graph::div(Value a, Value b) {
  const double va = value(a), vb = value(b);
  const double v = va / vb;
  return push2(Op::kDiv, a, b, v, 1.0 / vb, -va / (vb * vb));
}

Value Graph::neg(Value a) { return push1(Op::kNeg, a, -value(a), -1.0); }

Value Graph::exp(Value a) {
  const double v = std::exp(value(a));
  return push1(Op::kExp, a, v, v);
}

Value Graph::log(Value a) {
  const double va = value(a);
  return push1(Op::kLog, a, std::log(va), 1.0 / va);
}

Value Graph::softplus(Value a) {
  const double z = value(a);
  const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return push1(Op::kSoftplus, a, softplus_stable(z), sig);
}

Value Graph::tanh(Value a) {
  const double t = std::tanh(value(a));
  return push1(Op::kTanh, a, t, 1.0 - t * t);
}

Value Graph::square(Value a) {
  const double va = value(a);
  return push1(Op::kSquare, a, va * va, 2.0 * va);
}

Value Graph::max(Value a, Value b) {
  const double va = value(a), vb = value(b);
  const bool first = va >= vb;  // tie -> first argument
  return push2(Op::kMax, a, b, first ? va : vb, first ? 1.0 : 0.0, first ? 0.0 : 1.0);
}

Value Graph::log_sum_exp(std::span<const Value> xs) {
  if (xs.empty()) throw std::invalid_argument("log_sum_exp of empty list");
  double m = value(xs[0]);
  for (const Value& x : xs) m = std::max(m, value(x));
  double total = 0.0;
  for (const Value& x : xs) total += std::exp(value(x) - m);
  const double v = m + std::log(total);
  check_finite(v, Op::kLogSumExp);
  const auto first = static_cast<std::uint32_t>(args_.size());
  for (const Value& x : xs) {
    args_.push_back(x.index_);
    partials_.push_back(std::exp(value(x) - m) / total);  // softmax weights
  }
  nodes_.push_back(Node{Op::kLogSumExp, first, static_cast<std::uint32_t>(xs.size()), v});
  return Value(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Value Graph::stop_gradient(Value a) { return push1(Op::kStopGradient, a, value(a), 0.0); }

void Graph::backward(Value root) {
  adjoints_.assign(nodes_.size(), 0.0);
  adjoints_[root.index_] = 1.0;
  for (std::uint32_t i = root.index_ + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    const double adj = adjoints_[i];
    if (adj == 0.0 || n.nargs == 0) continue;
    for (std::uint32_t k = 0; k < n.nargs; ++k)
      adjoints_[args_[n.first + k]] += adj * partials_[n.first + k];
  }
  for (std::uint32_t li : leaves_) {
    if (!std::isfinite(adjoints_[li])) {
      // locate the node that introduced the non-finite adjoint for the report
      for (std::uint32_t i = 0; i < nodes_.size(); ++i)
        if (!std::isfinite(adjoints_[i]))
          throw NumericError("non-finite gradient", op_name(nodes_[i].op));
      throw NumericError("non-finite gradient", op_name(Op::kLeaf));
    }
  }
}

std::vector<double> Graph::leaf_gradients() const {
  std::vector<double> out;
  out.reserve(leaves_.size());
  for (std::uint32_t li : leaves_) out.push_back(adjoints_[li]);
  return out;
}

void Graph::clear() {
  nodes_.clear();
  args_.clear();
  partials_.clear();
  adjoints_.clear();
  leaves_.clear();
}

namespace {
std::vector<Value> make_leaves(Graph& g, std::span<const double> params) {
  std::vector<Value> leaves;
  leaves.reserve(params.size());
  for (double p : params) leaves.push_back(g.leaf(p));
  return leaves;
}
}  // namespace

EvalResult evaluate_with_gradient(const ObjectiveBuilder& builder, std::span<const double> params) {
  Graph g;
  const std::vector<Value> leaves = make_leaves(g, params);
  const Value root = builder(g, leaves);
  if (!std::isfinite(root.value())) throw NumericError("non-finite objective value");
  g.backward(root);
  return EvalResult{root.value(), g.leaf_gradients()};
}

EvalResult evaluate_with_gradient(const ObjectiveBuilder& builder, const ParamVector& params) {
  return evaluate_with_gradient(builder, std::span<const double>(params.values));
}

double evaluate(const ObjectiveBuilder& builder, std::span<const double> params) {
  Graph g;
  const std::vector<Value> leaves = make_leaves(g, params);
  return builder(g, leaves).value();
}

}  // namespace pac2
