#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "attre2vec/common.hpp"
#include "attre2vec/parameter_store.hpp"
#include "attre2vec/tensor.hpp"

namespace attre2vec {

// Reverse-mode computation graph over the closed primitive set the
// architecture needs: affine maps, ReLU/tanh/sigmoid, softmax, elementwise
// add/mul (with constant scale/shift), concatenation, mean, cosine
// similarity, and squared difference. Values are computed eagerly as nodes
// are added; backward() fills gradients and accumulates parameter gradients
// into the bound ParameterStore. Any non-finite value trips a NumericFault
// naming the op.
class Tape {
 public:
  explicit Tape(ParameterStore* store = nullptr) : store_(store) {}

  // --- leaves ---------------------------------------------------------

  int input(std::span<const double> values) {
    Node n;
    n.op = Op::kInput;
    n.t.shape = {values.size()};
    n.t.v.assign(values.begin(), values.end());
    return push(std::move(n), "input");
  }

  int input_scalar(double value) {
    const double v[1] = {value};
    return input(std::span<const double>(v, 1));
  }

  int zeros(std::size_t size) {
    Node n;
    n.op = Op::kInput;
    n.t.shape = {size};
    n.t.v.assign(size, 0.0);
    return push(std::move(n), "zeros");
  }

  // One node per parameter name per tape; repeated calls return the same
  // node so fan-out accumulates gradients naturally.
  int param(const std::string& name) {
    if (store_ == nullptr)
      throw ValidationError("tape has no parameter store bound");
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) return it->second;
    const std::size_t idx = store_->index_of(name);
    Node n;
    n.op = Op::kParam;
    n.param = static_cast<int>(idx);
    n.t.shape = store_->tensor(idx).shape;
    n.t.v = store_->tensor(idx).v;
    const int id = push(std::move(n), "param " + name);
    param_nodes_.emplace(name, id);
    return id;
  }

  // --- ops ------------------------------------------------------------

  // y = W x + b with W (m,n), x (n), optional b (m) when bias >= 0.
  int affine(int weight, int bias, int x) {
    const Tensor& w = node(weight).t;
    const Tensor& xv = node(x).t;
    if (w.shape.size() != 2)
      throw ShapeError("affine: weight must be rank 2");
    const std::size_t m = w.shape[0], k = w.shape[1];
    if (xv.shape.size() != 1 || xv.shape[0] != k)
      throw ShapeError("affine: weight cols " + std::to_string(k) +
                       " != input size " + shape_str(xv.shape));
    if (bias >= 0) {
      const Tensor& b = node(bias).t;
      if (b.shape.size() != 1 || b.shape[0] != m)
        throw ShapeError("affine: bias size mismatch");
    }
    Node n;
    n.op = Op::kAffine;
    n.in = {weight, bias, x};
    n.t.shape = {m};
    n.t.v.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* wrow = w.v.data() + i * k;
      double acc = bias >= 0 ? node(bias).t.v[i] : 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += wrow[j] * xv.v[j];
      n.t.v[i] = acc;
    }
    return push(std::move(n), "affine");
  }

  int relu(int x) { return unary(Op::kRelu, x, "relu"); }
  int tanh_op(int x) { return unary(Op::kTanh, x, "tanh"); }
  int sigmoid(int x) { return unary(Op::kSigmoid, x, "sigmoid"); }

  int softmax(int x) {
    const Tensor& xv = node(x).t;
    require_vector(xv, "softmax");
    Node n;
    n.op = Op::kSoftmax;
    n.in = {x};
    n.t.shape = xv.shape;
    n.t.v.resize(xv.v.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (double val : xv.v) mx = std::max(mx, val);
    double total = 0.0;
    for (std::size_t i = 0; i < xv.v.size(); ++i) {
      n.t.v[i] = std::exp(xv.v[i] - mx);
      total += n.t.v[i];
    }
    for (double& val : n.t.v) val /= total;
    return push(std::move(n), "softmax");
  }

  int add(int a, int b) { return add_n({a, b}); }

  int add_n(std::vector<int> xs) {
    return nary(Op::kAdd, std::move(xs), "add");
  }

  int mean_n(std::vector<int> xs) {
    return nary(Op::kMean, std::move(xs), "mean");
  }

  int mul(int a, int b) {
    const Tensor& av = node(a).t;
    const Tensor& bv = node(b).t;
    if (av.shape != bv.shape) throw ShapeError("mul: shape mismatch");
    Node n;
    n.op = Op::kMul;
    n.in = {a, b};
    n.t.shape = av.shape;
    n.t.v.resize(av.v.size());
    for (std::size_t i = 0; i < av.v.size(); ++i) n.t.v[i] = av.v[i] * bv.v[i];
    return push(std::move(n), "mul");
  }

  int scale(int x, double c) {
    Node n;
    n.op = Op::kScale;
    n.in = {x};
    n.c = c;
    n.t.shape = node(x).t.shape;
    n.t.v.resize(node(x).t.v.size());
    for (std::size_t i = 0; i < n.t.v.size(); ++i) n.t.v[i] = c * node(x).t.v[i];
    return push(std::move(n), "scale");
  }

  int shift(int x, double c) {
    Node n;
    n.op = Op::kShift;
    n.in = {x};
    n.c = c;
    n.t.shape = node(x).t.shape;
    n.t.v.resize(node(x).t.v.size());
    for (std::size_t i = 0; i < n.t.v.size(); ++i) n.t.v[i] = node(x).t.v[i] + c;
    return push(std::move(n), "shift");
  }

  // broadcast scalar * vector
  int scalar_vec_mul(int s, int x) {
    require_scalar(node(s).t, "scalar_vec_mul");
    const Tensor& xv = node(x).t;
    require_vector(xv, "scalar_vec_mul");
    Node n;
    n.op = Op::kScalarVecMul;
    n.in = {s, x};
    n.t.shape = xv.shape;
    n.t.v.resize(xv.v.size());
    const double sv = node(s).t.v[0];
    for (std::size_t i = 0; i < xv.v.size(); ++i) n.t.v[i] = sv * xv.v[i];
    return push(std::move(n), "scalar_vec_mul");
  }

  int concat(std::vector<int> xs) {
    if (xs.empty()) throw ShapeError("concat: no inputs");
    Node n;
    n.op = Op::kConcat;
    std::size_t total = 0;
    for (int x : xs) {
      require_vector(node(x).t, "concat");
      total += node(x).t.v.size();
    }
    n.in = std::move(xs);
    n.t.shape = {total};
    n.t.v.reserve(total);
    for (int x : n.in)
      n.t.v.insert(n.t.v.end(), node(x).t.v.begin(), node(x).t.v.end());
    return push(std::move(n), "concat");
  }

  int pick(int x, std::size_t i) {
    const Tensor& xv = node(x).t;
    require_vector(xv, "pick");
    if (i >= xv.v.size()) throw ShapeError("pick: index out of range");
    Node n;
    n.op = Op::kPick;
    n.in = {x};
    n.aux = i;
    n.t.shape = {1};
    n.t.v = {xv.v[i]};
    return push(std::move(n), "pick");
  }

  int sum_entries(int x) {
    const Tensor& xv = node(x).t;
    Node n;
    n.op = Op::kSumEntries;
    n.in = {x};
    n.t.shape = {1};
    double acc = 0.0;
    for (double val : xv.v) acc += val;
    n.t.v = {acc};
    return push(std::move(n), "sum_entries");
  }

  int cosine(int a, int b) {
    const Tensor& av = node(a).t;
    const Tensor& bv = node(b).t;
    require_vector(av, "cosine");
    if (av.shape != bv.shape) throw ShapeError("cosine: shape mismatch");
    double na = 0.0, nb = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < av.v.size(); ++i) {
      na += av.v[i] * av.v[i];
      nb += bv.v[i] * bv.v[i];
      dot += av.v[i] * bv.v[i];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na == 0.0 || nb == 0.0)
      throw NumericFault("cosine undefined for zero-norm vector");
    Node n;
    n.op = Op::kCosine;
    n.in = {a, b};
    n.t.shape = {1};
    n.t.v = {dot / (na * nb)};
    return push(std::move(n), "cosine");
  }

  // sum over entries of (a - b)^2
  int sqdiff(int a, int b) {
    const Tensor& av = node(a).t;
    const Tensor& bv = node(b).t;
    if (av.shape != bv.shape) throw ShapeError("sqdiff: shape mismatch");
    Node n;
    n.op = Op::kSqDiff;
    n.in = {a, b};
    n.t.shape = {1};
    double acc = 0.0;
    for (std::size_t i = 0; i < av.v.size(); ++i) {
      const double d = av.v[i] - bv.v[i];
      acc += d * d;
    }
    n.t.v = {acc};
    return push(std::move(n), "sqdiff");
  }

  // --- access ----------------------------------------------------------

  std::span<const double> value(int id) const { return node(id).t.v; }
  double value_scalar(int id) const {
    require_scalar(node(id).t, "value_scalar");
    return node(id).t.v[0];
  }
  std::span<const double> grad(int id) const { return node(id).t.g; }

  std::size_t node_count() const { return nodes_.size(); }

  // Minimal |pre-activation| over all ReLU inputs; finite-difference checks
  // use this to stay away from the kink.
  double relu_kink_margin() const {
    double margin = std::numeric_limits<double>::infinity();
    for (const Node& n : nodes_) {
      if (n.op != Op::kRelu) continue;
      for (double x : nodes_[n.in[0]].t.v) margin = std::min(margin, std::abs(x));
    }
    return margin;
  }

  // --- reverse pass ----------------------------------------------------

  void backward(int loss) {
    require_scalar(node(loss).t, "backward");
    for (Node& n : nodes_) {
      n.t.g.assign(n.t.v.size(), 0.0);
    }
    nodes_[loss].t.g[0] = 1.0;
    for (std::size_t idx = nodes_.size(); idx-- > 0;) {
      backprop(nodes_[idx]);
    }
    if (store_ != nullptr) {
      for (const Node& n : nodes_) {
        if (n.op != Op::kParam) continue;
        Tensor& p = store_->tensor(static_cast<std::size_t>(n.param));
        for (std::size_t i = 0; i < p.g.size(); ++i) p.g[i] += n.t.g[i];
        store_->mark_grad_valid(static_cast<std::size_t>(n.param));
      }
    }
  }

  double forward_backward(int loss) {
    backward(loss);
    return node(loss).t.v[0];
  }

 private:
  enum class Op {
    kInput,
    kParam,
    kAffine,
    kRelu,
    kTanh,
    kSigmoid,
    kSoftmax,
    kAdd,
    kMean,
    kMul,
    kScale,
    kShift,
    kScalarVecMul,
    kConcat,
    kPick,
    kSumEntries,
    kCosine,
    kSqDiff,
  };

  struct Node {
    Op op = Op::kInput;
    std::vector<int> in;
    Tensor t;
    double c = 0.0;
    std::size_t aux = 0;
    int param = -1;
  };

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }

  static std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i)
      out += (i ? "," : "") + std::to_string(s[i]);
    return out + ")";
  }

  static void require_vector(const Tensor& t, const char* op) {
    if (t.shape.size() != 1)
      throw ShapeError(std::string(op) + ": expected a vector");
  }

  static void require_scalar(const Tensor& t, const char* op) {
    if (t.shape.size() != 1 || t.shape[0] != 1)
      throw ShapeError(std::string(op) + ": expected a scalar");
  }

  int unary(Op op, int x, const char* name) {
    const Tensor& xv = node(x).t;
    Node n;
    n.op = op;
    n.in = {x};
    n.t.shape = xv.shape;
    n.t.v.resize(xv.v.size());
    for (std::size_t i = 0; i < xv.v.size(); ++i) {
      const double v = xv.v[i];
      switch (op) {
        case Op::kRelu: n.t.v[i] = v > 0.0 ? v : 0.0; break;
        case Op::kTanh: n.t.v[i] = std::tanh(v); break;
        case Op::kSigmoid: n.t.v[i] = 1.0 / (1.0 + std::exp(-v)); break;
        default: throw ShapeError("unary: bad op");
      }
    }
    return push(std::move(n), name);
  }

  int nary(Op op, std::vector<int> xs, const char* name) {
    if (xs.empty()) throw ShapeError(std::string(name) + ": no inputs");
    const Tensor& first = node(xs[0]).t;
    for (int x : xs)
      if (node(x).t.shape != first.shape)
        throw ShapeError(std::string(name) + ": shape mismatch");
    Node n;
    n.op = op;
    n.in = std::move(xs);
    n.t.shape = first.shape;
    n.t.v.assign(first.v.size(), 0.0);
    for (int x : n.in)
      for (std::size_t i = 0; i < n.t.v.size(); ++i) n.t.v[i] += node(x).t.v[i];
    if (op == Op::kMean) {
      const double inv = 1.0 / static_cast<double>(n.in.size());
      for (double& v : n.t.v) v *= inv;
    }
    return push(std::move(n), name);
  }

  int push(Node&& n, const std::string& what) {
    for (double v : n.t.v)
      if (!std::isfinite(v))
        throw NumericFault("non-finite value produced by " + what);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size() - 1);
  }

  void backprop(Node& n) {
    switch (n.op) {
      case Op::kInput:
      case Op::kParam:
        return;
      case Op::kAffine: {
        Tensor& w = node(n.in[0]).t;
        Tensor& x = node(n.in[2]).t;
        const std::size_t m = w.shape[0], k = w.shape[1];
        for (std::size_t i = 0; i < m; ++i) {
          const double gy = n.t.g[i];
          if (gy == 0.0) continue;
          double* wg = w.g.data() + i * k;
          const double* wrow = w.v.data() + i * k;
          for (std::size_t j = 0; j < k; ++j) {
            wg[j] += gy * x.v[j];
            x.g[j] += gy * wrow[j];
          }
        }
        if (n.in[1] >= 0) {
          Tensor& b = node(n.in[1]).t;
          for (std::size_t i = 0; i < m; ++i) b.g[i] += n.t.g[i];
        }
        return;
      }
      case Op::kRelu: {
        Tensor& x = node(n.in[0]).t;
        for (std::size_t i = 0; i < x.v.size(); ++i)
          if (x.v[i] > 0.0) x.g[i] += n.t.g[i];
        return;
      }
      case Op::kTanh: {
        Tensor& x = node(n.in[0]).t;
        for (std::size_t i = 0; i < x.v.size(); ++i)
          x.g[i] += n.t.g[i] * (1.0 - n.t.v[i] * n.t.v[i]);
        return;
      }
      case Op::kSigmoid: {
        Tensor& x = node(n.in[0]).t;
        for (std::size_t i = 0; i < x.v.size(); ++i)
          x.g[i] += n.t.g[i] * n.t.v[i] * (1.0 - n.t.v[i]);
        return;
      }
      case Op::kSoftmax: {
        Tensor& x = node(n.in[0]).t;
        double dot = 0.0;
        for (std::size_t i = 0; i < n.t.v.size(); ++i) dot += n.t.v[i] * n.t.g[i];
        for (std::size_t i = 0; i < x.v.size(); ++i)
          x.g[i] += n.t.v[i] * (n.t.g[i] - dot);
        return;
      }
      case Op::kAdd: {
        for (int xi : n.in) {
          Tensor& x = node(xi).t;
          for (std::size_t i = 0; i < x.g.size(); ++i) x.g[i] += n.t.g[i];
        }
        return;
      }
      case Op::kMean: {
        const double inv = 1.0 / static_cast<double>(n.in.size());
        for (int xi : n.in) {
          Tensor& x = node(xi).t;
          for (std::size_t i = 0; i < x.g.size(); ++i) x.g[i] += inv * n.t.g[i];
        }
        return;
      }
      case Op::kMul: {
        Tensor& a = node(n.in[0]).t;
        Tensor& b = node(n.in[1]).t;
        for (std::size_t i = 0; i < a.v.size(); ++i) {
          a.g[i] += n.t.g[i] * b.v[i];
          b.g[i] += n.t.g[i] * a.v[i];
        }
        return;
      }
      case Op::kScale: {
        Tensor& x = node(n.in[0]).t;
        for (std::size_t i = 0; i < x.g.size(); ++i) x.g[i] += n.c * n.t.g[i];
        return;
      }
      case Op::kShift: {
        Tensor& x = node(n.in[0]).t;
        for (std::size_t i = 0; i < x.g.size(); ++i) x.g[i] += n.t.g[i];
        return;
      }
      case Op::kScalarVecMul: {
        Tensor& s = node(n.in[0]).t;
        Tensor& x = node(n.in[1]).t;
        for (std::size_t i = 0; i < x.v.size(); ++i) {
          s.g[0] += n.t.g[i] * x.v[i];
          x.g[i] += n.t.g[i] * s.v[0];
        }
        return;
      }
      case Op::kConcat: {
        std::size_t offset = 0;
        for (int xi : n.in) {
          Tensor& x = node(xi).t;
          for (std::size_t i = 0; i < x.v.size(); ++i)
            x.g[i] += n.t.g[offset + i];
          offset += x.v.size();
        }
        return;
      }
      case Op::kPick: {
        node(n.in[0]).t.g[n.aux] += n.t.g[0];
        return;
      }
      case Op::kSumEntries: {
        Tensor& x = node(n.in[0]).t;
        for (double& gi : x.g) gi += n.t.g[0];
        return;
      }
      case Op::kCosine: {
        Tensor& a = node(n.in[0]).t;
        Tensor& b = node(n.in[1]).t;
        double na = 0.0, nb = 0.0, dot = 0.0;
        for (std::size_t i = 0; i < a.v.size(); ++i) {
          na += a.v[i] * a.v[i];
          nb += b.v[i] * b.v[i];
          dot += a.v[i] * b.v[i];
        }
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        const double c = n.t.v[0];
        const double gy = n.t.g[0];
        for (std::size_t i = 0; i < a.v.size(); ++i) {
          a.g[i] += gy * (b.v[i] / (na * nb) - c * a.v[i] / (na * na));
          b.g[i] += gy * (a.v[i] / (na * nb) - c * b.v[i] / (nb * nb));
        }
        return;
      }
      case Op::kSqDiff: {
        Tensor& a = node(n.in[0]).t;
        Tensor& b = node(n.in[1]).t;
        const double gy = n.t.g[0];
        for (std::size_t i = 0; i < a.v.size(); ++i) {
          const double d = 2.0 * (a.v[i] - b.v[i]) * gy;
          a.g[i] += d;
          b.g[i] -= d;
        }
        return;
      }
    }
  }

  ParameterStore* store_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> param_nodes_;
};

}  // namespace attre2vec
