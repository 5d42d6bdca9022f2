#include "nis/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "nis/errors.hpp"

namespace nis {

namespace {

void matmul_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  // out += a * b, all row-major. ikj order keeps the inner loop contiguous.
  const std::int64_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::int64_t i = 0; i < n; ++i) {
    const double* arow = a.v.data() + i * k;
    double* orow = out.v.data() + i * m;
    for (std::int64_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.v.data() + p * m;
      for (std::int64_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  // out += a * b^T with b stored [M,K].
  const std::int64_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::int64_t i = 0; i < n; ++i) {
    const double* arow = a.v.data() + i * k;
    double* orow = out.v.data() + i * m;
    for (std::int64_t j = 0; j < m; ++j) {
      const double* brow = b.v.data() + j * k;
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      orow[j] += acc;
    }
  }
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  // out += a^T * b with a stored [N,K]: result [K,M].
  const std::int64_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::int64_t i = 0; i < n; ++i) {
    const double* arow = a.v.data() + i * k;
    const double* brow = b.v.data() + i * m;
    for (std::int64_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* orow = out.v.data() + p * m;
      for (std::int64_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

struct InputNode final : Node {
  void backward(Graph&) override {}
  const char* op_name() const override { return "input"; }
};

struct ParamNode final : Node {
  std::string param_id;
  void backward(Graph&) override {}
  const char* op_name() const override { return "param"; }
};

struct AddNode final : Node {
  void backward(Graph& g) override {
    for (NodeId in : inputs) {
      Tensor& gi = g.grad(in);
      for (std::size_t i = 0; i < grad.v.size(); ++i) gi.v[i] += grad.v[i];
    }
  }
  const char* op_name() const override { return "add"; }
};

struct AddRowvecNode final : Node {
  void backward(Graph& g) override {
    Tensor& gm = g.grad(inputs[0]);
    Tensor& gr = g.grad(inputs[1]);
    const std::int64_t rows = value.rows(), cols = value.cols();
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t c = 0; c < cols; ++c) {
        const double gv = grad.v[r * cols + c];
        gm.v[r * cols + c] += gv;
        gr.v[c] += gv;
      }
  }
  const char* op_name() const override { return "add_rowvec"; }
};

struct ScaleNode final : Node {
  double factor = 1.0;
  void backward(Graph& g) override {
    Tensor& gi = g.grad(inputs[0]);
    for (std::size_t i = 0; i < grad.v.size(); ++i) gi.v[i] += factor * grad.v[i];
  }
  const char* op_name() const override { return "scale"; }
};

struct MatmulNode final : Node {
  void backward(Graph& g) override {
    const Tensor& a = g.value(inputs[0]);
    const Tensor& b = g.value(inputs[1]);
    matmul_nt_acc(grad, b, g.grad(inputs[0]));  // dA += G * B^T
    matmul_tn_acc(a, grad, g.grad(inputs[1]));  // dB += A^T * G
  }
  const char* op_name() const override { return "matmul"; }
};

struct MatmulNtNode final : Node {
  void backward(Graph& g) override {
    const Tensor& a = g.value(inputs[0]);
    const Tensor& b = g.value(inputs[1]);
    matmul_acc(grad, b, g.grad(inputs[0]));     // dA += G * B
    matmul_tn_acc(grad, a, g.grad(inputs[1]));  // dB += G^T * A
  }
  const char* op_name() const override { return "matmul_nt"; }
};

struct ReluNode final : Node {
  void backward(Graph& g) override {
    const Tensor& x = g.value(inputs[0]);
    Tensor& gi = g.grad(inputs[0]);
    // Subgradient at exactly 0 is defined as 0.
    for (std::size_t i = 0; i < grad.v.size(); ++i)
      if (x.v[i] > 0.0) gi.v[i] += grad.v[i];
  }
  const char* op_name() const override { return "relu"; }
};

struct SumNode final : Node {
  void backward(Graph& g) override {
    Tensor& gi = g.grad(inputs[0]);
    const double gv = grad.v[0];
    for (double& x : gi.v) x += gv;
  }
  const char* op_name() const override { return "sum"; }
};

struct MeanNode final : Node {
  void backward(Graph& g) override {
    Tensor& gi = g.grad(inputs[0]);
    const double gv = grad.v[0] / static_cast<double>(gi.v.size());
    for (double& x : gi.v) x += gv;
  }
  const char* op_name() const override { return "mean"; }
};

struct ConcatColsNode final : Node {
  void backward(Graph& g) override {
    const std::int64_t rows = value.rows(), cols = value.cols();
    std::int64_t off = 0;
    for (NodeId in : inputs) {
      Tensor& gi = g.grad(in);
      const std::int64_t ci = gi.cols();
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < ci; ++c) gi.v[r * ci + c] += grad.v[r * cols + off + c];
      off += ci;
    }
  }
  const char* op_name() const override { return "concat_cols"; }
};

struct GatherRowsNode final : Node {
  std::vector<std::int64_t> ids;
  void backward(Graph& g) override {
    // Scatter-add rows back into the full matrix.
    Tensor& gm = g.grad(inputs[0]);
    const std::int64_t d = gm.cols();
    for (std::size_t r = 0; r < ids.size(); ++r) {
      double* dst = gm.v.data() + ids[r] * d;
      const double* src = grad.v.data() + static_cast<std::int64_t>(r) * d;
      for (std::int64_t c = 0; c < d; ++c) dst[c] += src[c];
    }
  }
  const char* op_name() const override { return "gather_rows"; }
};

struct SoftmaxXentNode final : Node {
  std::vector<std::int64_t> labels;
  Tensor probs;  // cached softmax from the forward pass
  void backward(Graph& g) override {
    Tensor& gl = g.grad(inputs[0]);
    const std::int64_t b = probs.rows(), v = probs.cols();
    const double gv = grad.v[0] / static_cast<double>(b);
    for (std::int64_t r = 0; r < b; ++r) {
      for (std::int64_t c = 0; c < v; ++c) gl.v[r * v + c] += gv * probs.v[r * v + c];
      gl.v[r * v + labels[r]] -= gv;
    }
  }
  const char* op_name() const override { return "softmax_xent"; }
};

struct SampledSoftmaxNode final : Node {
  std::vector<std::int64_t> labels;
  std::vector<std::vector<std::int64_t>> negatives;
  Tensor probs;  // [B, 1+n] candidate softmax, label first
  void backward(Graph& g) override {
    const Tensor& h = g.value(inputs[0]);
    const Tensor& w = g.value(inputs[1]);
    Tensor& gh = g.grad(inputs[0]);
    Tensor& gw = g.grad(inputs[1]);
    Tensor& gb = g.grad(inputs[2]);
    const std::int64_t b = h.rows(), dim = h.cols(), nc = probs.cols();
    const double gv = grad.v[0] / static_cast<double>(b);
    for (std::int64_t r = 0; r < b; ++r) {
      const double* hrow = h.v.data() + r * dim;
      for (std::int64_t j = 0; j < nc; ++j) {
        const std::int64_t cand = j == 0 ? labels[r] : negatives[r][j - 1];
        double d = probs.v[r * nc + j];
        if (j == 0) d -= 1.0;
        d *= gv;
        if (d == 0.0) continue;
        const double* wrow = w.v.data() + cand * dim;
        double* ghrow = gh.v.data() + r * dim;
        double* gwrow = gw.v.data() + cand * dim;
        for (std::int64_t c = 0; c < dim; ++c) {
          ghrow[c] += d * wrow[c];
          gwrow[c] += d * hrow[c];
        }
        gb.v[cand] += d;
      }
    }
  }
  const char* op_name() const override { return "sampled_softmax_xent"; }
};

struct SigmoidXentNode final : Node {
  std::vector<double> labels;
  void backward(Graph& g) override {
    const Tensor& z = g.value(inputs[0]);
    Tensor& gz = g.grad(inputs[0]);
    const double gv = grad.v[0] / static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double sig = 1.0 / (1.0 + std::exp(-z.v[i]));
      gz.v[i] += gv * (sig - labels[i]);
    }
  }
  const char* op_name() const override { return "sigmoid_xent"; }
};

}  // namespace

Node& Graph::node(NodeId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw ContractViolation("invalid node id");
  return *nodes_[static_cast<std::size_t>(id)];
}

const Node& Graph::node(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw ContractViolation("invalid node id");
  return *nodes_[static_cast<std::size_t>(id)];
}

Tensor& Graph::grad(NodeId id) {
  Node& n = node(id);
  if (!n.has_grad) {
    n.grad = Tensor::zeros_like(n.value);
    n.has_grad = true;
  }
  return n.grad;
}

NodeId Graph::finish_node(std::unique_ptr<Node> n) {
  if (!n->value.all_finite())
    throw NumericError(std::string("non-finite forward value at node ") +
                       std::to_string(nodes_.size()) + " (" + n->op_name() + ")");
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::add_node(std::unique_ptr<Node> n) { return finish_node(std::move(n)); }

NodeId Graph::input(Tensor t) {
  auto n = std::make_unique<InputNode>();
  n->value = std::move(t);
  return finish_node(std::move(n));
}

NodeId Graph::param(const std::string& name) {
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return it->second;
  if (!params_) throw ContractViolation("graph has no bound parameter store");
  auto n = std::make_unique<ParamNode>();
  n->param_id = name;
  n->value = params_->get(name);
  NodeId id = finish_node(std::move(n));
  param_nodes_.emplace(name, id);
  return id;
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) throw ContractViolation("add: shape mismatch");
  auto n = std::make_unique<AddNode>();
  n->inputs = {a, b};
  n->value = ta;
  for (std::size_t i = 0; i < n->value.v.size(); ++i) n->value.v[i] += tb.v[i];
  return finish_node(std::move(n));
}

NodeId Graph::add_rowvec(NodeId m, NodeId row) {
  const Tensor& tm = value(m);
  const Tensor& tr = value(row);
  if (tr.numel() != tm.cols()) throw ContractViolation("add_rowvec: bias length mismatch");
  auto n = std::make_unique<AddRowvecNode>();
  n->inputs = {m, row};
  n->value = tm;
  const std::int64_t rows = tm.rows(), cols = tm.cols();
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) n->value.v[r * cols + c] += tr.v[c];
  return finish_node(std::move(n));
}

NodeId Graph::scale(NodeId a, double c) {
  auto n = std::make_unique<ScaleNode>();
  n->factor = c;
  n->inputs = {a};
  n->value = value(a);
  for (double& x : n->value.v) x *= c;
  return finish_node(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.cols() != tb.rows())
    throw ContractViolation("matmul: inner dimensions differ: " + ta.shape_str() + " x " +
                            tb.shape_str());
  auto n = std::make_unique<MatmulNode>();
  n->inputs = {a, b};
  n->value = Tensor({ta.rows(), tb.cols()});
  matmul_acc(ta, tb, n->value);
  return finish_node(std::move(n));
}

NodeId Graph::matmul_nt(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.cols() != tb.cols())
    throw ContractViolation("matmul_nt: inner dimensions differ: " + ta.shape_str() + " x " +
                            tb.shape_str() + "^T");
  auto n = std::make_unique<MatmulNtNode>();
  n->inputs = {a, b};
  n->value = Tensor({ta.rows(), tb.rows()});
  matmul_nt_acc(ta, tb, n->value);
  return finish_node(std::move(n));
}

NodeId Graph::relu(NodeId a) {
  auto n = std::make_unique<ReluNode>();
  n->inputs = {a};
  n->value = value(a);
  for (double& x : n->value.v) x = std::max(x, 0.0);
  return finish_node(std::move(n));
}

NodeId Graph::sum(NodeId a) {
  auto n = std::make_unique<SumNode>();
  n->inputs = {a};
  double acc = 0.0;
  for (double x : value(a).v) acc += x;
  n->value = Tensor::scalar(acc);
  return finish_node(std::move(n));
}

NodeId Graph::mean(NodeId a) {
  auto n = std::make_unique<MeanNode>();
  n->inputs = {a};
  double acc = 0.0;
  for (double x : value(a).v) acc += x;
  n->value = Tensor::scalar(acc / static_cast<double>(value(a).numel()));
  return finish_node(std::move(n));
}

NodeId Graph::concat_cols(const std::vector<NodeId>& xs) {
  if (xs.empty()) throw ContractViolation("concat_cols: no inputs");
  const std::int64_t rows = value(xs[0]).rows();
  std::int64_t total = 0;
  for (NodeId x : xs) {
    if (value(x).rows() != rows) throw ContractViolation("concat_cols: row count mismatch");
    total += value(x).cols();
  }
  auto n = std::make_unique<ConcatColsNode>();
  n->inputs = xs;
  n->value = Tensor({rows, total});
  std::int64_t off = 0;
  for (NodeId x : xs) {
    const Tensor& t = value(x);
    const std::int64_t ci = t.cols();
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t c = 0; c < ci; ++c) n->value.v[r * total + off + c] = t.v[r * ci + c];
    off += ci;
  }
  return finish_node(std::move(n));
}

NodeId Graph::gather_rows(NodeId m, std::vector<std::int64_t> ids) {
  const Tensor& tm = value(m);
  const std::int64_t rows = tm.rows(), d = tm.cols();
  for (auto id : ids)
    if (id < 0 || id >= rows) throw ContractViolation("gather_rows: id out of range");
  auto n = std::make_unique<GatherRowsNode>();
  n->inputs = {m};
  n->value = Tensor({static_cast<std::int64_t>(ids.size()), d});
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::memcpy(n->value.v.data() + static_cast<std::int64_t>(r) * d, tm.v.data() + ids[r] * d,
                static_cast<std::size_t>(d) * sizeof(double));
  n->ids = std::move(ids);
  return finish_node(std::move(n));
}

NodeId Graph::softmax_xent(NodeId logits, std::vector<std::int64_t> labels) {
  const Tensor& tl = value(logits);
  const std::int64_t b = tl.rows(), v = tl.cols();
  if (static_cast<std::int64_t>(labels.size()) != b)
    throw ContractViolation("softmax_xent: label count mismatch");
  auto n = std::make_unique<SoftmaxXentNode>();
  n->inputs = {logits};
  n->probs = Tensor({b, v});
  double loss = 0.0;
  for (std::int64_t r = 0; r < b; ++r) {
    if (labels[r] < 0 || labels[r] >= v) throw ContractViolation("softmax_xent: label out of range");
    const double* lrow = tl.v.data() + r * v;
    double mx = lrow[0];
    for (std::int64_t c = 1; c < v; ++c) mx = std::max(mx, lrow[c]);
    double z = 0.0;
    for (std::int64_t c = 0; c < v; ++c) z += std::exp(lrow[c] - mx);
    const double logz = std::log(z) + mx;
    for (std::int64_t c = 0; c < v; ++c) n->probs.v[r * v + c] = std::exp(lrow[c] - logz);
    loss += logz - lrow[labels[r]];
  }
  n->labels = std::move(labels);
  n->value = Tensor::scalar(loss / static_cast<double>(b));
  return finish_node(std::move(n));
}

NodeId Graph::sampled_softmax_xent(NodeId hidden, NodeId weights, NodeId bias,
                                   std::vector<std::int64_t> labels,
                                   std::vector<std::vector<std::int64_t>> negatives) {
  const Tensor& h = value(hidden);
  const Tensor& w = value(weights);
  const Tensor& bb = value(bias);
  const std::int64_t b = h.rows(), dim = h.cols(), vocab = w.rows();
  if (w.cols() != dim) throw ContractViolation("sampled_softmax_xent: weight width mismatch");
  if (bb.numel() != vocab) throw ContractViolation("sampled_softmax_xent: bias length mismatch");
  if (static_cast<std::int64_t>(labels.size()) != b ||
      static_cast<std::int64_t>(negatives.size()) != b)
    throw ContractViolation("sampled_softmax_xent: batch size mismatch");
  const std::size_t nneg = negatives.empty() ? 0 : negatives[0].size();
  if (nneg == 0) throw ContractViolation("sampled_softmax_xent: at least one negative required");
  auto n = std::make_unique<SampledSoftmaxNode>();
  n->inputs = {hidden, weights, bias};
  const std::int64_t nc = static_cast<std::int64_t>(nneg) + 1;
  n->probs = Tensor({b, nc});
  std::vector<double> logit(static_cast<std::size_t>(nc));
  double loss = 0.0;
  for (std::int64_t r = 0; r < b; ++r) {
    if (negatives[r].size() != nneg)
      throw ContractViolation("sampled_softmax_xent: ragged negatives");
    const double* hrow = h.v.data() + r * dim;
    for (std::int64_t j = 0; j < nc; ++j) {
      const std::int64_t cand = j == 0 ? labels[r] : negatives[r][j - 1];
      if (cand < 0 || cand >= vocab)
        throw ContractViolation("sampled_softmax_xent: candidate id out of range");
      const double* wrow = w.v.data() + cand * dim;
      double acc = bb.v[cand];
      for (std::int64_t c = 0; c < dim; ++c) acc += hrow[c] * wrow[c];
      logit[static_cast<std::size_t>(j)] = acc;
    }
    double mx = logit[0];
    for (std::int64_t j = 1; j < nc; ++j) mx = std::max(mx, logit[static_cast<std::size_t>(j)]);
    double z = 0.0;
    for (std::int64_t j = 0; j < nc; ++j) z += std::exp(logit[static_cast<std::size_t>(j)] - mx);
    const double logz = std::log(z) + mx;
    for (std::int64_t j = 0; j < nc; ++j)
      n->probs.v[r * nc + j] = std::exp(logit[static_cast<std::size_t>(j)] - logz);
    loss += logz - logit[0];
  }
  n->labels = std::move(labels);
  n->negatives = std::move(negatives);
  n->value = Tensor::scalar(loss / static_cast<double>(b));
  return finish_node(std::move(n));
}

NodeId Graph::sigmoid_xent(NodeId logits, std::vector<double> labels) {
  const Tensor& z = value(logits);
  if (z.numel() != static_cast<std::int64_t>(labels.size()))
    throw ContractViolation("sigmoid_xent: label count mismatch");
  auto n = std::make_unique<SigmoidXentNode>();
  n->inputs = {logits};
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double zi = z.v[i], yi = labels[i];
    loss += std::max(zi, 0.0) - zi * yi + std::log1p(std::exp(-std::abs(zi)));
  }
  n->labels = std::move(labels);
  n->value = Tensor::scalar(loss / static_cast<double>(z.numel()));
  return finish_node(std::move(n));
}

double Graph::backward_from(NodeId loss) {
  Node& ln = node(loss);
  if (!ln.value.is_scalar())
    throw ContractViolation("loss node is not scalar: shape " + ln.value.shape_str());
  grad(loss).v[0] = 1.0;
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = node(id);
    if (n.has_grad) n.backward(*this);
  }
  return ln.value.v[0];
}

GradMap Graph::param_grads() const {
  GradMap out;
  if (params_)
    for (const auto& name : params_->names()) out.emplace(name, Tensor::zeros_like(params_->get(name)));
  for (const auto& [name, id] : param_nodes_) {
    const Node& n = node(id);
    if (n.has_grad) out[name] = n.grad;
    else if (!out.count(name)) out.emplace(name, Tensor::zeros_like(n.value));
  }
  return out;
}

std::pair<double, GradMap> forward_backward(Graph& g, NodeId loss) {
  const double lv = g.backward_from(loss);
  return {lv, g.param_grads()};
}

double check_gradients(const std::function<NodeId(Graph&)>& build, ParamStore& params,
                       double eps) {
  if (!(eps > 0.0 && eps < 1e-2)) throw ContractViolation("check_gradients: eps out of (0, 1e-2)");
  Graph g(&params);
  NodeId loss = build(g);
  auto [_, grads] = forward_backward(g, loss);
  auto eval = [&]() {
    Graph h(&params);
    return h.value(build(h)).v[0];
  };
  double max_rel = 0.0;
  for (const auto& name : params.names()) {
    Tensor& w = params.get(name);
    const Tensor& an = grads.at(name);
    for (std::size_t i = 0; i < w.v.size(); ++i) {
      const double saved = w.v[i];
      w.v[i] = saved + eps;
      const double fp = eval();
      w.v[i] = saved - eps;
      const double fm = eval();
      w.v[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic = an.v[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace nis
