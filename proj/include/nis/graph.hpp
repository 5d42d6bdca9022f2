#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "nis/param_store.hpp"
#include "nis/tensor.hpp"

namespace nis {

using NodeId = std::int32_t;

class Graph;

// One recorded operation. Forward values are computed eagerly when the node
// is created, so node creation order is a topological order and the backward
// sweep can simply walk ids in reverse.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation during the backward sweep
  bool has_grad = false;
  std::vector<NodeId> inputs;

  virtual void backward(Graph& g) = 0;
  virtual const char* op_name() const = 0;
  virtual ~Node() = default;
};

class Graph {
 public:
  explicit Graph(const ParamStore* params = nullptr) : params_(params) {}

  // Leaves.
  NodeId input(Tensor t);
  NodeId param(const std::string& name);  // snapshot of the store value; one node per name

  // Arithmetic / layers.
  NodeId add(NodeId a, NodeId b);
  NodeId add_rowvec(NodeId m, NodeId row);  // broadcast a [1,C] bias over [R,C]
  NodeId scale(NodeId a, double c);
  NodeId matmul(NodeId a, NodeId b);     // [N,K] x [K,M]
  NodeId matmul_nt(NodeId a, NodeId b);  // [N,K] x [M,K]^T -> [N,M]
  NodeId relu(NodeId a);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId concat_cols(const std::vector<NodeId>& xs);
  NodeId gather_rows(NodeId m, std::vector<std::int64_t> ids);

  // Loss heads; each returns a scalar node (mean over the batch).
  NodeId softmax_xent(NodeId logits, std::vector<std::int64_t> labels);
  NodeId sampled_softmax_xent(NodeId hidden, NodeId weights, NodeId bias,
                              std::vector<std::int64_t> labels,
                              std::vector<std::vector<std::int64_t>> negatives);
  NodeId sigmoid_xent(NodeId logits, std::vector<double> labels);

  // Extension point for fused ops defined by other modules. The node's value
  // must already be computed; inputs must reference existing nodes.
  NodeId add_node(std::unique_ptr<Node> n);

  const Tensor& value(NodeId id) const { return node(id).value; }
  Node& node(NodeId id);
  const Node& node(NodeId id) const;
  std::size_t num_nodes() const { return nodes_.size(); }

  // Accumulation target for id's gradient; allocates zeros on first use.
  Tensor& grad(NodeId id);

  // Reverse sweep from a scalar loss node. Returns the loss value.
  double backward_from(NodeId loss);

  // Gradients for parameter leaves, keyed by parameter name. Every parameter
  // of the bound store gets an entry; unreached ones map to zero tensors.
  GradMap param_grads() const;

  const ParamStore* params() const { return params_; }

 private:
  NodeId finish_node(std::unique_ptr<Node> n);
  const ParamStore* params_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::map<std::string, NodeId> param_nodes_;
};

// Runs the backward sweep and collects parameter gradients.
std::pair<double, GradMap> forward_backward(Graph& g, NodeId loss);

// Compares analytic gradients of the loss produced by `build` against central
// finite differences over every element of every parameter in `params`.
// Returns max over elements of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double check_gradients(const std::function<NodeId(Graph&)>& build, ParamStore& params, double eps);

}  // namespace nis
