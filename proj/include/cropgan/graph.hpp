#pragma once

#include <vector>

#include "cropgan/tensor.hpp"

namespace cropgan {

// Reverse-mode autodiff tape. Nodes are appended in evaluation order and
// the backward pass walks them in exact reverse creation order, so inputs
// always precede their consumers. Parameter leaves are bound to external
// tensors; backward accumulates into their `grad` buffers (repeated
// backward calls without zero_grad add up).
class Graph {
 public:
  using NodeId = int;

  // Leaves.
  NodeId constant(Tensor value);
  NodeId param(Tensor& tensor);

  // Layer primitives.
  NodeId conv2d(NodeId input, NodeId kernels, NodeId bias, int sh, int sw, int ph, int pw);
  NodeId transposed_conv2d(NodeId input, NodeId kernels, NodeId bias, int sh, int sw, int ph,
                           int pw);
  NodeId dense(NodeId input, NodeId weights, NodeId bias);
  NodeId instance_norm(NodeId input, NodeId gain, NodeId shift, double epsilon);
  NodeId batch_norm_train(NodeId input, NodeId gain, NodeId shift, Tensor& running_mean,
                          Tensor& running_var, double momentum, double epsilon);
  NodeId batch_norm_eval(NodeId input, NodeId gain, NodeId shift, const Tensor& running_mean,
                         const Tensor& running_var, double epsilon);

  // Activations.
  NodeId relu(NodeId input);
  NodeId leaky_relu(NodeId input, double slope);
  NodeId sigmoid(NodeId input);

  // Elementwise and reductions (loss assembly).
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId rsub_const(double c, NodeId a);  // c - a
  NodeId abs(NodeId a);
  NodeId log_clamped(NodeId a, double lo, double hi);
  NodeId mean_all(NodeId a);
  NodeId sum_all(NodeId a);
  NodeId reshape(NodeId a, Shape shape);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  double scalar(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  // Seeds the scalar loss node with gradient 1 and sweeps the tape in
  // reverse, accumulating into bound parameter tensors.
  void backward(NodeId loss);

 private:
  enum class Op {
    Constant,
    Param,
    Conv2d,
    TConv2d,
    Dense,
    InstanceNorm,
    BatchNormTrain,
    BatchNormEval,
    Relu,
    LeakyRelu,
    Sigmoid,
    Add,
    Sub,
    Mul,
    Scale,
    RsubConst,
    Abs,
    LogClamped,
    MeanAll,
    SumAll,
    Reshape,
  };

  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Tensor value;
    std::vector<double> grad;
    bool needs_grad = false;
    Tensor* bound = nullptr;  // Param nodes
    // op attributes
    int sh = 1, sw = 1, ph = 0, pw = 0;
    double a0 = 0.0, a1 = 0.0;     // slope / clamp bounds / scale factor / epsilon
    std::vector<double> saved;     // per-channel statistics for norm backward
  };

  NodeId push(Node node);
  Node& at(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& at(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::vector<double>& grad_buf(NodeId id);

  void backward_node(NodeId id);

  std::vector<Node> nodes_;
};

}  // namespace cropgan
