#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cropgan/graph.hpp"
#include "cropgan/tensor.hpp"

namespace cropgan {

enum class LayerKind : std::uint8_t {
  Conv,
  TConv,
  InstanceNorm,
  BatchNorm,
  Dense,
  Activation,
  Flatten,
};

enum class Act : std::uint8_t { Relu, LeakyRelu, Sigmoid };

enum class NetworkRole : std::uint8_t {
  GeneratorG = 0,    // target -> source
  GeneratorF = 1,    // source -> target
  DiscriminatorX = 2,
  DiscriminatorY = 3,
  CropMapper = 4,
};

const char* role_name(NetworkRole role);

struct Layer {
  LayerKind kind;
  int kh = 0, kw = 0, sh = 1, sw = 1, ph = 0, pw = 0;
  Tensor kernel;  // conv/tconv kernels or dense weights
  Tensor bias;
  Tensor gain, shift;               // norm layers
  Tensor running_mean, running_var; // batch norm
  Act act = Act::Relu;
  double slope = 0.2;
  double eps = 1e-5;
  double momentum = 0.1;
};

// Fixed-architecture network: an ordered layer list over 9x6x1 inputs.
// Parameters are owned by the layers; forward passes build nodes on a
// caller-provided graph so several networks can share one tape.
struct Network {
  NetworkRole role = NetworkRole::CropMapper;
  Shape input_shape{9, 6, 1};
  std::vector<Layer> layers;

  Graph::NodeId forward(Graph& graph, Graph::NodeId input, bool training);
  // Convenience pass on a throwaway graph, batch norm in eval mode.
  Tensor forward_eval(const Tensor& batch) const;

  std::vector<Tensor*> parameters();
  // Parameters plus batch-norm running statistics, in checkpoint order.
  std::vector<Tensor*> state_tensors();
  long long parameter_count() const;

  // Shapes after the input and after every shape-changing layer, for a
  // single unbatched sample.
  std::vector<Shape> shape_trace() const;

  void zero_grad();
  std::function<Tensor(const Tensor&)> eval_fn() const;
};

Network build_generator(std::uint64_t seed, NetworkRole role = NetworkRole::GeneratorG);
Network build_discriminator(std::uint64_t seed, NetworkRole role = NetworkRole::DiscriminatorX);
Network build_crop_mapper(std::uint64_t seed);
Network build_network(NetworkRole role, std::uint64_t seed);

}  // namespace cropgan
