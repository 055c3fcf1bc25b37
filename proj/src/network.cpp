#include "cropgan/network.hpp"

#include "cropgan/rng.hpp"

namespace cropgan {

namespace {

constexpr double kInitStd = 0.02;

Tensor normal_tensor(Shape shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.normal(0.0, kInitStd);
  t.set_requires_grad(true);
  return t;
}

Tensor trainable(Tensor t) {
  t.set_requires_grad(true);
  return t;
}

Layer conv_layer(int kh, int kw, int sh, int sw, int ph, int pw, int cin, int cout, Rng& rng) {
  Layer l;
  l.kind = LayerKind::Conv;
  l.kh = kh;
  l.kw = kw;
  l.sh = sh;
  l.sw = sw;
  l.ph = ph;
  l.pw = pw;
  l.kernel = normal_tensor({kh, kw, cin, cout}, rng);
  l.bias = trainable(Tensor::zeros({cout}));
  return l;
}

Layer tconv_layer(int kh, int kw, int cin, int cout, Rng& rng) {
  Layer l;
  l.kind = LayerKind::TConv;
  l.kh = kh;
  l.kw = kw;
  l.kernel = normal_tensor({kh, kw, cout, cin}, rng);
  l.bias = trainable(Tensor::zeros({cout}));
  return l;
}

Layer instance_norm_layer(int channels) {
  Layer l;
  l.kind = LayerKind::InstanceNorm;
  l.gain = trainable(Tensor::full({channels}, 1.0));
  l.shift = trainable(Tensor::zeros({channels}));
  return l;
}

Layer batch_norm_layer(int features) {
  Layer l;
  l.kind = LayerKind::BatchNorm;
  l.gain = trainable(Tensor::full({features}, 1.0));
  l.shift = trainable(Tensor::zeros({features}));
  l.running_mean = Tensor::zeros({features});
  l.running_var = Tensor::full({features}, 1.0);
  return l;
}

Layer dense_layer(int in_dim, int out_dim, Rng& rng) {
  Layer l;
  l.kind = LayerKind::Dense;
  l.kernel = normal_tensor({in_dim, out_dim}, rng);
  l.bias = trainable(Tensor::zeros({out_dim}));
  return l;
}

Layer activation_layer(Act act, double slope = 0.2) {
  Layer l;
  l.kind = LayerKind::Activation;
  l.act = act;
  l.slope = slope;
  return l;
}

Layer flatten_layer() {
  Layer l;
  l.kind = LayerKind::Flatten;
  return l;
}

}  // namespace

const char* role_name(NetworkRole role) {
  switch (role) {
    case NetworkRole::GeneratorG: return "generator-G";
    case NetworkRole::GeneratorF: return "generator-F";
    case NetworkRole::DiscriminatorX: return "discriminator-X";
    case NetworkRole::DiscriminatorY: return "discriminator-Y";
    case NetworkRole::CropMapper: return "crop-mapper";
  }
  return "unknown";
}

Graph::NodeId Network::forward(Graph& graph, Graph::NodeId input, bool training) {
  Graph::NodeId x = input;
  for (Layer& l : layers) {
    switch (l.kind) {
      case LayerKind::Conv:
        x = graph.conv2d(x, graph.param(l.kernel), graph.param(l.bias), l.sh, l.sw, l.ph, l.pw);
        break;
      case LayerKind::TConv:
        x = graph.transposed_conv2d(x, graph.param(l.kernel), graph.param(l.bias), l.sh, l.sw,
                                    l.ph, l.pw);
        break;
      case LayerKind::InstanceNorm:
        x = graph.instance_norm(x, graph.param(l.gain), graph.param(l.shift), l.eps);
        break;
      case LayerKind::BatchNorm:
        x = training ? graph.batch_norm_train(x, graph.param(l.gain), graph.param(l.shift),
                                              l.running_mean, l.running_var, l.momentum, l.eps)
                     : graph.batch_norm_eval(x, graph.param(l.gain), graph.param(l.shift),
                                             l.running_mean, l.running_var, l.eps);
        break;
      case LayerKind::Dense:
        x = graph.dense(x, graph.param(l.kernel), graph.param(l.bias));
        break;
      case LayerKind::Activation:
        switch (l.act) {
          case Act::Relu: x = graph.relu(x); break;
          case Act::LeakyRelu: x = graph.leaky_relu(x, l.slope); break;
          case Act::Sigmoid: x = graph.sigmoid(x); break;
        }
        break;
      case LayerKind::Flatten: {
        const Tensor& v = graph.value(x);
        if (v.rank() == 4) {
          x = graph.reshape(x, {v.shape[0], v.shape[1] * v.shape[2] * v.shape[3]});
        } else {
          x = graph.reshape(x, {static_cast<int>(v.size())});
        }
        break;
      }
    }
  }
  return x;
}

Tensor Network::forward_eval(const Tensor& batch) const {
  Graph graph;
  Network& self = const_cast<Network&>(*this);
  const auto out = self.forward(graph, graph.constant(batch), /*training=*/false);
  return graph.value(out);
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (Layer& l : layers) {
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::TConv:
      case LayerKind::Dense:
        out.push_back(&l.kernel);
        out.push_back(&l.bias);
        break;
      case LayerKind::InstanceNorm:
      case LayerKind::BatchNorm:
        out.push_back(&l.gain);
        out.push_back(&l.shift);
        break;
      default:
        break;
    }
  }
  return out;
}

std::vector<Tensor*> Network::state_tensors() {
  std::vector<Tensor*> out = parameters();
  for (Layer& l : layers) {
    if (l.kind == LayerKind::BatchNorm) {
      out.push_back(&l.running_mean);
      out.push_back(&l.running_var);
    }
  }
  return out;
}

long long Network::parameter_count() const {
  long long n = 0;
  for (Tensor* t : const_cast<Network*>(this)->parameters()) n += t->size();
  return n;
}

std::vector<Shape> Network::shape_trace() const {
  std::vector<Shape> trace{input_shape};
  Shape cur = input_shape;
  for (const Layer& l : layers) {
    switch (l.kind) {
      case LayerKind::Conv: {
        const int cout = l.kernel.shape[3];
        cur = {(cur[0] + 2 * l.ph - l.kh) / l.sh + 1, (cur[1] + 2 * l.pw - l.kw) / l.sw + 1, cout};
        trace.push_back(cur);
        break;
      }
      case LayerKind::TConv: {
        const int cout = l.kernel.shape[2];
        cur = {(cur[0] - 1) * l.sh + l.kh - 2 * l.ph, (cur[1] - 1) * l.sw + l.kw - 2 * l.pw, cout};
        trace.push_back(cur);
        break;
      }
      case LayerKind::Dense:
        cur = {l.kernel.shape[1]};
        trace.push_back(cur);
        break;
      case LayerKind::Flatten:
        cur = {static_cast<int>(numel(cur))};
        trace.push_back(cur);
        break;
      default:
        break;
    }
  }
  return trace;
}

void Network::zero_grad() {
  for (Tensor* t : parameters()) t->zero_grad();
}

std::function<Tensor(const Tensor&)> Network::eval_fn() const {
  return [this](const Tensor& batch) { return forward_eval(batch); };
}

Network build_generator(std::uint64_t seed, NetworkRole role) {
  Rng rng(seed);
  Network net;
  net.role = role;
  // Encoder: 9x6x1 -> 7x5x4 -> 5x4x8 -> 3x3x16 -> 1x2x32 with (3,2) kernels.
  const int enc[] = {1, 4, 8, 16, 32};
  for (int i = 0; i < 4; ++i) {
    net.layers.push_back(conv_layer(3, 2, 1, 1, 0, 0, enc[i], enc[i + 1], rng));
    net.layers.push_back(instance_norm_layer(enc[i + 1]));
    net.layers.push_back(activation_layer(Act::LeakyRelu));
  }
  // Decoder mirrors the encoder back to 9x6x1.
  const int dec[] = {32, 16, 8, 4, 1};
  for (int i = 0; i < 4; ++i) {
    net.layers.push_back(tconv_layer(3, 2, dec[i], dec[i + 1], rng));
    net.layers.push_back(instance_norm_layer(dec[i + 1]));
    net.layers.push_back(activation_layer(Act::LeakyRelu));
  }
  net.layers.push_back(activation_layer(Act::Relu));
  return net;
}

Network build_discriminator(std::uint64_t seed, NetworkRole role) {
  Rng rng(seed);
  Network net;
  net.role = role;
  net.layers.push_back(conv_layer(3, 3, 1, 1, 1, 1, 1, 4, rng));
  net.layers.push_back(activation_layer(Act::LeakyRelu));
  net.layers.push_back(instance_norm_layer(4));
  net.layers.push_back(conv_layer(2, 2, 2, 2, 0, 0, 4, 8, rng));
  net.layers.push_back(activation_layer(Act::LeakyRelu));
  net.layers.push_back(instance_norm_layer(8));
  net.layers.push_back(conv_layer(2, 2, 2, 2, 0, 0, 8, 16, rng));
  net.layers.push_back(activation_layer(Act::LeakyRelu));
  net.layers.push_back(instance_norm_layer(16));
  net.layers.push_back(conv_layer(2, 1, 1, 1, 0, 0, 16, 1, rng));
  net.layers.push_back(activation_layer(Act::LeakyRelu));
  net.layers.push_back(flatten_layer());
  net.layers.push_back(activation_layer(Act::Sigmoid));
  return net;
}

Network build_crop_mapper(std::uint64_t seed) {
  Rng rng(seed);
  Network net;
  net.role = NetworkRole::CropMapper;
  net.layers.push_back(conv_layer(3, 3, 1, 1, 1, 1, 1, 2, rng));
  net.layers.push_back(activation_layer(Act::Relu));
  net.layers.push_back(batch_norm_layer(9 * 6 * 2));
  net.layers.push_back(conv_layer(2, 2, 2, 2, 0, 0, 2, 2, rng));
  net.layers.push_back(activation_layer(Act::Relu));
  net.layers.push_back(batch_norm_layer(4 * 3 * 2));
  net.layers.push_back(conv_layer(2, 2, 2, 2, 0, 0, 2, 4, rng));
  net.layers.push_back(activation_layer(Act::Relu));
  net.layers.push_back(batch_norm_layer(2 * 1 * 4));
  net.layers.push_back(flatten_layer());
  net.layers.push_back(dense_layer(8, 4, rng));
  net.layers.push_back(activation_layer(Act::Relu));
  // The final unit feeds the sigmoid directly; a ReLU here would pin all
  // probabilities at or above one half.
  net.layers.push_back(dense_layer(4, 1, rng));
  net.layers.push_back(activation_layer(Act::Sigmoid));
  return net;
}

Network build_network(NetworkRole role, std::uint64_t seed) {
  switch (role) {
    case NetworkRole::GeneratorG:
    case NetworkRole::GeneratorF:
      return build_generator(seed, role);
    case NetworkRole::DiscriminatorX:
    case NetworkRole::DiscriminatorY:
      return build_discriminator(seed, role);
    case NetworkRole::CropMapper:
      return build_crop_mapper(seed);
  }
  throw UsageError("unknown network role");
}

}  // namespace cropgan
