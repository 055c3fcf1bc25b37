#include "cropgan/graph.hpp"

#include <cmath>
#include <cstring>

namespace cropgan {

namespace {

struct ConvGeom {
  int n, ih, iw, cin;   // input dims
  int oh, ow, cout;     // output dims
  int kh, kw;
};

int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

int tconv_out_dim(int in, int k, int stride, int pad) {
  return (in - 1) * stride + k - 2 * pad;
}

}  // namespace

Graph::NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

std::vector<double>& Graph::grad_buf(NodeId id) {
  Node& n = at(id);
  if (n.grad.empty()) n.grad.assign(n.value.data.size(), 0.0);
  return n.grad;
}

double Graph::scalar(NodeId id) const {
  const Tensor& v = value(id);
  if (v.size() != 1) throw UsageError("expected a scalar node, got shape " + shape_str(v.shape));
  return v.data[0];
}

Graph::NodeId Graph::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  n.needs_grad = false;
  return push(std::move(n));
}

Graph::NodeId Graph::param(Tensor& tensor) {
  Node n;
  n.op = Op::Param;
  n.value = tensor;  // copy of current values; grads flow to the bound tensor
  n.bound = &tensor;
  n.needs_grad = tensor.requires_grad;
  return push(std::move(n));
}

Graph::NodeId Graph::conv2d(NodeId input, NodeId kernels, NodeId bias, int sh, int sw, int ph,
                            int pw) {
  const Tensor& x = value(input);
  const Tensor& k = value(kernels);
  const Tensor& b = value(bias);
  const BatchDims d = spatial_dims(x.shape);
  if (k.rank() != 4) throw DimensionError("conv2d kernels must be rank 4, got " + shape_str(k.shape));
  const int kh = k.shape[0], kw = k.shape[1], cin = k.shape[2], cout = k.shape[3];
  if (cin != d.c) {
    throw DimensionError("conv2d channel mismatch: input has " + std::to_string(d.c) +
                         " channels, kernels expect " + std::to_string(cin));
  }
  if (b.rank() != 1 || b.shape[0] != cout) {
    throw DimensionError("conv2d bias must have shape (" + std::to_string(cout) + ")");
  }
  const int oh = conv_out_dim(d.h, kh, sh, ph);
  const int ow = conv_out_dim(d.w, kw, sw, pw);
  if (oh < 1 || ow < 1) {
    throw ConfigError("conv2d output would be empty for input " + shape_str(x.shape) +
                      " with kernel " + std::to_string(kh) + "x" + std::to_string(kw));
  }

  Shape out_shape = d.batched ? Shape{d.n, oh, ow, cout} : Shape{oh, ow, cout};
  Tensor out = Tensor::zeros(out_shape);
  std::vector<double> acc(static_cast<std::size_t>(cout));
  for (int n = 0; n < d.n; ++n) {
    for (int y = 0; y < oh; ++y) {
      for (int xo = 0; xo < ow; ++xo) {
        std::memcpy(acc.data(), b.data.data(), sizeof(double) * static_cast<std::size_t>(cout));
        for (int r = 0; r < kh; ++r) {
          const int iy = y * sh - ph + r;
          if (iy < 0 || iy >= d.h) continue;
          for (int s = 0; s < kw; ++s) {
            const int ix = xo * sw - pw + s;
            if (ix < 0 || ix >= d.w) continue;
            const double* px = &x.data[static_cast<std::size_t>(((n * d.h + iy) * d.w + ix) * cin)];
            const double* krow = &k.data[static_cast<std::size_t>(((r * kw + s) * cin) * cout)];
            for (int ci = 0; ci < cin; ++ci) {
              const double v = px[ci];
              const double* kr = krow + static_cast<std::size_t>(ci) * cout;
              for (int co = 0; co < cout; ++co) acc[static_cast<std::size_t>(co)] += v * kr[co];
            }
          }
        }
        double* op = &out.data[static_cast<std::size_t>(((n * oh + y) * ow + xo) * cout)];
        std::memcpy(op, acc.data(), sizeof(double) * static_cast<std::size_t>(cout));
      }
    }
  }

  Node node;
  node.op = Op::Conv2d;
  node.inputs = {input, kernels, bias};
  node.value = std::move(out);
  node.sh = sh;
  node.sw = sw;
  node.ph = ph;
  node.pw = pw;
  node.needs_grad = at(input).needs_grad || at(kernels).needs_grad || at(bias).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::transposed_conv2d(NodeId input, NodeId kernels, NodeId bias, int sh, int sw,
                                       int ph, int pw) {
  const Tensor& x = value(input);
  const Tensor& k = value(kernels);
  const Tensor& b = value(bias);
  const BatchDims d = spatial_dims(x.shape);
  if (k.rank() != 4) {
    throw DimensionError("transposed_conv2d kernels must be rank 4, got " + shape_str(k.shape));
  }
  // Kernel layout matches the adjoint conv2d: (kh, kw, out_channels, in_channels).
  const int kh = k.shape[0], kw = k.shape[1], cout = k.shape[2], cin = k.shape[3];
  if (cin != d.c) {
    throw DimensionError("transposed_conv2d channel mismatch: input has " + std::to_string(d.c) +
                         " channels, kernels expect " + std::to_string(cin));
  }
  if (b.rank() != 1 || b.shape[0] != cout) {
    throw DimensionError("transposed_conv2d bias must have shape (" + std::to_string(cout) + ")");
  }
  const int oh = tconv_out_dim(d.h, kh, sh, ph);
  const int ow = tconv_out_dim(d.w, kw, sw, pw);
  if (oh < 1 || ow < 1) {
    throw ConfigError("transposed_conv2d output would be empty for input " + shape_str(x.shape));
  }

  Shape out_shape = d.batched ? Shape{d.n, oh, ow, cout} : Shape{oh, ow, cout};
  Tensor out = Tensor::zeros(out_shape);
  for (int n = 0; n < d.n; ++n) {
    double* plane = &out.data[static_cast<std::size_t>(n) * oh * ow * cout];
    for (int i = 0; i < oh * ow; ++i) {
      std::memcpy(plane + static_cast<std::size_t>(i) * cout, b.data.data(),
                  sizeof(double) * static_cast<std::size_t>(cout));
    }
    for (int iy = 0; iy < d.h; ++iy) {
      for (int ix = 0; ix < d.w; ++ix) {
        const double* px = &x.data[static_cast<std::size_t>(((n * d.h + iy) * d.w + ix) * cin)];
        for (int r = 0; r < kh; ++r) {
          const int y = iy * sh - ph + r;
          if (y < 0 || y >= oh) continue;
          for (int s = 0; s < kw; ++s) {
            const int xo = ix * sw - pw + s;
            if (xo < 0 || xo >= ow) continue;
            double* op = &out.data[static_cast<std::size_t>(((n * oh + y) * ow + xo) * cout)];
            const double* krs = &k.data[static_cast<std::size_t>(((r * kw + s) * cout) * cin)];
            for (int co = 0; co < cout; ++co) {
              const double* kr = krs + static_cast<std::size_t>(co) * cin;
              double acc = 0.0;
              for (int ci = 0; ci < cin; ++ci) acc += px[ci] * kr[ci];
              op[co] += acc;
            }
          }
        }
      }
    }
  }

  Node node;
  node.op = Op::TConv2d;
  node.inputs = {input, kernels, bias};
  node.value = std::move(out);
  node.sh = sh;
  node.sw = sw;
  node.ph = ph;
  node.pw = pw;
  node.needs_grad = at(input).needs_grad || at(kernels).needs_grad || at(bias).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::dense(NodeId input, NodeId weights, NodeId bias) {
  const Tensor& x = value(input);
  const Tensor& w = value(weights);
  const Tensor& b = value(bias);
  if (w.rank() != 2) throw DimensionError("dense weights must be rank 2");
  const int in_dim = w.shape[0], out_dim = w.shape[1];
  int batch = 1;
  bool batched = false;
  if (x.rank() == 1) {
    if (x.shape[0] != in_dim) {
      throw DimensionError("dense input length " + std::to_string(x.shape[0]) +
                           " does not match weights " + shape_str(w.shape));
    }
  } else if (x.rank() == 2) {
    batched = true;
    batch = x.shape[0];
    if (x.shape[1] != in_dim) {
      throw DimensionError("dense input width " + std::to_string(x.shape[1]) +
                           " does not match weights " + shape_str(w.shape));
    }
  } else {
    throw DimensionError("dense input must be rank 1 or 2, got " + shape_str(x.shape));
  }
  if (b.rank() != 1 || b.shape[0] != out_dim) {
    throw DimensionError("dense bias must have shape (" + std::to_string(out_dim) + ")");
  }

  Tensor out = Tensor::zeros(batched ? Shape{batch, out_dim} : Shape{out_dim});
  for (int n = 0; n < batch; ++n) {
    const double* xr = &x.data[static_cast<std::size_t>(n) * in_dim];
    double* yr = &out.data[static_cast<std::size_t>(n) * out_dim];
    std::memcpy(yr, b.data.data(), sizeof(double) * static_cast<std::size_t>(out_dim));
    for (int i = 0; i < in_dim; ++i) {
      const double v = xr[i];
      const double* wr = &w.data[static_cast<std::size_t>(i) * out_dim];
      for (int j = 0; j < out_dim; ++j) yr[j] += v * wr[j];
    }
  }

  Node node;
  node.op = Op::Dense;
  node.inputs = {input, weights, bias};
  node.value = std::move(out);
  node.needs_grad = at(input).needs_grad || at(weights).needs_grad || at(bias).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::instance_norm(NodeId input, NodeId gain, NodeId shift, double epsilon) {
  const Tensor& x = value(input);
  const Tensor& g = value(gain);
  const Tensor& s = value(shift);
  const BatchDims d = spatial_dims(x.shape);
  if (g.rank() != 1 || g.shape[0] != d.c || s.rank() != 1 || s.shape[0] != d.c) {
    throw DimensionError("instance_norm gain/shift must have shape (" + std::to_string(d.c) + ")");
  }
  const int m = d.h * d.w;

  Tensor out = Tensor::zeros(x.shape);
  std::vector<double> saved(static_cast<std::size_t>(2 * d.n * d.c));
  for (int n = 0; n < d.n; ++n) {
    for (int c = 0; c < d.c; ++c) {
      const std::size_t base = static_cast<std::size_t>(n) * d.h * d.w * d.c + c;
      double mean = 0.0;
      for (int i = 0; i < m; ++i) mean += x.data[base + static_cast<std::size_t>(i) * d.c];
      mean /= m;
      double var = 0.0;
      for (int i = 0; i < m; ++i) {
        const double dv = x.data[base + static_cast<std::size_t>(i) * d.c] - mean;
        var += dv * dv;
      }
      var /= m;
      const double invstd = 1.0 / std::sqrt(var + epsilon);
      const double gc = g.data[static_cast<std::size_t>(c)];
      const double sc = s.data[static_cast<std::size_t>(c)];
      for (int i = 0; i < m; ++i) {
        const std::size_t idx = base + static_cast<std::size_t>(i) * d.c;
        out.data[idx] = (x.data[idx] - mean) * invstd * gc + sc;
      }
      saved[static_cast<std::size_t>(n * d.c + c)] = mean;
      saved[static_cast<std::size_t>(d.n * d.c + n * d.c + c)] = invstd;
    }
  }

  Node node;
  node.op = Op::InstanceNorm;
  node.inputs = {input, gain, shift};
  node.value = std::move(out);
  node.saved = std::move(saved);
  node.a0 = epsilon;
  node.needs_grad = at(input).needs_grad || at(gain).needs_grad || at(shift).needs_grad;
  return push(std::move(node));
}

// Batch norm normalizes every activation across the batch axis only, so a
// batch of identical instances maps exactly to the shift. Gain, shift and
// running statistics all have one entry per feature position.
Graph::NodeId Graph::batch_norm_train(NodeId input, NodeId gain, NodeId shift,
                                      Tensor& running_mean, Tensor& running_var, double momentum,
                                      double epsilon) {
  const Tensor& x = value(input);
  const Tensor& g = value(gain);
  const Tensor& s = value(shift);
  if (x.rank() < 2) throw DimensionError("batch_norm input must have a leading batch dimension");
  const long long n = x.shape[0];
  const long long f = x.size() / n;
  if (n < 2) throw ConfigError("batch_norm in train mode requires a batch of at least 2");
  if (g.size() != f || s.size() != f || running_mean.size() != f || running_var.size() != f) {
    throw DimensionError("batch_norm gain/shift/running stats must have " + std::to_string(f) +
                         " entries");
  }

  Tensor out = Tensor::zeros(x.shape);
  std::vector<double> saved(static_cast<std::size_t>(2 * f));
  for (long long j = 0; j < f; ++j) {
    double mean = 0.0;
    for (long long i = 0; i < n; ++i) mean += x.data[static_cast<std::size_t>(i * f + j)];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (long long i = 0; i < n; ++i) {
      const double dv = x.data[static_cast<std::size_t>(i * f + j)] - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(n);
    const double invstd = 1.0 / std::sqrt(var + epsilon);
    const double gj = g.data[static_cast<std::size_t>(j)];
    const double sj = s.data[static_cast<std::size_t>(j)];
    for (long long i = 0; i < n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(i * f + j);
      out.data[idx] = (x.data[idx] - mean) * invstd * gj + sj;
    }
    running_mean.data[static_cast<std::size_t>(j)] =
        (1.0 - momentum) * running_mean.data[static_cast<std::size_t>(j)] + momentum * mean;
    running_var.data[static_cast<std::size_t>(j)] =
        (1.0 - momentum) * running_var.data[static_cast<std::size_t>(j)] + momentum * var;
    saved[static_cast<std::size_t>(j)] = mean;
    saved[static_cast<std::size_t>(f + j)] = invstd;
  }

  Node node;
  node.op = Op::BatchNormTrain;
  node.inputs = {input, gain, shift};
  node.value = std::move(out);
  node.saved = std::move(saved);
  node.a0 = epsilon;
  node.needs_grad = at(input).needs_grad || at(gain).needs_grad || at(shift).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::batch_norm_eval(NodeId input, NodeId gain, NodeId shift,
                                     const Tensor& running_mean, const Tensor& running_var,
                                     double epsilon) {
  const Tensor& x = value(input);
  const Tensor& g = value(gain);
  const Tensor& s = value(shift);
  if (x.rank() < 2) throw DimensionError("batch_norm input must have a leading batch dimension");
  const long long n = x.shape[0];
  const long long f = x.size() / n;
  if (g.size() != f || s.size() != f || running_mean.size() != f || running_var.size() != f) {
    throw DimensionError("batch_norm gain/shift/running stats must have " + std::to_string(f) +
                         " entries");
  }

  Tensor out = Tensor::zeros(x.shape);
  std::vector<double> saved(static_cast<std::size_t>(2 * f));
  for (long long j = 0; j < f; ++j) {
    const double mean = running_mean.data[static_cast<std::size_t>(j)];
    const double invstd = 1.0 / std::sqrt(running_var.data[static_cast<std::size_t>(j)] + epsilon);
    const double gj = g.data[static_cast<std::size_t>(j)];
    const double sj = s.data[static_cast<std::size_t>(j)];
    for (long long i = 0; i < n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(i * f + j);
      out.data[idx] = (x.data[idx] - mean) * invstd * gj + sj;
    }
    saved[static_cast<std::size_t>(j)] = mean;
    saved[static_cast<std::size_t>(f + j)] = invstd;
  }

  Node node;
  node.op = Op::BatchNormEval;
  node.inputs = {input, gain, shift};
  node.value = std::move(out);
  node.saved = std::move(saved);
  node.a0 = epsilon;
  node.needs_grad = at(input).needs_grad || at(gain).needs_grad || at(shift).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::relu(NodeId input) {
  Node node;
  node.op = Op::Relu;
  node.inputs = {input};
  node.value = value(input);
  for (double& v : node.value.data) v = v > 0.0 ? v : 0.0;
  node.needs_grad = at(input).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::leaky_relu(NodeId input, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("leaky_relu slope must be in (0,1)");
  Node node;
  node.op = Op::LeakyRelu;
  node.inputs = {input};
  node.value = value(input);
  node.a0 = slope;
  for (double& v : node.value.data) v = v > 0.0 ? v : slope * v;
  node.needs_grad = at(input).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::sigmoid(NodeId input) {
  Node node;
  node.op = Op::Sigmoid;
  node.inputs = {input};
  node.value = value(input);
  for (double& v : node.value.data) v = 1.0 / (1.0 + std::exp(-v));
  node.needs_grad = at(input).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  if (!same_shape(value(a).shape, value(b).shape)) throw DimensionError("add shape mismatch");
  Node node;
  node.op = Op::Add;
  node.inputs = {a, b};
  node.value = value(a);
  const Tensor& vb = value(b);
  for (std::size_t i = 0; i < node.value.data.size(); ++i) node.value.data[i] += vb.data[i];
  node.needs_grad = at(a).needs_grad || at(b).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
  if (!same_shape(value(a).shape, value(b).shape)) throw DimensionError("sub shape mismatch");
  Node node;
  node.op = Op::Sub;
  node.inputs = {a, b};
  node.value = value(a);
  const Tensor& vb = value(b);
  for (std::size_t i = 0; i < node.value.data.size(); ++i) node.value.data[i] -= vb.data[i];
  node.needs_grad = at(a).needs_grad || at(b).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
  if (!same_shape(value(a).shape, value(b).shape)) throw DimensionError("mul shape mismatch");
  Node node;
  node.op = Op::Mul;
  node.inputs = {a, b};
  node.value = value(a);
  const Tensor& vb = value(b);
  for (std::size_t i = 0; i < node.value.data.size(); ++i) node.value.data[i] *= vb.data[i];
  node.needs_grad = at(a).needs_grad || at(b).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::scale(NodeId a, double factor) {
  Node node;
  node.op = Op::Scale;
  node.inputs = {a};
  node.value = value(a);
  node.a0 = factor;
  for (double& v : node.value.data) v *= factor;
  node.needs_grad = at(a).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::rsub_const(double c, NodeId a) {
  Node node;
  node.op = Op::RsubConst;
  node.inputs = {a};
  node.value = value(a);
  node.a0 = c;
  for (double& v : node.value.data) v = c - v;
  node.needs_grad = at(a).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::abs(NodeId a) {
  Node node;
  node.op = Op::Abs;
  node.inputs = {a};
  node.value = value(a);
  for (double& v : node.value.data) v = std::fabs(v);
  node.needs_grad = at(a).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::log_clamped(NodeId a, double lo, double hi) {
  Node node;
  node.op = Op::LogClamped;
  node.inputs = {a};
  node.value = value(a);
  node.a0 = lo;
  node.a1 = hi;
  for (double& v : node.value.data) {
    double c = v < lo ? lo : (v > hi ? hi : v);
    v = std::log(c);
  }
  node.needs_grad = at(a).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::mean_all(NodeId a) {
  Node node;
  node.op = Op::MeanAll;
  node.inputs = {a};
  const Tensor& v = value(a);
  double sum = 0.0;
  for (double x : v.data) sum += x;
  node.value = Tensor({1}, {sum / static_cast<double>(v.size())});
  node.needs_grad = at(a).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::sum_all(NodeId a) {
  Node node;
  node.op = Op::SumAll;
  node.inputs = {a};
  const Tensor& v = value(a);
  double sum = 0.0;
  for (double x : v.data) sum += x;
  node.value = Tensor({1}, {sum});
  node.needs_grad = at(a).needs_grad;
  return push(std::move(node));
}

Graph::NodeId Graph::reshape(NodeId a, Shape shape) {
  const Tensor& v = value(a);
  if (numel(shape) != v.size()) {
    throw DimensionError("reshape to " + shape_str(shape) + " does not preserve element count");
  }
  Node node;
  node.op = Op::Reshape;
  node.inputs = {a};
  node.value = Tensor(std::move(shape), v.data);
  node.needs_grad = at(a).needs_grad;
  return push(std::move(node));
}

void Graph::backward(NodeId loss) {
  const Tensor& lv = value(loss);
  if (lv.size() != 1) {
    throw UsageError("backward requires a scalar loss node, got shape " + shape_str(lv.shape));
  }
  grad_buf(loss)[0] += 1.0;
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = at(id);
    if (n.grad.empty() || !n.needs_grad) continue;
    if (n.op == Op::Param) {
      if (n.bound != nullptr) n.bound->accumulate_grad(n.grad);
      continue;
    }
    backward_node(id);
  }
}

void Graph::backward_node(NodeId id) {
  Node& n = at(id);
  const std::vector<double>& g = n.grad;

  auto input_needs = [&](int slot) { return at(n.inputs[static_cast<std::size_t>(slot)]).needs_grad; };
  auto in_val = [&](int slot) -> const Tensor& { return value(n.inputs[static_cast<std::size_t>(slot)]); };
  auto in_grad = [&](int slot) -> std::vector<double>& { return grad_buf(n.inputs[static_cast<std::size_t>(slot)]); };

  switch (n.op) {
    case Op::Constant:
    case Op::Param:
      break;

    case Op::Conv2d: {
      const Tensor& x = in_val(0);
      const Tensor& k = in_val(1);
      const BatchDims d = spatial_dims(x.shape);
      const int kh = k.shape[0], kw = k.shape[1], cin = k.shape[2], cout = k.shape[3];
      const BatchDims od = spatial_dims(n.value.shape);
      const bool need_x = input_needs(0), need_k = input_needs(1), need_b = input_needs(2);
      std::vector<double>* gx = need_x ? &in_grad(0) : nullptr;
      std::vector<double>* gk = need_k ? &in_grad(1) : nullptr;
      std::vector<double>* gb = need_b ? &in_grad(2) : nullptr;
      for (int nn = 0; nn < d.n; ++nn) {
        for (int y = 0; y < od.h; ++y) {
          for (int xo = 0; xo < od.w; ++xo) {
            const double* gp = &g[static_cast<std::size_t>(((nn * od.h + y) * od.w + xo) * cout)];
            if (gb != nullptr) {
              for (int co = 0; co < cout; ++co) (*gb)[static_cast<std::size_t>(co)] += gp[co];
            }
            for (int r = 0; r < kh; ++r) {
              const int iy = y * n.sh - n.ph + r;
              if (iy < 0 || iy >= d.h) continue;
              for (int s = 0; s < kw; ++s) {
                const int ix = xo * n.sw - n.pw + s;
                if (ix < 0 || ix >= d.w) continue;
                const std::size_t xoff = static_cast<std::size_t>(((nn * d.h + iy) * d.w + ix) * cin);
                const std::size_t koff = static_cast<std::size_t>(((r * kw + s) * cin) * cout);
                for (int ci = 0; ci < cin; ++ci) {
                  const double* kr = &k.data[koff + static_cast<std::size_t>(ci) * cout];
                  if (gx != nullptr) {
                    double acc = 0.0;
                    for (int co = 0; co < cout; ++co) acc += kr[co] * gp[co];
                    (*gx)[xoff + static_cast<std::size_t>(ci)] += acc;
                  }
                  if (gk != nullptr) {
                    const double v = x.data[xoff + static_cast<std::size_t>(ci)];
                    double* kgr = &(*gk)[koff + static_cast<std::size_t>(ci) * cout];
                    for (int co = 0; co < cout; ++co) kgr[co] += v * gp[co];
                  }
                }
              }
            }
          }
        }
      }
      break;
    }

    case Op::TConv2d: {
      const Tensor& x = in_val(0);
      const Tensor& k = in_val(1);
      const BatchDims d = spatial_dims(x.shape);
      const int kh = k.shape[0], kw = k.shape[1], cout = k.shape[2], cin = k.shape[3];
      const BatchDims od = spatial_dims(n.value.shape);
      const bool need_x = input_needs(0), need_k = input_needs(1), need_b = input_needs(2);
      std::vector<double>* gx = need_x ? &in_grad(0) : nullptr;
      std::vector<double>* gk = need_k ? &in_grad(1) : nullptr;
      std::vector<double>* gb = need_b ? &in_grad(2) : nullptr;
      if (gb != nullptr) {
        for (int nn = 0; nn < od.n; ++nn) {
          const double* plane = &g[static_cast<std::size_t>(nn) * od.h * od.w * cout];
          for (int i = 0; i < od.h * od.w; ++i) {
            for (int co = 0; co < cout; ++co) {
              (*gb)[static_cast<std::size_t>(co)] += plane[static_cast<std::size_t>(i) * cout + co];
            }
          }
        }
      }
      for (int nn = 0; nn < d.n; ++nn) {
        for (int iy = 0; iy < d.h; ++iy) {
          for (int ix = 0; ix < d.w; ++ix) {
            const std::size_t xoff = static_cast<std::size_t>(((nn * d.h + iy) * d.w + ix) * cin);
            for (int r = 0; r < kh; ++r) {
              const int y = iy * n.sh - n.ph + r;
              if (y < 0 || y >= od.h) continue;
              for (int s = 0; s < kw; ++s) {
                const int xo = ix * n.sw - n.pw + s;
                if (xo < 0 || xo >= od.w) continue;
                const double* gp = &g[static_cast<std::size_t>(((nn * od.h + y) * od.w + xo) * cout)];
                const std::size_t koff = static_cast<std::size_t>(((r * kw + s) * cout) * cin);
                for (int co = 0; co < cout; ++co) {
                  const double gv = gp[co];
                  const double* kr = &k.data[koff + static_cast<std::size_t>(co) * cin];
                  if (gx != nullptr) {
                    double* xg = &(*gx)[xoff];
                    for (int ci = 0; ci < cin; ++ci) xg[ci] += gv * kr[ci];
                  }
                  if (gk != nullptr) {
                    const double* xp = &x.data[xoff];
                    double* kgr = &(*gk)[koff + static_cast<std::size_t>(co) * cin];
                    for (int ci = 0; ci < cin; ++ci) kgr[ci] += gv * xp[ci];
                  }
                }
              }
            }
          }
        }
      }
      break;
    }

    case Op::Dense: {
      const Tensor& x = in_val(0);
      const Tensor& w = in_val(1);
      const int in_dim = w.shape[0], out_dim = w.shape[1];
      const int batch = x.rank() == 2 ? x.shape[0] : 1;
      const bool need_x = input_needs(0), need_w = input_needs(1), need_b = input_needs(2);
      std::vector<double>* gx = need_x ? &in_grad(0) : nullptr;
      std::vector<double>* gw = need_w ? &in_grad(1) : nullptr;
      std::vector<double>* gb = need_b ? &in_grad(2) : nullptr;
      for (int nn = 0; nn < batch; ++nn) {
        const double* gr = &g[static_cast<std::size_t>(nn) * out_dim];
        const double* xr = &x.data[static_cast<std::size_t>(nn) * in_dim];
        if (gb != nullptr) {
          for (int j = 0; j < out_dim; ++j) (*gb)[static_cast<std::size_t>(j)] += gr[j];
        }
        for (int i = 0; i < in_dim; ++i) {
          const double* wr = &w.data[static_cast<std::size_t>(i) * out_dim];
          if (gx != nullptr) {
            double acc = 0.0;
            for (int j = 0; j < out_dim; ++j) acc += wr[j] * gr[j];
            (*gx)[static_cast<std::size_t>(nn) * in_dim + static_cast<std::size_t>(i)] += acc;
          }
          if (gw != nullptr) {
            const double v = xr[i];
            double* wg = &(*gw)[static_cast<std::size_t>(i) * out_dim];
            for (int j = 0; j < out_dim; ++j) wg[j] += v * gr[j];
          }
        }
      }
      break;
    }

    case Op::InstanceNorm: {
      const Tensor& x = in_val(0);
      const Tensor& gain = in_val(1);
      const BatchDims d = spatial_dims(x.shape);
      const int m = d.h * d.w;
      const bool need_x = input_needs(0), need_g = input_needs(1), need_s = input_needs(2);
      std::vector<double>* gx = need_x ? &in_grad(0) : nullptr;
      std::vector<double>* gg = need_g ? &in_grad(1) : nullptr;
      std::vector<double>* gs = need_s ? &in_grad(2) : nullptr;
      for (int nn = 0; nn < d.n; ++nn) {
        for (int c = 0; c < d.c; ++c) {
          const double mean = n.saved[static_cast<std::size_t>(nn * d.c + c)];
          const double invstd = n.saved[static_cast<std::size_t>(d.n * d.c + nn * d.c + c)];
          const std::size_t base = static_cast<std::size_t>(nn) * d.h * d.w * d.c + c;
          double sum_g = 0.0, sum_gx = 0.0;
          for (int i = 0; i < m; ++i) {
            const std::size_t idx = base + static_cast<std::size_t>(i) * d.c;
            const double xh = (x.data[idx] - mean) * invstd;
            sum_g += g[idx];
            sum_gx += g[idx] * xh;
          }
          if (gg != nullptr) (*gg)[static_cast<std::size_t>(c)] += sum_gx;
          if (gs != nullptr) (*gs)[static_cast<std::size_t>(c)] += sum_g;
          if (gx != nullptr) {
            const double gc = gain.data[static_cast<std::size_t>(c)];
            const double mg = sum_g / m;
            const double mgx = sum_gx / m;
            for (int i = 0; i < m; ++i) {
              const std::size_t idx = base + static_cast<std::size_t>(i) * d.c;
              const double xh = (x.data[idx] - mean) * invstd;
              (*gx)[idx] += gc * invstd * (g[idx] - mg - xh * mgx);
            }
          }
        }
      }
      break;
    }

    case Op::BatchNormTrain: {
      const Tensor& x = in_val(0);
      const Tensor& gain = in_val(1);
      const long long nb = x.shape[0];
      const long long f = x.size() / nb;
      const bool need_x = input_needs(0), need_g = input_needs(1), need_s = input_needs(2);
      std::vector<double>* gx = need_x ? &in_grad(0) : nullptr;
      std::vector<double>* gg = need_g ? &in_grad(1) : nullptr;
      std::vector<double>* gs = need_s ? &in_grad(2) : nullptr;
      for (long long j = 0; j < f; ++j) {
        const double mean = n.saved[static_cast<std::size_t>(j)];
        const double invstd = n.saved[static_cast<std::size_t>(f + j)];
        double sum_g = 0.0, sum_gx = 0.0;
        for (long long i = 0; i < nb; ++i) {
          const std::size_t idx = static_cast<std::size_t>(i * f + j);
          const double xh = (x.data[idx] - mean) * invstd;
          sum_g += g[idx];
          sum_gx += g[idx] * xh;
        }
        if (gg != nullptr) (*gg)[static_cast<std::size_t>(j)] += sum_gx;
        if (gs != nullptr) (*gs)[static_cast<std::size_t>(j)] += sum_g;
        if (gx != nullptr) {
          const double gj = gain.data[static_cast<std::size_t>(j)];
          const double mg = sum_g / static_cast<double>(nb);
          const double mgx = sum_gx / static_cast<double>(nb);
          for (long long i = 0; i < nb; ++i) {
            const std::size_t idx = static_cast<std::size_t>(i * f + j);
            const double xh = (x.data[idx] - mean) * invstd;
            (*gx)[idx] += gj * invstd * (g[idx] - mg - xh * mgx);
          }
        }
      }
      break;
    }

    case Op::BatchNormEval: {
      const Tensor& x = in_val(0);
      const Tensor& gain = in_val(1);
      const long long nb = x.shape[0];
      const long long f = x.size() / nb;
      const bool need_x = input_needs(0), need_g = input_needs(1), need_s = input_needs(2);
      std::vector<double>* gx = need_x ? &in_grad(0) : nullptr;
      std::vector<double>* gg = need_g ? &in_grad(1) : nullptr;
      std::vector<double>* gs = need_s ? &in_grad(2) : nullptr;
      for (long long j = 0; j < f; ++j) {
        const double mean = n.saved[static_cast<std::size_t>(j)];
        const double invstd = n.saved[static_cast<std::size_t>(f + j)];
        const double gj = gain.data[static_cast<std::size_t>(j)];
        for (long long i = 0; i < nb; ++i) {
          const std::size_t idx = static_cast<std::size_t>(i * f + j);
          if (gx != nullptr) (*gx)[idx] += g[idx] * gj * invstd;
          if (gg != nullptr) {
            (*gg)[static_cast<std::size_t>(j)] += g[idx] * (x.data[idx] - mean) * invstd;
          }
          if (gs != nullptr) (*gs)[static_cast<std::size_t>(j)] += g[idx];
        }
      }
      break;
    }

    case Op::Relu: {
      const Tensor& x = in_val(0);
      std::vector<double>& gx = in_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x.data[i] > 0.0) gx[i] += g[i];
      }
      break;
    }

    case Op::LeakyRelu: {
      const Tensor& x = in_val(0);
      std::vector<double>& gx = in_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        gx[i] += g[i] * (x.data[i] > 0.0 ? 1.0 : n.a0);
      }
      break;
    }

    case Op::Sigmoid: {
      std::vector<double>& gx = in_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = n.value.data[i];
        gx[i] += g[i] * s * (1.0 - s);
      }
      break;
    }

    case Op::Add: {
      if (input_needs(0)) {
        std::vector<double>& ga = in_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (input_needs(1)) {
        std::vector<double>& gb = in_grad(1);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
      break;
    }

    case Op::Sub: {
      if (input_needs(0)) {
        std::vector<double>& ga = in_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (input_needs(1)) {
        std::vector<double>& gb = in_grad(1);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
      break;
    }

    case Op::Mul: {
      const Tensor& a = in_val(0);
      const Tensor& b = in_val(1);
      if (input_needs(0)) {
        std::vector<double>& ga = in_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.data[i];
      }
      if (input_needs(1)) {
        std::vector<double>& gb = in_grad(1);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.data[i];
      }
      break;
    }

    case Op::Scale: {
      std::vector<double>& gx = in_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.a0;
      break;
    }

    case Op::RsubConst: {
      std::vector<double>& gx = in_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
      break;
    }

    case Op::Abs: {
      const Tensor& x = in_val(0);
      std::vector<double>& gx = in_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x.data[i] > 0.0) {
          gx[i] += g[i];
        } else if (x.data[i] < 0.0) {
          gx[i] -= g[i];
        }
      }
      break;
    }

    case Op::LogClamped: {
      const Tensor& x = in_val(0);
      std::vector<double>& gx = in_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x.data[i] > n.a0 && x.data[i] < n.a1) gx[i] += g[i] / x.data[i];
      }
      break;
    }

    case Op::MeanAll: {
      std::vector<double>& gx = in_grad(0);
      const double gv = g[0] / static_cast<double>(gx.size());
      for (double& v : gx) v += gv;
      break;
    }

    case Op::SumAll: {
      std::vector<double>& gx = in_grad(0);
      for (double& v : gx) v += g[0];
      break;
    }

    case Op::Reshape: {
      std::vector<double>& gx = in_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      break;
    }
  }
}

}  // namespace cropgan
