#include <cmath>
#include <cstring>
#include <functional>

#include "cropgan/adam.hpp"
#include "cropgan/gradcheck.hpp"
#include "cropgan/graph.hpp"
#include "cropgan/rng.hpp"
#include "cropgan/tensor.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cropgan;
using cropgan::test::dot;
using cropgan::test::projection_weights;
using cropgan::test::random_tensor;
using cropgan::test::random_tensor_offset;

namespace {

// Central-difference check for a graph op with respect to one of its
// tensor arguments. `build` must construct the op output node from the
// probe node.
double check_op_gradient(const Tensor& probe, Rng& rng,
                         const std::function<Graph::NodeId(Graph&, Graph::NodeId)>& build,
                         double eps = 1e-6) {
  Graph probe_graph;
  Tensor probe_param = probe;
  probe_param.set_requires_grad(true);
  const auto out_numel = [&] {
    Graph g;
    return g.value(build(g, g.constant(probe))).size();
  }();
  Rng wrng(rng.next_u64());
  const std::vector<double> w = projection_weights(out_numel, wrng);

  const auto forward = [&](const Tensor& x) {
    Graph g;
    const auto out = build(g, g.constant(x));
    return dot(g.value(out).data, w);
  };
  const auto gradient = [&](const Tensor& x) {
    Graph g;
    Tensor p = x;
    p.set_requires_grad(true);
    const auto xid = g.param(p);
    const auto out = build(g, xid);
    const auto loss = g.sum_all(g.mul(out, g.constant(Tensor(g.value(out).shape, w))));
    g.backward(loss);
    return p.grad;
  };
  return finite_diff_check(forward, gradient, probe, eps);
}

}  // namespace

TEST_CASE("conv2d matches hand-computed convolutions") {
  Graph g;
  SUBCASE("all-ones 3x3 input with all-ones 2x2 kernel") {
    const auto x = g.constant(Tensor::full({3, 3, 1}, 1.0));
    const auto k = g.constant(Tensor::full({2, 2, 1, 1}, 1.0));
    const auto b = g.constant(Tensor::zeros({1}));
    const auto out = g.conv2d(x, k, b, 1, 1, 0, 0);
    CHECK(g.value(out).shape == Shape{2, 2, 1});
    for (double v : g.value(out).data) CHECK(v == doctest::Approx(4.0).epsilon(1e-15));
  }
  SUBCASE("1x1 identity kernel preserves the input") {
    Rng rng(7);
    const Tensor input = random_tensor({4, 5, 1}, rng);
    const auto x = g.constant(input);
    const auto k = g.constant(Tensor::full({1, 1, 1, 1}, 1.0));
    const auto b = g.constant(Tensor::zeros({1}));
    const auto out = g.conv2d(x, k, b, 1, 1, 0, 0);
    CHECK(g.value(out).data == input.data);
  }
  SUBCASE("2x2 input against a diagonal difference kernel") {
    const auto x = g.constant(Tensor({2, 2, 1}, {1, 2, 3, 4}));
    const auto k = g.constant(Tensor({2, 2, 1, 1}, {1, 0, 0, -1}));
    const auto b = g.constant(Tensor::zeros({1}));
    const auto out = g.conv2d(x, k, b, 1, 1, 0, 0);
    CHECK(g.scalar(g.reshape(out, {1})) == -3.0);
  }
  SUBCASE("channel mismatch raises a dimension error") {
    const auto x = g.constant(Tensor::zeros({3, 3, 2}));
    const auto k = g.constant(Tensor::zeros({2, 2, 1, 1}));
    const auto b = g.constant(Tensor::zeros({1}));
    CHECK_THROWS_AS(g.conv2d(x, k, b, 1, 1, 0, 0), DimensionError);
  }
  SUBCASE("empty output raises a configuration error") {
    const auto x = g.constant(Tensor::zeros({2, 2, 1}));
    const auto k = g.constant(Tensor::zeros({3, 3, 1, 1}));
    const auto b = g.constant(Tensor::zeros({1}));
    CHECK_THROWS_AS(g.conv2d(x, k, b, 1, 1, 0, 0), ConfigError);
  }
}

TEST_CASE("transposed_conv2d shapes and values") {
  Graph g;
  SUBCASE("decoder geometry 1x2x32 -> 3x3x16") {
    const auto x = g.constant(Tensor::zeros({1, 2, 32}));
    const auto k = g.constant(Tensor::zeros({3, 2, 16, 32}));
    const auto b = g.constant(Tensor::zeros({16}));
    const auto out = g.transposed_conv2d(x, k, b, 1, 1, 0, 0);
    CHECK(g.value(out).shape == Shape{3, 3, 16});
  }
  SUBCASE("single input value broadcast through an all-ones kernel") {
    const auto x = g.constant(Tensor({1, 1, 1}, {5.0}));
    const auto k = g.constant(Tensor::full({2, 2, 1, 1}, 1.0));
    const auto b = g.constant(Tensor::zeros({1}));
    const auto out = g.transposed_conv2d(x, k, b, 1, 1, 0, 0);
    CHECK(g.value(out).shape == Shape{2, 2, 1});
    for (double v : g.value(out).data) CHECK(v == 5.0);
  }
}

TEST_CASE("conv2d and transposed_conv2d are adjoint") {
  // <conv2d(x,K), y> == <x, tconv(y,K)> on every generator stage geometry.
  struct Geom {
    int h, w, cin, cout, kh, kw;
  };
  const Geom stages[] = {
      {9, 6, 1, 4, 3, 2}, {7, 5, 4, 8, 3, 2}, {5, 4, 8, 16, 3, 2}, {3, 3, 16, 32, 3, 2}};
  Rng rng(123);
  for (const Geom& geom : stages) {
    for (int trial = 0; trial < 5; ++trial) {
      const Tensor x = random_tensor({geom.h, geom.w, geom.cin}, rng);
      const Tensor k = random_tensor({geom.kh, geom.kw, geom.cin, geom.cout}, rng);
      const int oh = geom.h - geom.kh + 1, ow = geom.w - geom.kw + 1;
      const Tensor y = random_tensor({oh, ow, geom.cout}, rng);

      Graph g;
      const auto conv =
          g.conv2d(g.constant(x), g.constant(k), g.constant(Tensor::zeros({geom.cout})), 1, 1, 0, 0);
      const auto tconv = g.transposed_conv2d(g.constant(y), g.constant(k),
                                             g.constant(Tensor::zeros({geom.cin})), 1, 1, 0, 0);
      const double lhs = dot(g.value(conv).data, y.data);
      const double rhs = dot(x.data, g.value(tconv).data);
      CHECK(std::fabs(lhs - rhs) <= 1e-10 * std::max(1.0, std::fabs(lhs)));
    }
  }
}

TEST_CASE("activations") {
  Graph g;
  const auto x = g.constant(Tensor({5}, {-1.0, -3.5, 2.0, 0.0, 0.7}));
  SUBCASE("leaky_relu with slope 0.2") {
    const auto out = g.leaky_relu(x, 0.2);
    CHECK(g.value(out).data[0] == doctest::Approx(-0.2).epsilon(1e-15));
    CHECK(g.value(out).data[2] == 2.0);
  }
  SUBCASE("relu") {
    const auto out = g.relu(x);
    CHECK(g.value(out).data[1] == 0.0);
    CHECK(g.value(out).data[2] == 2.0);
  }
  SUBCASE("sigmoid is 0.5 at zero and bounded") {
    const auto out = g.sigmoid(x);
    CHECK(g.value(out).data[3] == 0.5);
    for (double v : g.value(out).data) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
  SUBCASE("slope outside (0,1) is rejected") {
    CHECK_THROWS_AS(g.leaky_relu(x, 1.5), ConfigError);
  }
}

TEST_CASE("instance_norm statistics") {
  SUBCASE("centering") {
    Graph g;
    const auto x = g.constant(Tensor({4, 1, 1}, {1, 2, 3, 4}));
    const auto out = g.instance_norm(x, g.constant(Tensor::full({1}, 1.0)),
                                     g.constant(Tensor::zeros({1})), 1e-5);
    double mean = 0.0;
    for (double v : g.value(out).data) mean += v;
    mean /= 4.0;
    CHECK(std::fabs(mean) < 1e-12);
  }
  SUBCASE("constant channel maps to the shift") {
    Graph g;
    const auto x = g.constant(Tensor::full({3, 1, 1}, 5.0));
    const auto out = g.instance_norm(x, g.constant(Tensor::full({1}, 1.0)),
                                     g.constant(Tensor::zeros({1})), 1e-5);
    for (double v : g.value(out).data) CHECK(v == 0.0);
  }
  SUBCASE("gain and shift apply the affine law") {
    Rng rng(99);
    Graph g;
    const auto x = g.constant(random_tensor({8, 8, 1}, rng));
    const auto out = g.instance_norm(x, g.constant(Tensor::full({1}, 2.0)),
                                     g.constant(Tensor::full({1}, 3.0)), 1e-5);
    const auto& d = g.value(out).data;
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(d.size());
    double var = 0.0;
    for (double v : d) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d.size());
    CHECK(mean == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(std::sqrt(var) == doctest::Approx(2.0).epsilon(1e-3));
  }
  SUBCASE("unit variance within epsilon bias for random channels") {
    Rng rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
      Graph g;
      const auto x = g.constant(random_tensor({9, 6, 3}, rng, 0.0, 1.0));
      const auto out = g.instance_norm(x, g.constant(Tensor::full({3}, 1.0)),
                                       g.constant(Tensor::zeros({3})), 1e-5);
      const auto& v = g.value(out);
      for (int c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (int i = 0; i < 54; ++i) mean += v.data[static_cast<std::size_t>(i * 3 + c)];
        mean /= 54.0;
        for (int i = 0; i < 54; ++i) {
          const double dv = v.data[static_cast<std::size_t>(i * 3 + c)] - mean;
          var += dv * dv;
        }
        var /= 54.0;
        CHECK(std::fabs(mean) < 1e-10);
        CHECK(var > 1.0 - 1e-3);
        CHECK(var < 1.0 + 1e-3);
      }
    }
  }
}

TEST_CASE("batch_norm") {
  SUBCASE("two identical instances normalize to the shift") {
    Graph g;
    Rng rng(5);
    Tensor one = random_tensor({2, 3, 2}, rng);
    Tensor batch = Tensor::zeros({2, 2, 3, 2});
    std::memcpy(batch.data.data(), one.data.data(), one.data.size() * sizeof(double));
    std::memcpy(batch.data.data() + one.data.size(), one.data.data(),
                one.data.size() * sizeof(double));
    Tensor rm = Tensor::zeros({12}), rv = Tensor::full({12}, 1.0);
    const auto out = g.batch_norm_train(g.constant(batch), g.constant(Tensor::full({12}, 1.0)),
                                        g.constant(Tensor::zeros({12})), rm, rv, 0.1, 1e-5);
    for (double v : g.value(out).data) CHECK(std::fabs(v) < 1e-9);
  }
  SUBCASE("train mode rejects a batch of one") {
    Graph g;
    Tensor rm = Tensor::zeros({9}), rv = Tensor::full({9}, 1.0);
    const auto x = g.constant(Tensor::zeros({1, 3, 3, 1}));
    CHECK_THROWS_AS(g.batch_norm_train(x, g.constant(Tensor::full({9}, 1.0)),
                                       g.constant(Tensor::zeros({9})), rm, rv, 0.1, 1e-5),
                    ConfigError);
  }
  SUBCASE("eval mode is deterministic under frozen stats") {
    Rng rng(6);
    const Tensor x = random_tensor({3, 2, 2, 2}, rng);
    const Tensor rm = random_tensor({8}, rng);
    Tensor rv = random_tensor({8}, rng, 0.5, 1.5);
    Graph g1, g2;
    const auto o1 = g1.batch_norm_eval(g1.constant(x), g1.constant(Tensor::full({8}, 1.0)),
                                       g1.constant(Tensor::zeros({8})), rm, rv, 1e-5);
    const auto o2 = g2.batch_norm_eval(g2.constant(x), g2.constant(Tensor::full({8}, 1.0)),
                                       g2.constant(Tensor::zeros({8})), rm, rv, 1e-5);
    CHECK(g1.value(o1).data == g2.value(o2).data);
  }
  SUBCASE("running mean converges to the data mean") {
    Rng rng(77);
    Tensor rm = Tensor::zeros({4}), rv = Tensor::full({4}, 1.0);
    for (int step = 0; step < 200; ++step) {
      Graph g;
      Tensor batch = Tensor::zeros({16, 2, 2, 1});
      for (double& v : batch.data) v = rng.normal();
      g.batch_norm_train(g.constant(batch), g.constant(Tensor::full({4}, 1.0)),
                         g.constant(Tensor::zeros({4})), rm, rv, 0.1, 1e-5);
    }
    for (int j = 0; j < 4; ++j) {
      CHECK(std::fabs(rm.data[j]) < 0.1);
      CHECK(std::fabs(rv.data[j] - 1.0) < 0.35);
    }
  }
}

TEST_CASE("dense layer") {
  Graph g;
  SUBCASE("identity weights act as the identity") {
    const auto x = g.constant(Tensor({3}, {1.5, -2.0, 0.25}));
    Tensor eye = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i) eye.data[static_cast<std::size_t>(i * 3 + i)] = 1.0;
    const auto out = g.dense(x, g.constant(eye), g.constant(Tensor::zeros({3})));
    CHECK(g.value(out).data == g.value(x).data);
  }
  SUBCASE("affine map with bias") {
    const auto x = g.constant(Tensor({2}, {1, 2}));
    Tensor eye = Tensor::zeros({2, 2});
    eye.data[0] = 1.0;
    eye.data[3] = 1.0;
    const auto out = g.dense(x, g.constant(eye), g.constant(Tensor({2}, {10, 20})));
    CHECK(g.value(out).data == std::vector<double>{11.0, 22.0});
  }
  SUBCASE("8 -> 4 -> 1 chain reproduces the classifier head shapes") {
    Rng rng(3);
    const auto x = g.constant(random_tensor({8}, rng));
    const auto h = g.dense(x, g.constant(random_tensor({8, 4}, rng)),
                           g.constant(Tensor::zeros({4})));
    CHECK(g.value(h).shape == Shape{4});
    const auto out = g.dense(h, g.constant(random_tensor({4, 1}, rng)),
                             g.constant(Tensor::zeros({1})));
    CHECK(g.value(out).shape == Shape{1});
  }
  SUBCASE("length mismatch is rejected") {
    const auto x = g.constant(Tensor({3}, {1, 2, 3}));
    CHECK_THROWS_AS(g.dense(x, g.constant(Tensor::zeros({2, 2})), g.constant(Tensor::zeros({2}))),
                    DimensionError);
  }
}

TEST_CASE("backward semantics") {
  SUBCASE("sum gradient is all ones") {
    Tensor x({3}, {0.5, -1.0, 2.0});
    x.set_requires_grad(true);
    Graph g;
    g.backward(g.sum_all(g.param(x)));
    CHECK(x.grad == std::vector<double>{1.0, 1.0, 1.0});
  }
  SUBCASE("gradient of sum of squares") {
    Tensor x({2}, {1.0, -2.0});
    x.set_requires_grad(true);
    Graph g;
    const auto xid = g.param(x);
    g.backward(g.sum_all(g.mul(xid, xid)));
    CHECK(x.grad == std::vector<double>{2.0, -4.0});
  }
  SUBCASE("backward accumulates until reset") {
    Tensor x({2}, {1.0, 1.0});
    x.set_requires_grad(true);
    {
      Graph g;
      g.backward(g.sum_all(g.param(x)));
    }
    {
      Graph g;
      g.backward(g.sum_all(g.param(x)));
    }
    CHECK(x.grad == std::vector<double>{2.0, 2.0});
    x.zero_grad();
    CHECK(x.grad == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("non-scalar loss is a usage error") {
    Tensor x({2}, {1.0, 1.0});
    x.set_requires_grad(true);
    Graph g;
    const auto xid = g.param(x);
    CHECK_THROWS_AS(g.backward(xid), UsageError);
  }
  SUBCASE("same seed gives identical graph traces") {
    auto run = [](std::uint64_t seed) {
      Rng rng(seed);
      Tensor x = random_tensor({4, 3, 2}, rng);
      x.set_requires_grad(true);
      Graph g;
      const auto xid = g.param(x);
      const auto out = g.leaky_relu(
          g.instance_norm(xid, g.constant(Tensor::full({2}, 1.0)),
                          g.constant(Tensor::zeros({2})), 1e-5),
          0.2);
      g.backward(g.mean_all(out));
      return std::make_pair(g.size(), x.grad);
    };
    const auto a = run(42);
    const auto b = run(42);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }
}

TEST_CASE("adam optimizer") {
  SUBCASE("first step moves by almost exactly -lr on unit gradient") {
    Tensor p({1}, {1.0});
    p.set_requires_grad(true);
    p.grad[0] = 1.0;
    AdamState st;
    st.learning_rate = 0.005;
    st.init({&p});
    adam_step({&p}, st);
    const double expected_delta = -0.005 * (1.0 / (1.0 + 1e-8));
    CHECK(p.data[0] - 1.0 == doctest::Approx(expected_delta).epsilon(1e-12));
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p({3}, {1.0, -2.0, 0.5});
    p.set_requires_grad(true);
    AdamState st;
    st.init({&p});
    adam_step({&p}, st);
    CHECK(p.data == std::vector<double>{1.0, -2.0, 0.5});
  }
  SUBCASE("identical runs are bit-identical") {
    auto run = [](std::uint64_t seed) {
      Rng rng(seed);
      Tensor p = random_tensor({10}, rng);
      p.set_requires_grad(true);
      AdamState st;
      st.init({&p});
      for (int i = 0; i < 25; ++i) {
        for (std::size_t j = 0; j < p.data.size(); ++j) p.grad[j] = rng.normal();
        adam_step({&p}, st);
        p.zero_grad();
      }
      return p.data;
    };
    CHECK(run(11) == run(11));
  }
  SUBCASE("step counter advances by one per step") {
    Tensor p({1}, {0.0});
    p.set_requires_grad(true);
    AdamState st;
    st.init({&p});
    adam_step({&p}, st);
    adam_step({&p}, st);
    CHECK(st.t == 2);
  }
}

TEST_CASE("finite-difference gradient checks for every primitive") {
  Rng rng(2024);

  SUBCASE("dense") {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor x = random_tensor({6}, rng);
      const Tensor w = random_tensor({6, 4}, rng);
      const Tensor b = random_tensor({4}, rng);
      worst = std::max(worst, check_op_gradient(x, rng, [&](Graph& g, Graph::NodeId in) {
        return g.dense(in, g.constant(w), g.constant(b));
      }));
      worst = std::max(worst, check_op_gradient(w, rng, [&](Graph& g, Graph::NodeId in) {
        return g.dense(g.constant(x), in, g.constant(b));
      }));
    }
    CHECK(worst < 1e-6);
  }

  SUBCASE("conv2d with the (3,2) encoder kernel") {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor x = random_tensor({5, 4, 2}, rng);
      const Tensor k = random_tensor({3, 2, 2, 3}, rng);
      const Tensor b = random_tensor({3}, rng);
      worst = std::max(worst, check_op_gradient(x, rng, [&](Graph& g, Graph::NodeId in) {
        return g.conv2d(in, g.constant(k), g.constant(b), 1, 1, 0, 0);
      }));
      worst = std::max(worst, check_op_gradient(k, rng, [&](Graph& g, Graph::NodeId in) {
        return g.conv2d(g.constant(x), in, g.constant(b), 1, 1, 0, 0);
      }));
    }
    CHECK(worst < 1e-6);
  }

  SUBCASE("conv2d with stride and padding") {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor x = random_tensor({9, 6, 2}, rng);
      const Tensor k = random_tensor({2, 2, 2, 3}, rng);
      const Tensor b = random_tensor({3}, rng);
      worst = std::max(worst, check_op_gradient(x, rng, [&](Graph& g, Graph::NodeId in) {
        return g.conv2d(in, g.constant(k), g.constant(b), 2, 2, 1, 1);
      }, 1e-5));
    }
    CHECK(worst < 1e-5);
  }

  SUBCASE("transposed_conv2d") {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor x = random_tensor({3, 3, 4}, rng);
      const Tensor k = random_tensor({3, 2, 2, 4}, rng);
      const Tensor b = random_tensor({2}, rng);
      worst = std::max(worst, check_op_gradient(x, rng, [&](Graph& g, Graph::NodeId in) {
        return g.transposed_conv2d(in, g.constant(k), g.constant(b), 1, 1, 0, 0);
      }, 1e-5));
      worst = std::max(worst, check_op_gradient(k, rng, [&](Graph& g, Graph::NodeId in) {
        return g.transposed_conv2d(g.constant(x), in, g.constant(b), 1, 1, 0, 0);
      }, 1e-5));
    }
    CHECK(worst < 1e-6);
  }

  SUBCASE("instance_norm on non-constant input") {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor x = random_tensor({4, 3, 2}, rng);
      const Tensor gain = random_tensor({2}, rng, 0.5, 1.5);
      const Tensor shift = random_tensor({2}, rng);
      worst = std::max(worst, check_op_gradient(x, rng, [&](Graph& g, Graph::NodeId in) {
        return g.instance_norm(in, g.constant(gain), g.constant(shift), 1e-5);
      }));
      worst = std::max(worst, check_op_gradient(gain, rng, [&](Graph& g, Graph::NodeId in) {
        return g.instance_norm(g.constant(x), in, g.constant(shift), 1e-5);
      }));
    }
    CHECK(worst < 1e-5);
  }

  SUBCASE("batch_norm train mode") {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor x = random_tensor({4, 3, 2, 2}, rng);
      const Tensor gain = random_tensor({12}, rng, 0.5, 1.5);
      const Tensor shift = random_tensor({12}, rng);
      worst = std::max(worst, check_op_gradient(x, rng, [&](Graph& g, Graph::NodeId in) {
        Tensor rm = Tensor::zeros({12}), rv = Tensor::full({12}, 1.0);
        return g.batch_norm_train(in, g.constant(gain), g.constant(shift), rm, rv, 0.1, 1e-5);
      }));
    }
    CHECK(worst < 1e-5);
  }

  SUBCASE("activations away from their kinks") {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor x = random_tensor_offset({12}, rng, 1e-3);
      worst = std::max(worst, check_op_gradient(
                                  x, rng, [&](Graph& g, Graph::NodeId in) { return g.relu(in); }));
      worst = std::max(worst, check_op_gradient(x, rng, [&](Graph& g, Graph::NodeId in) {
        return g.leaky_relu(in, 0.2);
      }));
      worst = std::max(worst, check_op_gradient(x, rng, [&](Graph& g, Graph::NodeId in) {
        return g.sigmoid(in);
      }));
    }
    CHECK(worst < 1e-5);
  }

  SUBCASE("loss assembly ops") {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor x = random_tensor_offset({10}, rng, 1e-3);
      const Tensor y = random_tensor({10}, rng);
      worst = std::max(worst, check_op_gradient(x, rng, [&](Graph& g, Graph::NodeId in) {
        return g.abs(g.sub(in, g.constant(y)));
      }));
      const Tensor p = random_tensor({10}, rng, 0.05, 0.95);
      worst = std::max(worst, check_op_gradient(p, rng, [&](Graph& g, Graph::NodeId in) {
        return g.log_clamped(in, 1e-7, 1.0 - 1e-7);
      }));
      worst = std::max(worst, check_op_gradient(p, rng, [&](Graph& g, Graph::NodeId in) {
        return g.log_clamped(g.rsub_const(1.0, in), 1e-7, 1.0 - 1e-7);
      }));
      worst = std::max(worst, check_op_gradient(x, rng, [&](Graph& g, Graph::NodeId in) {
        return g.mean_all(g.scale(in, 2.5));
      }));
    }
    CHECK(worst < 1e-5);
  }
}
