#include <cmath>
#include <cstdio>
#include <fstream>

#include "cropgan/checkpoint.hpp"
#include "cropgan/gradcheck.hpp"
#include "cropgan/network.hpp"
#include "cropgan/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cropgan;
using cropgan::test::dot;
using cropgan::test::projection_weights;
using cropgan::test::random_tensor;

namespace {

// Shape tables transcribed once; the single source of truth for the
// layer-by-layer contract checks.
const std::vector<Shape> kGeneratorTrace = {
    {9, 6, 1}, {7, 5, 4}, {5, 4, 8}, {3, 3, 16}, {1, 2, 32},
    {3, 3, 16}, {5, 4, 8}, {7, 5, 4}, {9, 6, 1}};
const std::vector<Shape> kDiscriminatorTrace = {
    {9, 6, 1}, {9, 6, 4}, {4, 3, 8}, {2, 1, 16}, {1, 1, 1}, {1}};
const std::vector<Shape> kCropMapperTrace = {
    {9, 6, 1}, {9, 6, 2}, {4, 3, 2}, {2, 1, 4}, {8}, {4}, {1}};

std::vector<double> all_params(Network& net) {
  std::vector<double> flat;
  for (Tensor* t : net.state_tensors()) flat.insert(flat.end(), t->data.begin(), t->data.end());
  return flat;
}

}  // namespace

TEST_CASE("shape contract matches the architecture tables") {
  Network g = build_generator(1);
  CHECK(g.shape_trace() == kGeneratorTrace);
  Network d = build_discriminator(1);
  CHECK(d.shape_trace() == kDiscriminatorTrace);
  Network c = build_crop_mapper(1);
  CHECK(c.shape_trace() == kCropMapperTrace);

  SUBCASE("runtime shapes agree with the static trace") {
    Rng rng(9);
    const Tensor x = random_tensor({9, 6, 1}, rng, 0.0, 1.0);
    Graph graph;
    CHECK(graph.value(g.forward(graph, graph.constant(x), false)).shape == Shape{9, 6, 1});
    Graph graph2;
    CHECK(graph2.value(d.forward(graph2, graph2.constant(x), false)).shape == Shape{1});
  }
}

TEST_CASE("parameter counts match the geometry formula") {
  // Stage cost: kh*kw*cin*cout kernel + cout bias + 2*cout instance norm.
  auto gen_stage = [](int cin, int cout) { return 3 * 2 * cin * cout + cout + 2 * cout; };
  const long long gen_expected = gen_stage(1, 4) + gen_stage(4, 8) + gen_stage(8, 16) +
                                 gen_stage(16, 32) + gen_stage(32, 16) + gen_stage(16, 8) +
                                 gen_stage(8, 4) + gen_stage(4, 1);
  Network g = build_generator(3);
  CHECK(g.parameter_count() == gen_expected);

  const long long disc_expected = (3 * 3 * 1 * 4 + 4 + 2 * 4) + (2 * 2 * 4 * 8 + 8 + 2 * 8) +
                                  (2 * 2 * 8 * 16 + 16 + 2 * 16) + (2 * 1 * 16 * 1 + 1);
  Network d = build_discriminator(3);
  CHECK(d.parameter_count() == disc_expected);

  // Batch norm contributes one gain and one shift per activation.
  const long long cm_expected = (3 * 3 * 1 * 2 + 2 + 2 * 108) + (2 * 2 * 2 * 2 + 2 + 2 * 24) +
                                (2 * 2 * 2 * 4 + 4 + 2 * 8) + (8 * 4 + 4) + (4 * 1 + 1);
  Network c = build_crop_mapper(3);
  CHECK(c.parameter_count() == cm_expected);
}

TEST_CASE("builders are deterministic in the seed") {
  Network a = build_generator(42);
  Network b = build_generator(42);
  CHECK(all_params(a) == all_params(b));
  Network c = build_generator(43);
  CHECK(all_params(a) != all_params(c));
}

TEST_CASE("discriminator output lies strictly inside (0,1)") {
  Network d = build_discriminator(5);
  Rng rng(1000);
  for (int i = 0; i < 1000; ++i) {
    const Tensor x = random_tensor({9, 6, 1}, rng, 0.0, 1.0);
    const Tensor out = d.forward_eval(x);
    REQUIRE(out.size() == 1);
    CHECK(out.data[0] > 0.0);
    CHECK(out.data[0] < 1.0);
  }
}

TEST_CASE("crop mapper head") {
  Network c = build_crop_mapper(5);
  Rng rng(2000);
  const Tensor batch = random_tensor({8, 9, 6, 1}, rng, 0.0, 1.0);
  const Tensor out = c.forward_eval(batch);
  CHECK(out.shape == Shape{8, 1});
  for (double p : out.data) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    const int label = p >= 0.5 ? 1 : 0;
    CHECK((label == 0 || label == 1));
  }
}

TEST_CASE("forward and backward stay finite over random batches") {
  Network g = build_generator(7);
  Network d = build_discriminator(8);
  Network c = build_crop_mapper(9);
  Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    const Tensor batch = random_tensor({2, 9, 6, 1}, rng, 0.0, 1.0);
    Graph graph;
    const auto in = graph.constant(batch);
    const auto gen_out = g.forward(graph, in, true);
    const auto disc_out = d.forward(graph, gen_out, true);
    const auto cls_out = c.forward(graph, in, true);
    const auto loss = graph.add(graph.mean_all(disc_out), graph.mean_all(cls_out));
    graph.backward(loss);
    REQUIRE(graph.value(gen_out).all_finite());
    REQUIRE(graph.value(disc_out).all_finite());
    REQUIRE(graph.value(cls_out).all_finite());
    for (Tensor* p : g.parameters()) REQUIRE(Tensor{{1}, {p->grad[0]}}.all_finite());
    g.zero_grad();
    d.zero_grad();
    c.zero_grad();
  }
}

TEST_CASE("composed generator passes the finite-difference check") {
  Network g = build_generator(11);
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor x = random_tensor({9, 6, 1}, rng, 0.1, 0.9);
    Rng wrng(rng.next_u64());
    const std::vector<double> w = projection_weights(54, wrng);
    const auto forward = [&](const Tensor& probe) {
      return dot(g.forward_eval(probe).data, w);
    };
    const auto gradient = [&](const Tensor& probe) {
      Graph graph;
      Tensor p = probe;
      p.set_requires_grad(true);
      const auto out = g.forward(graph, graph.param(p), false);
      graph.backward(graph.sum_all(graph.mul(out, graph.constant(Tensor(graph.value(out).shape, w)))));
      return p.grad;
    };
    worst = std::max(worst, finite_diff_check(forward, gradient, x, 1e-6));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("checkpoint round trip") {
  const std::string path = "test_ckpt_roundtrip.bin";
  Network g = build_generator(21);
  save_checkpoint(g, path, 17, {{"loss", "1.25"}, {"config", "abc123"}});

  SUBCASE("state tensors survive bit for bit") {
    Network loaded = load_network(path);
    CHECK(all_params(g) == all_params(loaded));
    CHECK(loaded.role == NetworkRole::GeneratorG);
  }
  SUBCASE("forward outputs are identical on random inputs") {
    Network loaded = load_network(path);
    Rng rng(55);
    for (int i = 0; i < 100; ++i) {
      const Tensor x = random_tensor({9, 6, 1}, rng, 0.0, 1.0);
      CHECK(g.forward_eval(x).data == loaded.forward_eval(x).data);
    }
  }
  SUBCASE("metadata and epoch are preserved") {
    const Checkpoint ckpt = load_checkpoint(path);
    CHECK(ckpt.epoch == 17);
    REQUIRE(ckpt.find_meta("loss") != nullptr);
    CHECK(*ckpt.find_meta("loss") == "1.25");
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint format errors") {
  const std::string path = "test_ckpt_corrupt.bin";
  Network c = build_crop_mapper(4);
  save_checkpoint(c, path, 3);

  std::string buf;
  {
    std::ifstream in(path, std::ios::binary);
    buf.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }

  SUBCASE("bad magic") {
    std::string bad = buf;
    bad[0] = 'X';
    std::ofstream(path, std::ios::binary).write(bad.data(), static_cast<std::streamsize>(bad.size()));
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }
  SUBCASE("unsupported version") {
    std::string bad = buf;
    bad[4] = 0x7f;
    std::ofstream(path, std::ios::binary).write(bad.data(), static_cast<std::streamsize>(bad.size()));
    try {
      load_checkpoint(path);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 4);
    }
  }
  SUBCASE("truncation reports the offset and returns nothing") {
    for (std::size_t cut : {std::size_t{2}, std::size_t{9}, buf.size() / 2, buf.size() - 3}) {
      std::ofstream(path, std::ios::binary).write(buf.data(), static_cast<std::streamsize>(cut));
      CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
  }
  SUBCASE("role mismatch against the manifest") {
    std::string bad = buf;
    bad[6] = 0;  // claims generator-G over crop-mapper tensors
    std::ofstream(path, std::ios::binary).write(bad.data(), static_cast<std::streamsize>(bad.size()));
    CHECK_THROWS_AS(load_network(path), FormatError);
  }
  std::remove(path.c_str());
}
