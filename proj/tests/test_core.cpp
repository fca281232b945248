#include <catch2/catch_amalgamated.hpp>

#include "support/gradcheck.hpp"
#include "xvad/core/conv.hpp"
#include "xvad/core/ops.hpp"
#include "xvad/core/random.hpp"
#include "xvad/nn/adam.hpp"
#include "xvad/nn/layers.hpp"

using namespace xvad;
using xvad::testing::gradcheck;
using xvad::testing::random_tensor;

TEST_CASE("tensor basics") {
  Tensor<float> t(Shape::nchw(1, 2, 2, 2), 3.0f);
  REQUIRE(t.numel() == 8);
  t.at(0, 1, 1, 1) = 5.0f;
  REQUIRE(t[7] == 5.0f);
  Tensor<float> shallow = t;
  shallow[0] = -1.0f;
  REQUIRE(t[0] == -1.0f);  // shared buffer
  Tensor<float> deep = t.clone();
  deep[0] = 9.0f;
  REQUIRE(t[0] == -1.0f);
}

TEST_CASE("rng determinism and ranges") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    REQUIRE(u == b.uniform());
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  Rng c(7);
  const std::string state = c.serialize();
  const double expect = c.uniform();
  Rng d(0);
  d.deserialize(state);
  REQUIRE(d.uniform() == expect);
}

TEST_CASE("autodiff chains through elementwise ops") {
  Rng rng(1);
  auto build = [](const std::vector<Var<double>>& in) {
    auto y = mean(mul(xvad::tanh(in[0]), sigmoid(in[1])) + square(in[0]) * 0.5);
    return y;
  };
  std::vector<Var<double>> leaves{Var<double>(random_tensor(Shape::nchw(1, 2, 3, 3), rng), true),
                                  Var<double>(random_tensor(Shape::nchw(1, 2, 3, 3), rng), true)};
  REQUIRE(gradcheck(build, leaves) < 1e-6);
}

TEST_CASE("reductions, softmax, logsumexp, row ops") {
  Rng rng(2);
  SECTION("softmax rows") {
    auto build = [](const std::vector<Var<double>>& in) {
      return mean(square(softmax_rows(in[0])));
    };
    std::vector<Var<double>> leaves{Var<double>(random_tensor(Shape::mat(3, 5), rng), true)};
    REQUIRE(gradcheck(build, leaves) < 1e-6);
  }
  SECTION("logsumexp + rows_sum + div_rowwise") {
    auto build = [](const std::vector<Var<double>>& in) {
      auto lse = rows_logsumexp(in[0]);
      auto den = add_scalar(rows_sum(abs(in[0])), 1.0);
      return mean(div_rowwise(lse, den));
    };
    std::vector<Var<double>> leaves{Var<double>(random_tensor(Shape::mat(4, 3), rng), true)};
    REQUIRE(gradcheck(build, leaves) < 1e-6);
  }
  SECTION("rows_l2_normalize and matmul") {
    auto build = [](const std::vector<Var<double>>& in) {
      auto y = matmul(rows_l2_normalize(in[0]), transpose(rows_l2_normalize(in[1])));
      return mean(square(y));
    };
    std::vector<Var<double>> leaves{Var<double>(random_tensor(Shape::mat(3, 4), rng), true),
                                    Var<double>(random_tensor(Shape::mat(2, 4), rng), true)};
    REQUIRE(gradcheck(build, leaves) < 1e-6);
  }
  SECTION("minmax normalize per sample") {
    auto build = [](const std::vector<Var<double>>& in) {
      return mean(square(minmax_normalize_per_sample(in[0])));
    };
    std::vector<Var<double>> leaves{Var<double>(random_tensor(Shape::nchw(2, 1, 3, 3), rng), true)};
    REQUIRE(gradcheck(build, leaves) < 1e-6);
  }
  SECTION("channel_sum + spatial mean + concat + slice") {
    auto build = [](const std::vector<Var<double>>& in) {
      auto cat = concat_batch<double>({in[0], in[1]});
      auto s = spatial_mean_per_sample(channel_sum(cat));
      return mean(square(slice_batch(s, 1, 2)));
    };
    std::vector<Var<double>> leaves{Var<double>(random_tensor(Shape::nchw(2, 3, 2, 2), rng), true),
                                    Var<double>(random_tensor(Shape::nchw(1, 3, 2, 2), rng), true)};
    REQUIRE(gradcheck(build, leaves) < 1e-6);
  }
}

TEST_CASE("conv2d matches finite differences") {
  Rng rng(3);
  for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}}) {
    auto build = [stride, pad](const std::vector<Var<double>>& in) {
      return mean(square(conv2d(in[0], in[1], in[2], stride, pad)));
    };
    std::vector<Var<double>> leaves{
        Var<double>(random_tensor(Shape::nchw(2, 2, 5, 5), rng), true),
        Var<double>(random_tensor(Shape::nchw(3, 2, 3, 3), rng), true),
        Var<double>(random_tensor(Shape::vec(3), rng), true)};
    REQUIRE(gradcheck(build, leaves) < 1e-6);
  }
}

TEST_CASE("upsample, maxpool, depthwise fixed conv, instance norm") {
  Rng rng(4);
  SECTION("upsample_nearest2x") {
    auto build = [](const std::vector<Var<double>>& in) {
      return mean(square(upsample_nearest2x(in[0])));
    };
    std::vector<Var<double>> leaves{Var<double>(random_tensor(Shape::nchw(1, 2, 3, 3), rng), true)};
    REQUIRE(gradcheck(build, leaves) < 1e-6);
  }
  SECTION("maxpool2d") {
    auto build = [](const std::vector<Var<double>>& in) { return mean(square(maxpool2d(in[0], 2))); };
    std::vector<Var<double>> leaves{Var<double>(random_tensor(Shape::nchw(1, 2, 4, 4), rng), true)};
    REQUIRE(gradcheck(build, leaves) < 1e-6);
  }
  SECTION("depthwise_fixed_conv") {
    Tensor<double> kernel = random_tensor(Shape::mat(3, 3), rng);
    auto build = [kernel](const std::vector<Var<double>>& in) {
      return mean(square(depthwise_fixed_conv(in[0], kernel)));
    };
    std::vector<Var<double>> leaves{Var<double>(random_tensor(Shape::nchw(2, 2, 5, 5), rng), true)};
    REQUIRE(gradcheck(build, leaves) < 1e-6);
  }
  SECTION("instance_norm") {
    auto build = [](const std::vector<Var<double>>& in) {
      return mean(square(nn::instance_norm(in[0], in[1], in[2])));
    };
    std::vector<Var<double>> leaves{Var<double>(random_tensor(Shape::nchw(2, 2, 3, 3), rng), true),
                                    Var<double>(random_tensor(Shape::vec(2), rng, 0.5, 1.5), true),
                                    Var<double>(random_tensor(Shape::vec(2), rng), true)};
    // Wider step: the normalization makes the loss ill-conditioned enough
    // that eps=1e-5 central differences are roundoff-dominated.
    REQUIRE(gradcheck(build, leaves, 1e-4) < 1e-6);
  }
}

TEST_CASE("no-grad mode skips graph construction") {
  Var<double> x(Tensor<double>::full(Shape::vec(4), 2.0), true);
  NoGradGuard guard;
  auto y = mean(square(x));
  REQUIRE_FALSE(y.requires_grad());
}

TEST_CASE("adam zero lr leaves parameters untouched; step moves them") {
  Rng rng(5);
  Var<double> p(random_tensor(Shape::vec(8), rng), true);
  const Tensor<double> before = p.value().clone();

  nn::Adam<double> frozen({{"p", p}}, 0.0, 0.5, 0.999);
  mean(square(p)).backward();
  frozen.step();
  for (Index i = 0; i < 8; ++i) REQUIRE(p.value()[i] == before[i]);

  nn::Adam<double> live({{"p", p}}, 0.1, 0.5, 0.999);
  live.zero_grad();
  mean(square(p)).backward();
  live.step();
  double moved = 0.0;
  for (Index i = 0; i < 8; ++i) moved += std::abs(p.value()[i] - before[i]);
  REQUIRE(moved > 0.0);
}
