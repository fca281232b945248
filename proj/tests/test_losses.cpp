#include <catch2/catch_amalgamated.hpp>

#include "support/gradcheck.hpp"
#include "xvad/loss/compose.hpp"
#include "xvad/loss/losses.hpp"

using namespace xvad;
using xvad::testing::gradcheck;
using xvad::testing::random_tensor;

namespace {

template <typename T>
Var<T> leaf(Tensor<T> t) {
  return Var<T>(std::move(t), false);
}

Var<double> vec(std::vector<double> v) {
  const Index n = static_cast<Index>(v.size());
  return leaf(Tensor<double>::from_vector(Shape::vec(n), std::move(v)));
}

// Direct windowed-formula SSIM, independent of the autodiff convolution path:
// plain loops over the Gaussian window per output position.
double ssim_loss_oracle(const Tensor<double>& a, const Tensor<double>& b, int win, double sigma) {
  const Index N = a.shape()[0], C = a.shape()[1], H = a.shape()[2], W = a.shape()[3];
  std::vector<double> kernel(static_cast<std::size_t>(win * win));
  const double c = (win - 1) / 2.0;
  double ksum = 0.0;
  for (int y = 0; y < win; ++y)
    for (int x = 0; x < win; ++x) {
      const double v = std::exp(-((x - c) * (x - c) + (y - c) * (y - c)) / (2 * sigma * sigma));
      kernel[static_cast<std::size_t>(y * win + x)] = v;
      ksum += v;
    }
  for (auto& k : kernel) k /= ksum;
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  Index count = 0;
  for (Index n = 0; n < N; ++n)
    for (Index ch = 0; ch < C; ++ch)
      for (Index oy = 0; oy + win <= H; ++oy)
        for (Index ox = 0; ox + win <= W; ++ox) {
          double mua = 0, mub = 0, sa = 0, sb = 0, sab = 0;
          for (int ky = 0; ky < win; ++ky)
            for (int kx = 0; kx < win; ++kx) {
              const double k = kernel[static_cast<std::size_t>(ky * win + kx)];
              const double va = a.at(n, ch, oy + ky, ox + kx);
              const double vb = b.at(n, ch, oy + ky, ox + kx);
              mua += k * va;
              mub += k * vb;
              sa += k * va * va;
              sb += k * vb * vb;
              sab += k * va * vb;
            }
          const double var_a = sa - mua * mua, var_b = sb - mub * mub, cov = sab - mua * mub;
          total += ((2 * mua * mub + c1) * (2 * cov + c2)) /
                   ((mua * mua + mub * mub + c1) * (var_a + var_b + c2));
          ++count;
        }
  return 1.0 - total / static_cast<double>(count);
}

}  // namespace

TEST_CASE("mse examples") {
  Rng rng(1);
  Var<double> v = leaf(random_tensor(Shape::nchw(1, 3, 4, 4), rng));
  REQUIRE(loss::mse(v, v).value().item() == 0.0);
  Var<double> off = leaf(v.value().map([](double x) { return x + 0.1; }));
  REQUIRE(loss::mse(off, v).value().item() == Catch::Approx(0.01).margin(1e-9));
  Var<double> w = leaf(random_tensor(Shape::nchw(1, 3, 4, 4), rng));
  REQUIRE(loss::mse(v, w).value().item() == Catch::Approx(loss::mse(w, v).value().item()));
  REQUIRE_THROWS_AS(loss::mse(v, leaf(random_tensor(Shape::nchw(1, 3, 4, 5), rng))), ContractError);
}

TEST_CASE("ssim examples and oracle equivalence") {
  SECTION("identical frames give zero loss") {
    Rng rng(2);
    Tensor<double> t = random_tensor(Shape::nchw(1, 3, 16, 16), rng, 0.0, 1.0);
    REQUIRE(loss::ssim_loss(leaf(t), leaf(t)).value().item() == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("constant frames: closed form, variance terms cancel") {
    Var<double> a = leaf(Tensor<double>::full(Shape::nchw(1, 3, 16, 16), 0.5));
    Var<double> b = leaf(Tensor<double>::full(Shape::nchw(1, 3, 16, 16), 0.25));
    const double c1 = 1e-4;
    const double expect = 1.0 - (2 * 0.5 * 0.25 + c1) / (0.5 * 0.5 + 0.25 * 0.25 + c1);
    REQUIRE(loss::ssim_loss(a, b).value().item() == Catch::Approx(expect).margin(1e-9));
  }
  SECTION("loss stays in [0,2]") {
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
      Var<double> a = leaf(random_tensor(Shape::nchw(1, 1, 12, 12), rng, 0.0, 1.0));
      Var<double> b = leaf(random_tensor(Shape::nchw(1, 1, 12, 12), rng, 0.0, 1.0));
      const double l = loss::ssim_loss(a, b).value().item();
      REQUIRE(l >= 0.0);
      REQUIRE(l <= 2.0);
    }
  }
  SECTION("frame smaller than the window is rejected") {
    Rng rng(4);
    Var<double> small = leaf(random_tensor(Shape::nchw(1, 3, 8, 8), rng, 0.0, 1.0));
    REQUIRE_THROWS_AS(loss::ssim_loss(small, small), ContractError);
  }
  SECTION("matches the direct windowed-formula oracle on random 32x32 pairs") {
    Rng rng(5);
    for (int i = 0; i < 5; ++i) {
      Tensor<double> a = random_tensor(Shape::nchw(1, 3, 32, 32), rng, 0.0, 1.0);
      Tensor<double> b = random_tensor(Shape::nchw(1, 3, 32, 32), rng, 0.0, 1.0);
      const double impl = loss::ssim_loss(leaf(a), leaf(b)).value().item();
      const double oracle = ssim_loss_oracle(a, b, 11, 1.5);
      REQUIRE(impl == Catch::Approx(oracle).margin(1e-6));
    }
  }
}

TEST_CASE("gradient loss examples") {
  SECTION("identity gives zero") {
    Rng rng(6);
    Var<double> v = leaf(random_tensor(Shape::nchw(1, 3, 5, 5), rng));
    REQUIRE(loss::gradient_loss(v, v).value().item() == 0.0);
  }
  SECTION("1x3 row hand trace: pair sum 1.0 over 2 pairs") {
    Var<double> t = leaf(Tensor<double>::from_vector(Shape::nchw(1, 1, 1, 3), {0.0, 0.5, 1.0}));
    Var<double> p = leaf(Tensor<double>::zeros(Shape::nchw(1, 1, 1, 3)));
    REQUIRE(loss::gradient_loss(p, t).value().item() == Catch::Approx(0.5).margin(1e-12));
  }
  SECTION("invariant to adding a constant to both inputs") {
    Rng rng(7);
    Tensor<double> a = random_tensor(Shape::nchw(1, 2, 6, 6), rng);
    Tensor<double> b = random_tensor(Shape::nchw(1, 2, 6, 6), rng);
    const double base = loss::gradient_loss(leaf(a), leaf(b)).value().item();
    const double shifted = loss::gradient_loss(leaf(a.map([](double v) { return v + 3.7; })),
                                               leaf(b.map([](double v) { return v + 3.7; })))
                               .value()
                               .item();
    REQUIRE(shifted == Catch::Approx(base).margin(1e-9));
  }
}

TEST_CASE("memory entropy examples") {
  REQUIRE(loss::memory_entropy(vec({0.0, 1.0, 0.0})).value().item() == 0.0);
  REQUIRE(loss::memory_entropy(vec({0.5, 0.5})).value().item() ==
          Catch::Approx(std::log(2.0)).margin(1e-12));
  REQUIRE(loss::memory_entropy(vec({0.25, 0.25, 0.25, 0.25})).value().item() ==
          Catch::Approx(std::log(4.0)).margin(1e-12));
  REQUIRE_THROWS_AS(loss::memory_entropy(vec({0.9, -0.1, 0.2})), ContractError);
  // Row form averages per-row entropies.
  Var<double> rows = leaf(Tensor<double>::from_vector(Shape::mat(2, 2), {0.5, 0.5, 1.0, 0.0}));
  REQUIRE(loss::memory_entropy(rows).value().item() ==
          Catch::Approx(std::log(2.0) / 2.0).margin(1e-12));
}

TEST_CASE("normalcy loss examples") {
  REQUIRE(loss::normalcy(vec({1, 1}), vec({0, 0})).value().item() == 0.0);
  REQUIRE(loss::normalcy(vec({0.5, 0.5}), vec({0.5, 0.5})).value().item() ==
          Catch::Approx(0.25).margin(1e-12));
  REQUIRE(loss::normalcy(vec({0, 0}), vec({1, 1})).value().item() ==
          Catch::Approx(1.0).margin(1e-12));
  REQUIRE_THROWS_AS(loss::normalcy(vec({1}), vec({0, 0})), ContractError);
}

TEST_CASE("relative normalcy loss examples and shift invariance") {
  REQUIRE(loss::relative_normalcy(vec({1, 1}), vec({0, 0})).value().item() ==
          Catch::Approx(0.0).margin(1e-12));
  REQUIRE(loss::relative_normalcy(vec({0.5, 0.5}), vec({0.5, 0.5})).value().item() ==
          Catch::Approx(1.0).margin(1e-12));
  Rng rng(8);
  std::vector<double> hats, tildes, hats_s, tildes_s;
  for (int i = 0; i < 6; ++i) {
    hats.push_back(rng.uniform(-2, 2));
    tildes.push_back(rng.uniform(-2, 2));
    hats_s.push_back(hats.back() + 11.3);
    tildes_s.push_back(tildes.back() + 11.3);
  }
  const double base = loss::relative_normalcy(vec(hats), vec(tildes)).value().item();
  const double shifted = loss::relative_normalcy(vec(hats_s), vec(tildes_s)).value().item();
  REQUIRE(shifted == Catch::Approx(base).margin(1e-9));
  // Plain normalcy is not shift invariant.
  const double n_base = loss::normalcy(vec(hats), vec(tildes)).value().item();
  const double n_shift = loss::normalcy(vec(hats_s), vec(tildes_s)).value().item();
  REQUIRE(std::abs(n_base - n_shift) > 1e-3);
}

TEST_CASE("attention affirmation examples") {
  const Shape s = Shape::nchw(1, 1, 3, 3);
  Rng rng(9);
  Tensor<double> mask(s);
  for (Index i = 0; i < mask.numel(); ++i) mask[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
  REQUIRE(loss::attention_affirmation(leaf(Tensor<double>::ones(s)), leaf(mask.clone()), leaf(mask))
              .value()
              .item() == 0.0);
  REQUIRE(loss::attention_affirmation(leaf(Tensor<double>::zeros(s)), leaf(mask.clone()), leaf(mask))
              .value()
              .item() == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(loss::attention_affirmation(leaf(Tensor<double>::ones(s)), leaf(Tensor<double>::ones(s)),
                                      leaf(Tensor<double>::zeros(s)))
              .value()
              .item() == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("relative attention (angular margin) examples") {
  const double s = 64.0, m = 28.6 * 3.14159265358979323846 / 180.0;
  Var<double> centers =
      leaf(Tensor<double>::from_vector(Shape::mat(2, 2), {0.0, 1.0, 1.0, 0.0}));  // W0=[0,1], W1=[1,0]

  SECTION("aligned with the target centre: loss ~ 0") {
    Var<double> attn = leaf(Tensor<double>::from_vector(Shape::mat(1, 2), {1.0, 0.0}));
    const double got =
        loss::relative_attention(attn, {1}, centers, s, m).value().item();
    // Independent evaluation with the clamped angle-addition identity.
    const double ct = 1.0 - 1e-7, co = 0.0;
    const double lt = s * (ct * std::cos(m) - std::sqrt(1 - ct * ct) * std::sin(m));
    const double lo = s * co;
    const double expect = std::log1p(std::exp(lo - lt));
    REQUIRE(got == Catch::Approx(expect).margin(1e-6));
    REQUIRE(got < 1e-9);
  }
  SECTION("orthogonal to the target centre: large loss") {
    Var<double> attn = leaf(Tensor<double>::from_vector(Shape::mat(1, 2), {0.0, 1.0}));
    const double got = loss::relative_attention(attn, {1}, centers, s, m).value().item();
    const double ct = 0.0, co = 1.0 - 1e-7;
    const double lt = s * (ct * std::cos(m) - std::sqrt(1 - ct * ct) * std::sin(m));
    const double lo = s * co;
    const double expect = (lo + std::log1p(std::exp(lt - lo))) - lt;
    REQUIRE(got == Catch::Approx(expect).margin(1e-6));
    REQUIRE(got > 90.0);
  }
  SECTION("invariant to positive rescaling of the raw attention vector") {
    Rng rng(10);
    Tensor<double> attn = random_tensor(Shape::mat(3, 6), rng, 0.1, 1.0);
    Tensor<double> cent = random_tensor(Shape::mat(2, 6), rng);
    const double base =
        loss::relative_attention(leaf(attn), {1, 0, 1}, leaf(cent), s, m).value().item();
    const double scaled =
        loss::relative_attention(leaf(attn.map([](double v) { return 5.0 * v; })), {1, 0, 1},
                                 leaf(cent), s, m)
            .value()
            .item();
    REQUIRE(scaled == Catch::Approx(base).margin(1e-9));
  }
  SECTION("zero-norm attention vector rejected") {
    Var<double> attn = leaf(Tensor<double>::zeros(Shape::mat(1, 2)));
    REQUIRE_THROWS_AS(loss::relative_attention(attn, {1}, centers, s, m), ContractError);
  }
}

TEST_CASE("adversarial least-squares terms") {
  auto pair = loss::adversarial(vec({0, 0}), vec({1, 1}));
  REQUIRE(pair.discriminator_term.value().item() == 0.0);
  REQUIRE(pair.generator_term.value().item() == Catch::Approx(0.5).margin(1e-12));
  pair = loss::adversarial(vec({1, 1}), vec({0, 0}));
  REQUIRE(pair.discriminator_term.value().item() == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(pair.generator_term.value().item() == 0.0);
  pair = loss::adversarial(vec({0.5}), vec({0.5}));
  REQUIRE(pair.discriminator_term.value().item() == Catch::Approx(0.25).margin(1e-12));
  REQUIRE(pair.generator_term.value().item() == Catch::Approx(0.125).margin(1e-12));
}

TEST_CASE("objective composition arithmetic") {
  LossWeights w;
  SECTION("zeros compose to zeros") {
    loss::ObjectiveTerms<double> t{};
    auto obj = loss::compose_objectives(t, w);
    REQUIRE(obj.generator == 0.0);
    REQUIRE(obj.discriminator == 0.0);
    REQUIRE(obj.classifier == 0.0);
  }
  SECTION("single term passes through") {
    loss::ObjectiveTerms<double> t{};
    t.mse = 1.0;
    REQUIRE(loss::compose_objectives(t, w).generator == 1.0);
  }
  SECTION("paper weight arithmetic: memory and classifier components") {
    loss::ObjectiveTerms<double> t{};
    t.memory_entropy = 1.0;
    t.n = t.rn = t.aa = t.raa = 1.0;
    auto obj = loss::compose_objectives(t, w);
    REQUIRE(obj.generator == Catch::Approx(0.0025).margin(1e-15));
    REQUIRE(obj.classifier == Catch::Approx(3.01).margin(1e-15));
  }
  SECTION("linearity in each component") {
    Rng rng(11);
    loss::ObjectiveTerms<double> base{};
    base.mse = rng.uniform();
    base.ssim = rng.uniform();
    base.grad = rng.uniform();
    base.memory_entropy = rng.uniform();
    base.adv_gen = rng.uniform();
    base.adv_disc = rng.uniform();
    base.normalcy_gen = rng.uniform();
    base.n = rng.uniform();
    base.rn = rng.uniform();
    base.aa = rng.uniform();
    base.raa = rng.uniform();
    const auto obj0 = loss::compose_objectives(base, w);
    auto bumped = base;
    bumped.adv_gen += 1.0;
    REQUIRE(loss::compose_objectives(bumped, w).generator - obj0.generator ==
            Catch::Approx(w.alpha_d).margin(1e-12));
    bumped = base;
    bumped.rn += 1.0;
    REQUIRE(loss::compose_objectives(bumped, w).classifier - obj0.classifier ==
            Catch::Approx(w.w_rn).margin(1e-12));
  }
  SECTION("non-finite component aborts naming the term") {
    loss::ObjectiveTerms<double> t{};
    t.ssim = std::numeric_limits<double>::quiet_NaN();
    try {
      loss::compose_objectives(t, w);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      REQUIRE(std::string(e.what()).find("ssim") != std::string::npos);
    }
  }
  SECTION("composition over autodiff scalars matches the double path") {
    loss::ObjectiveTerms<double> td{};
    td.mse = 0.3; td.ssim = 0.2; td.grad = 0.1; td.memory_entropy = 2.0;
    td.adv_gen = 0.7; td.adv_disc = 0.9; td.normalcy_gen = 0.4;
    td.n = 0.5; td.rn = 0.6; td.aa = 0.8; td.raa = 1.2;
    loss::ObjectiveTerms<Var<double>> tv;
    tv.mse = constant(0.3); tv.ssim = constant(0.2); tv.grad = constant(0.1);
    tv.memory_entropy = constant(2.0); tv.adv_gen = constant(0.7); tv.adv_disc = constant(0.9);
    tv.normalcy_gen = constant(0.4); tv.n = constant(0.5); tv.rn = constant(0.6);
    tv.aa = constant(0.8); tv.raa = constant(1.2);
    const auto od = loss::compose_objectives(td, LossWeights{});
    const auto ov = loss::compose_objectives(tv, LossWeights{});
    REQUIRE(ov.generator.value().item() == Catch::Approx(od.generator).margin(1e-12));
    REQUIRE(ov.classifier.value().item() == Catch::Approx(od.classifier).margin(1e-12));
  }
}

TEST_CASE("analytic loss gradients match finite differences") {
  Rng rng(12);
  const Shape frame_shape = Shape::nchw(1, 3, 8, 8);

  SECTION("mse") {
    auto build = [](const std::vector<Var<double>>& in) { return loss::mse(in[0], in[1]); };
    REQUIRE(gradcheck(build, {Var<double>(random_tensor(frame_shape, rng), true),
                              Var<double>(random_tensor(frame_shape, rng), true)}) < 1e-6);
  }
  SECTION("ssim (window 7 on 8x8, window 11 on 16x16)") {
    auto build7 = [](const std::vector<Var<double>>& in) {
      return loss::ssim_loss(in[0], in[1], 7, 1.5);
    };
    REQUIRE(gradcheck(build7, {Var<double>(random_tensor(frame_shape, rng, 0.05, 0.95), true),
                               Var<double>(random_tensor(frame_shape, rng, 0.05, 0.95), true)}) <
            1e-5);
    auto build11 = [](const std::vector<Var<double>>& in) { return loss::ssim_loss(in[0], in[1]); };
    REQUIRE(gradcheck(build11,
                      {Var<double>(random_tensor(Shape::nchw(1, 1, 16, 16), rng, 0.05, 0.95), true),
                       Var<double>(random_tensor(Shape::nchw(1, 1, 16, 16), rng, 0.05, 0.95), true)}) <
            1e-5);
  }
  SECTION("gradient loss") {
    auto build = [](const std::vector<Var<double>>& in) {
      return loss::gradient_loss(in[0], in[1]);
    };
    REQUIRE(gradcheck(build, {Var<double>(random_tensor(frame_shape, rng), true),
                              Var<double>(random_tensor(frame_shape, rng), true)}) < 1e-6);
  }
  SECTION("normalcy family and adversarial terms") {
    auto build_n = [](const std::vector<Var<double>>& in) { return loss::normalcy(in[0], in[1]); };
    auto build_rn = [](const std::vector<Var<double>>& in) {
      return loss::relative_normalcy(in[0], in[1]);
    };
    auto build_adv = [](const std::vector<Var<double>>& in) {
      auto pair = loss::adversarial(in[0], in[1]);
      return add(pair.generator_term, pair.discriminator_term);
    };
    std::vector<Var<double>> scores{Var<double>(random_tensor(Shape::vec(6), rng), true),
                                    Var<double>(random_tensor(Shape::vec(6), rng), true)};
    REQUIRE(gradcheck(build_n, scores) < 1e-6);
    REQUIRE(gradcheck(build_rn, scores) < 1e-6);
    REQUIRE(gradcheck(build_adv, scores) < 1e-6);
  }
  SECTION("attention affirmation") {
    Tensor<double> mask(Shape::nchw(1, 1, 4, 4));
    for (Index i = 0; i < mask.numel(); ++i) mask[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    auto build = [mask](const std::vector<Var<double>>& in) {
      return loss::attention_affirmation(in[0], in[1], Var<double>(mask, false));
    };
    REQUIRE(gradcheck(build, {Var<double>(random_tensor(Shape::nchw(1, 1, 4, 4), rng, 0, 1), true),
                              Var<double>(random_tensor(Shape::nchw(1, 1, 4, 4), rng, 0, 1), true)}) <
            1e-6);
  }
  SECTION("relative attention wrt attention vectors and centres") {
    const double s = 64.0, m = 28.6 * 3.14159265358979323846 / 180.0;
    auto build = [s, m](const std::vector<Var<double>>& in) {
      return loss::relative_attention(in[0], {1, 0, 1, 0}, in[1], s, m);
    };
    REQUIRE(gradcheck(build, {Var<double>(random_tensor(Shape::mat(4, 5), rng, 0.1, 1.0), true),
                              Var<double>(random_tensor(Shape::mat(2, 5), rng), true)},
                      1e-6) < 1e-4);
  }
  SECTION("memory entropy") {
    // Feed strictly positive weights (post-softmax regime).
    Tensor<double> w = random_tensor(Shape::mat(3, 4), rng, 0.05, 1.0);
    auto build = [](const std::vector<Var<double>>& in) { return loss::memory_entropy(in[0]); };
    REQUIRE(gradcheck(build, {Var<double>(w, true)}) < 1e-6);
  }
}
