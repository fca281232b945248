#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "xvad/eval/efficiency.hpp"
#include "xvad/eval/metrics.hpp"
#include "xvad/eval/score.hpp"
#include "xvad/rel/embedding.hpp"
#include "xvad/toy/toybench.hpp"

using namespace xvad;

namespace {

// O(n^2) pairwise AUC oracle: P(pos > neg) + 1/2 P(tie).
double auc_pairwise_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  long long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("psnr examples") {
  Tensor<double> a = Tensor<double>::full(Shape{3, 4, 4}, 0.5);
  REQUIRE(psnr(a, a) == 100.0);
  Tensor<double> b = a.map([](double v) { return v + 0.1; });  // MSE 0.01
  REQUIRE(psnr(a, b) == Catch::Approx(20.0).margin(1e-9));
  Tensor<double> zero = Tensor<double>::zeros(Shape{3, 4, 4});
  Tensor<double> one = Tensor<double>::ones(Shape{3, 4, 4});  // MSE 1
  REQUIRE(psnr(zero, one) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE_THROWS_AS(psnr(a, Tensor<double>::zeros(Shape{3, 4, 5})), ContractError);
}

TEST_CASE("normalize_and_score examples") {
  auto out = normalize_and_score({30.0, 20.0, 25.0});
  REQUIRE(out[0] == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(out[1] == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(out[2] == Catch::Approx(0.5).margin(1e-12));
  auto flat = normalize_and_score({20.0, 20.0});
  REQUIRE(flat == std::vector<double>{0.0, 0.0});
  REQUIRE(normalize_and_score({42.0}) == std::vector<double>{0.0});
  REQUIRE_THROWS_AS(normalize_and_score({}), ContractError);
  // Non-inverting orientation keeps normalized PSNR.
  auto raw = normalize_and_score({30.0, 20.0, 25.0}, false);
  REQUIRE(raw[0] == Catch::Approx(1.0));
  REQUIRE(raw[1] == Catch::Approx(0.0));
}

TEST_CASE("roc_auc examples, properties, and oracle equivalence") {
  REQUIRE(roc_auc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(roc_auc({0.5, 0.5}, {1, 0}) == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(roc_auc({0.8, 0.4, 0.6, 0.2}, {1, 0, 0, 1}) == Catch::Approx(0.5).margin(1e-12));
  REQUIRE_THROWS_AS(roc_auc({0.5, 0.7}, {1, 1}), ContractError);

  Rng rng(31);
  for (int inst = 0; inst < 200; ++inst) {
    const Index n = 2 + rng.uniform_index(499);
    std::vector<double> scores;
    std::vector<int> labels;
    bool pos = false, neg = false;
    for (Index i = 0; i < n; ++i) {
      // Quantized scores so ties actually occur.
      scores.push_back(std::round(rng.uniform() * 20.0) / 20.0);
      labels.push_back(rng.uniform() < 0.4 ? 1 : 0);
      (labels.back() ? pos : neg) = true;
    }
    if (!pos) labels[0] = 1;
    if (!neg) labels[static_cast<std::size_t>(n - 1)] = 0;
    if (labels[0] == labels[static_cast<std::size_t>(n - 1)] && n == 2) labels[0] = 1 - labels[0];
    const double fast = roc_auc(scores, labels);
    const double oracle = auc_pairwise_oracle(scores, labels);
    REQUIRE(fast == Catch::Approx(oracle).margin(1e-9));

    // Invariance under a strictly increasing transform.
    std::vector<double> mapped(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
      mapped[i] = std::exp(2.0 * scores[i]) + 3.0 * scores[i];
    REQUIRE(roc_auc(mapped, labels) == Catch::Approx(fast).margin(1e-12));
  }

  // Tie-free complement identity.
  Rng rng2(32);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 101; ++i) {
    scores.push_back(rng2.uniform());
    labels.push_back(i % 3 == 0 ? 1 : 0);
  }
  std::vector<double> negated(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) negated[i] = -scores[i];
  REQUIRE(roc_auc(scores, labels) + roc_auc(negated, labels) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("score_dataset contracts on a toy corpus") {
  const auto root = std::filesystem::temp_directory_path() / "xvad_test_score";
  std::filesystem::remove_all(root);
  toy::ToySpec spec;
  spec.resolution = 16;
  spec.video_length = 9;
  spec.train_videos = 1;
  spec.test_videos = 2;
  spec.ti_videos = 1;
  spec.anomaly_start = 5;
  spec.anomaly_end = 8;
  spec.seed = 3;
  toy::ToyCorpus corpus = toy::generate_toy_dataset(spec, root);

  GeneratorConfig gcfg;
  gcfg.widths = {8, 12};
  gcfg.memory_items = 6;
  Rng rng(5);
  Generator<float> gen(gcfg, rng);

  SECTION("single-window video scores one frame with zero anomaly") {
    DatasetManifest single = corpus.test;
    single.videos.resize(1);
    single.videos[0].frame_count = 5;  // T+1 with T=4
    single.videos[0].labels.resize(5);
    EvalResult r = score_dataset(gen, single, 16, 4);
    REQUIRE(r.videos.size() == 1);
    REQUIRE(r.videos[0].psnr.size() == 1);
    REQUIRE(r.videos[0].anomaly == std::vector<double>{0.0});
  }
  SECTION("videos shorter than T+1 are skipped") {
    DatasetManifest short_video = corpus.test;
    short_video.videos[0].frame_count = 4;
    short_video.videos[0].labels.resize(4);
    EvalResult r = score_dataset(gen, short_video, 16, 4);
    REQUIRE(r.skipped_videos == 1);
    REQUIRE(r.videos.size() == 1);
  }
  SECTION("identical videos produce identical series; pooled AUC matches the oracle") {
    DatasetManifest two = corpus.test;
    two.videos[1] = two.videos[0];
    two.videos[1].video_id = "copy";
    EvalResult r = score_dataset(gen, two, 16, 4);
    REQUIRE(r.videos.size() == 2);
    REQUIRE(r.videos[0].anomaly == r.videos[1].anomaly);
    std::vector<double> pooled_scores;
    std::vector<int> pooled_labels;
    for (const auto& v : r.videos) {
      pooled_scores.insert(pooled_scores.end(), v.anomaly.begin(), v.anomaly.end());
      pooled_labels.insert(pooled_labels.end(), v.labels.begin(), v.labels.end());
    }
    REQUIRE(r.pooled_auc.has_value());
    REQUIRE(*r.pooled_auc == Catch::Approx(auc_pairwise_oracle(pooled_scores, pooled_labels))
                                 .margin(1e-9));
    // Label alignment: first scored frame corresponds to frame index T.
    REQUIRE(r.videos[0].labels.size() == static_cast<std::size_t>(9 - 4));
    REQUIRE(r.videos[0].labels[0] ==
            corpus.test.videos[0].labels[4]);
  }
}

TEST_CASE("efficiency: closed-form layer arithmetic and the reference budget") {
  // Single 3x3 conv, 3 -> 16 channels, 256x256 output.
  REQUIRE(conv_macs(3, 3, 16, 256, 256) == 28311552LL);

  // Analytic parameter count equals the instantiated model's count.
  GeneratorConfig small;
  small.widths = {8, 12, 16};
  small.memory_items = 10;
  Rng rng(9);
  Generator<float> gen(small, rng);
  REQUIRE(generator_parameter_count(gen) == generator_parameter_count(small));

  // Counts are load-invariant: a second instance reports the same number.
  Rng rng2(10);
  Generator<float> gen2(small, rng2);
  REQUIRE(generator_parameter_count(gen2) == generator_parameter_count(gen));

  // Reference configuration lands within +-25% of the 8.73M parameter target.
  GeneratorConfig reference;  // defaults: widths 64..512, K=2000
  const double millions = static_cast<double>(generator_parameter_count(reference)) / 1e6;
  REQUIRE(millions > 8.73 * 0.75);
  REQUIRE(millions < 8.73 * 1.25);

  // FPS timing path produces a positive figure on a tiny model.
  EfficiencyReport rep = efficiency_report(gen, 16, 5);
  REQUIRE(rep.fps > 0.0);
  REQUIRE(rep.gmacs > 0.0);
}

TEST_CASE("relevancy: examples, symmetry, scale invariance") {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  TableEmbeddingProvider provider({{"running", {0.3, 0.4}},
                                   {"alpha", {1.0, 0.0}},
                                   {"beta", {0.0, 1.0}},
                                   {"gamma", {inv_sqrt2, inv_sqrt2}}});

  SECTION("self similarity is exactly 1") {
    LabelSet p{{"running"}};
    REQUIRE(mean_abs_cos_sim(p, p, provider).mean_abs_cos == Catch::Approx(1.0).margin(1e-6));
  }
  SECTION("orthogonal labels score 0") {
    REQUIRE(mean_abs_cos_sim(LabelSet{{"alpha"}}, LabelSet{{"beta"}}, provider).mean_abs_cos ==
            Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("hand-evaluated double sum") {
    const double got =
        mean_abs_cos_sim(LabelSet{{"alpha", "beta"}}, LabelSet{{"gamma"}}, provider).mean_abs_cos;
    REQUIRE(got == Catch::Approx(inv_sqrt2).margin(1e-6));
  }
  SECTION("multi-word labels average their token vectors") {
    const auto v = embed_label("alpha beta", provider);
    REQUIRE(v[0] == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(v[1] == Catch::Approx(0.5).margin(1e-12));
    // Unknown token mixed with known: mean over the known only.
    const auto w = embed_label("alpha xyzzy", provider);
    REQUIRE(w[0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(w[1] == Catch::Approx(0.0).margin(1e-12));
    REQUIRE_THROWS_AS(embed_label("xyzzy qwerty", provider), ContractError);
  }
  SECTION("zero embedding vector rejected") {
    TableEmbeddingProvider degenerate({{"null", {0.0, 0.0}}, {"one", {1.0, 0.0}}});
    REQUIRE_THROWS_AS(mean_abs_cos_sim(LabelSet{{"null"}}, LabelSet{{"one"}}, degenerate),
                      ContractError);
  }
  SECTION("symmetry, range, scale invariance over random label sets") {
    Rng rng(41);
    for (int trial = 0; trial < 100; ++trial) {
      std::map<std::string, std::vector<double>> table, scaled;
      const int words = 3 + static_cast<int>(rng.uniform_index(4));
      for (int w = 0; w < words; ++w) {
        std::vector<double> v(4);
        for (auto& x : v) x = rng.uniform(-1.0, 1.0) + 0.1;
        table["w" + std::to_string(w)] = v;
        std::vector<double> sv = v;
        for (auto& x : sv) x *= 7.5;
        scaled["w" + std::to_string(w)] = sv;
      }
      TableEmbeddingProvider prov(table), prov_scaled(scaled);
      LabelSet p, q;
      for (int i = 0; i < 2; ++i)
        p.labels.push_back("w" + std::to_string(rng.uniform_index(words)));
      for (int i = 0; i < 3; ++i)
        q.labels.push_back("w" + std::to_string(rng.uniform_index(words)));
      const double pq = mean_abs_cos_sim(p, q, prov).mean_abs_cos;
      const double qp = mean_abs_cos_sim(q, p, prov).mean_abs_cos;
      REQUIRE(pq == Catch::Approx(qp).margin(1e-12));
      REQUIRE(pq >= 0.0);
      REQUIRE(pq <= 1.0 + 1e-12);
      REQUIRE(mean_abs_cos_sim(p, q, prov_scaled).mean_abs_cos ==
              Catch::Approx(pq).margin(1e-9));
    }
  }
  SECTION("hash provider is deterministic and unit-norm") {
    HashEmbeddingProvider hp(16);
    const auto a = hp.lookup("walking");
    const auto b = hp.lookup("walking");
    REQUIRE(a == b);
    double norm = 0.0;
    for (double v : *a) norm += v * v;
    REQUIRE(norm == Catch::Approx(1.0).margin(1e-9));
  }
}
