#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ganedit/inversion.hpp"
#include "helpers.hpp"

#include <Eigen/Cholesky>

#include <filesystem>
#include <fstream>

using namespace ganedit;
using ganedit::testing::rel_err;

namespace {

ModelStack toy() { return make_toy_stack(ToyStackConfig{}); }

ImageTensor random_image(int side, Rng& rng, double scale = 0.7) {
  Vec data(3 * side * side);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    data[i] = scale * (2.0 * rng.uniform() - 1.0);
  }
  return ImageTensor(side, data);
}

PrototypeBank synthetic_bank(const Mat& embeddings, int layers, int dim, Rng& rng) {
  Mat codes = rng.gaussian_mat(embeddings.rows(), layers * dim);
  return PrototypeBank(std::move(codes), embeddings, layers, dim, 0, 1.0);
}

bool same_breakdown(const LossBreakdown& a, const LossBreakdown& b) {
  return a.clip == b.clip && a.pose == b.pose && a.reg == b.reg && a.im == b.im &&
         a.head == b.head && a.total == b.total;
}

}  // namespace

TEST_CASE("standard layer subsets partition the layers") {
  const LayerSubsets s14 = LayerSubsets::standard(14);
  CHECK(s14.coarse == std::vector<int>{1, 2, 3, 4});
  CHECK(s14.medium == std::vector<int>{5, 6, 7, 8});
  CHECK(s14.fine == std::vector<int>{9, 10, 11, 12, 13, 14});

  const LayerSubsets s6 = LayerSubsets::standard(6);
  CHECK(s6.coarse == std::vector<int>{1, 2, 3, 4});
  CHECK(s6.medium == std::vector<int>{5, 6});
  CHECK(s6.fine.empty());

  LayerSubsets bad = s6;
  bad.fine.push_back(6);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s6;
  bad.medium.pop_back();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s6;
  bad.fine.push_back(7);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("encoder and mean initialization") {
  const ModelStack stack = toy();
  Rng rng(3);
  const ExtendedLatentCode w(rng.gaussian_mat(6, 16));
  const ImageTensor image = stack.generator->synthesize(w);

  const ExtendedLatentCode init = init_from_encoder(image, stack, LatentSpace::kExtended);
  CHECK((init.rows() - w.rows()).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(init_from_encoder(image, stack, LatentSpace::kExtended).rows() == init.rows());

  const ExtendedLatentCode vanilla = init_from_encoder(image, stack, LatentSpace::kVanilla);
  CHECK(vanilla.is_vanilla());

  const ExtendedLatentCode mean = init_from_mean(*stack.generator);
  CHECK(mean.rows() == stack.generator->mean_code().rows());
  CHECK(&validate_latent(mean, 6) == &mean);
  CHECK(init_from_mean(*stack.generator).rows() == mean.rows());
}

TEST_CASE("prototype bank build is deterministic and matches the frozen fixture") {
  const ModelStack stack = toy();
  const PrototypeBank bank =
      build_prototype_bank(*stack.generator, *stack.semantic, 3, 123, 1.0);
  CHECK(bank.size() == 3);
  CHECK(bank.codes().cols() == 96);

  // Frozen fixture: built once with seed 123 on the default toy stack.
  CHECK(bank.codes()(0, 0) == -0.3160611093044281);
  CHECK(bank.codes()(1, 50) == 1.2611905336380005);
  CHECK(bank.codes()(2, 95) == 1.7406975030899048);
  CHECK(bank.embeddings()(0, 0) == -0.04189622774720192);
  CHECK(bank.embeddings()(2, 7) == 0.14094388484954834);

  for (int i = 0; i < bank.size(); ++i) {
    CHECK(std::abs(bank.embeddings().row(i).norm() - 1.0) < 1e-5);
    CHECK(bank.code_at(i).is_vanilla());
  }

  const PrototypeBank again =
      build_prototype_bank(*stack.generator, *stack.semantic, 3, 123, 1.0);
  CHECK(again.codes() == bank.codes());
  CHECK(again.embeddings() == bank.embeddings());

  CHECK_THROWS_AS(build_prototype_bank(*stack.generator, *stack.semantic, 0, 1, 1.0),
                  ConfigError);
}

TEST_CASE("select_prototype self-match and scale invariance") {
  Rng rng(11);
  Mat e = Mat::Zero(3, 8);
  e(0, 0) = 1.0;
  e(1, 1) = 1.0;
  e(2, 2) = 1.0;
  const PrototypeBank bank = synthetic_bank(e, 6, 16, rng);

  const auto [index, code] = select_prototype(bank, e.row(1).transpose());
  CHECK(index == 1);
  CHECK(flatten_code(code.rows()).transpose() == bank.codes().row(1));

  const auto scaled = select_prototype(bank, 42.0 * e.row(1).transpose());
  CHECK(scaled.first == 1);
}

TEST_CASE("select_prototype equals a brute-force scan") {
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 100;
    Mat e(n, 8);
    for (int i = 0; i < n; ++i) {
      e.row(i) = rng.gaussian_vec(8).normalized().transpose();
    }
    const PrototypeBank bank = synthetic_bank(e, 6, 16, rng);
    const Vec query = rng.gaussian_vec(8).normalized();

    int best = 0;
    double best_cos = -2.0;
    for (int i = 0; i < n; ++i) {
      const double c =
          bank.embeddings().row(i).dot(query) /
          (bank.embeddings().row(i).norm() * query.norm());
      if (c > best_cos) {
        best_cos = c;
        best = i;
      }
    }
    CHECK(select_prototype(bank, query).first == best);
  }
}

TEST_CASE("inject_medium_subset row provenance") {
  Rng rng(17);
  const ExtendedLatentCode base(rng.gaussian_mat(14, 8));
  const ExtendedLatentCode proto(rng.gaussian_mat(14, 8));
  const LayerSubsets subsets = LayerSubsets::standard(14);

  const ExtendedLatentCode mixed = inject_medium_subset(base, proto, subsets);
  for (int l = 1; l <= 14; ++l) {
    const bool medium = l >= 5 && l <= 8;
    const auto& source = medium ? proto : base;
    CHECK(mixed.rows().row(l - 1) == source.rows().row(l - 1));
  }

  CHECK(inject_medium_subset(base, base, subsets).rows() == base.rows());
  // Re-injecting the base's medium rows recovers the base exactly.
  const ExtendedLatentCode restored = inject_medium_subset(mixed, base, subsets);
  CHECK(restored.rows() == base.rows());

  const ExtendedLatentCode small(rng.gaussian_mat(6, 8));
  CHECK_THROWS_AS(inject_medium_subset(base, small, subsets), ShapeError);
}

TEST_CASE("prototype bank file round trip is exact") {
  namespace fs = std::filesystem;
  const ModelStack stack = toy();
  const PrototypeBank bank =
      build_prototype_bank(*stack.generator, *stack.semantic, 17, 55, 0.8);

  const fs::path dir = fs::temp_directory_path() / "ganedit_bank_test";
  fs::create_directories(dir);
  const fs::path file = dir / "bank.pbnk";
  bank.save(file);

  const PrototypeBank loaded =
      PrototypeBank::load(file, stack.generator.get(), stack.semantic.get());
  CHECK(loaded.codes() == bank.codes());
  CHECK(loaded.embeddings() == bank.embeddings());
  CHECK(loaded.sampler_seed() == 55);
  CHECK(loaded.truncation() == 0.8);

  // Saving the loaded bank reproduces the file byte for byte.
  const fs::path file2 = dir / "bank2.pbnk";
  loaded.save(file2);
  std::ifstream a(file, std::ios::binary), b(file2, std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
  CHECK(bytes_a == bytes_b);

  // Header checks against a mismatched generator.
  ToyStackConfig other;
  other.layer_count = 8;
  const ModelStack wrong = make_toy_stack(other);
  CHECK_THROWS_AS(PrototypeBank::load(file, wrong.generator.get()), ValidationError);

  std::ofstream corrupt(dir / "bad.pbnk", std::ios::binary);
  corrupt << "NOTABANK";
  corrupt.close();
  CHECK_THROWS_AS(PrototypeBank::load(dir / "bad.pbnk"), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("run_inversion validates basic contracts") {
  const ModelStack stack = toy();
  Rng rng(19);
  const ImageTensor image = random_image(16, rng);
  const TextPrompt prompt = stack.semantic->make_prompt("striped silk blouse");

  InversionConfig config;
  config.steps = 0;
  CHECK_THROWS_AS(run_inversion(image, prompt, LossWeights{}, config, stack), ConfigError);

  config.steps = 1;
  const InversionResult one = run_inversion(image, prompt, LossWeights{}, config, stack);
  CHECK(one.trajectory.size() == 1);

  const InversionConfig defaults;
  CHECK(defaults.steps == 500);
  CHECK(defaults.learning_rate == 5e-2);

  TextPrompt over;
  over.text = "too long";
  over.token_count = 77;
  CHECK_THROWS_AS(run_inversion(image, over, LossWeights{}, defaults, stack),
                  ValidationError);

  InversionConfig vanilla_inject;
  vanilla_inject.init_strategy = InitStrategy::kInjection;
  vanilla_inject.latent_space = LatentSpace::kVanilla;
  CHECK_THROWS_AS(run_inversion(image, prompt, LossWeights{}, vanilla_inject, stack),
                  ConfigError);

  InversionConfig inject;
  inject.init_strategy = InitStrategy::kInjection;
  CHECK_THROWS_AS(run_inversion(image, prompt, LossWeights{}, inject, stack), ConfigError);
}

TEST_CASE("run_inversion is deterministic") {
  const ModelStack stack = toy();
  Rng rng(23);
  const ImageTensor image = random_image(16, rng);
  const TextPrompt prompt = stack.semantic->make_prompt("red velvet dress");
  InversionConfig config;
  config.steps = 40;

  const InversionResult a = run_inversion(image, prompt, LossWeights{}, config, stack);
  const InversionResult b = run_inversion(image, prompt, LossWeights{}, config, stack);
  CHECK(a.optimized_code.rows() == b.optimized_code.rows());
  CHECK(a.final_image.data() == b.final_image.data());
  CHECK(a.init_code.rows() == b.init_code.rows());
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(same_breakdown(a.trajectory[i], b.trajectory[i]));
  }
  // The final image is the synthesis of the optimized code, bitwise.
  CHECK(a.final_image.data() ==
        stack.generator->synthesize(a.optimized_code).data());
  CHECK(a.config_echo.steps == 40);
  CHECK(a.config_echo.learning_rate == 5e-2);
}

TEST_CASE("quadratic-only objective reaches the normal-equations minimum") {
  const ModelStack stack = toy();
  const auto* gen = dynamic_cast<const ToyGenerator*>(stack.generator.get());
  REQUIRE(gen != nullptr);
  Rng rng(29);
  const ImageTensor image = random_image(16, rng);

  LossWeights weights;
  weights.clip = 0.0;
  weights.pose = 0.0;
  weights.head = 0.0;  // leaves im = 30, reg = 1

  InversionConfig config;  // 500 steps at the default rate
  const TextPrompt prompt = stack.semantic->make_prompt("unused");
  const InversionResult result = run_inversion(image, prompt, weights, config, stack);

  // Closed-form minimum of lambda_im ||diag(M)(Ax - y)||^2 + lambda_reg x^T R x.
  const Mat& a = gen->weight_matrix();
  const int px = image.pixel_count();
  const Vec body = stack.segmenter->parse(image).body();
  Vec mask(image.size());
  for (int c = 0; c < 3; ++c) {
    for (int p = 0; p < px; ++p) {
      mask[c * px + p] = 1.0 - body[p];
    }
  }
  const Mat am = mask.asDiagonal() * a;
  const Vec ym = mask.cwiseProduct(image.data());
  const int dim = 6 * 16;
  Mat reg_form = Mat::Zero(dim, dim);
  const double scale = 1.0 / (6 - 1);
  for (int j = 1; j < 6; ++j) {
    for (int d = 0; d < 16; ++d) {
      const int i0 = d;            // row 0 block
      const int ij = j * 16 + d;   // row j block
      reg_form(i0, i0) += scale;
      reg_form(ij, ij) += scale;
      reg_form(i0, ij) -= scale;
      reg_form(ij, i0) -= scale;
    }
  }
  const Mat lhs = weights.im * am.transpose() * am + weights.reg * reg_form;
  const Vec rhs = weights.im * am.transpose() * ym;
  const Vec x_star = lhs.ldlt().solve(rhs);
  const double residual = (am * x_star - ym).squaredNorm();
  const double reg_value = x_star.dot(reg_form * x_star);
  const double minimum = weights.im * residual + weights.reg * reg_value;

  CHECK(std::abs(result.trajectory.back().total - minimum) < 1e-3);
  // Convexity also guarantees monotone improvement end to end.
  CHECK(result.trajectory.back().total <= result.trajectory.front().total);
}

TEST_CASE("vanilla-space optimization keeps the code broadcast") {
  const ModelStack stack = toy();
  Rng rng(31);
  const ImageTensor image = random_image(16, rng);
  const TextPrompt prompt = stack.semantic->make_prompt("linen jacket");
  InversionConfig config;
  config.steps = 25;
  config.latent_space = LatentSpace::kVanilla;
  LossWeights weights;
  weights.reg = 0.0;  // degenerate in vanilla space

  const InversionResult result = run_inversion(image, prompt, weights, config, stack);
  CHECK(result.optimized_code.is_vanilla());
  CHECK(result.init_code.is_vanilla());
  CHECK(result.trajectory.size() == 25);
}

TEST_CASE("non-finite losses raise a diagnostic error with the step index") {
  const ModelStack stack = toy();
  Rng rng(37);
  const ImageTensor image = random_image(16, rng);
  const TextPrompt prompt = stack.semantic->make_prompt("plain tee");
  InversionConfig config;
  config.steps = 20;
  config.learning_rate = 1e160;  // drives the quadratic terms to overflow

  try {
    run_inversion(image, prompt, LossWeights{}, config, stack);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step() >= 1);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("injection initialization composes encoder and prototype rows") {
  const ModelStack stack = toy();
  Rng rng(41);
  const ImageTensor image = random_image(16, rng);
  const TextPrompt prompt = stack.semantic->make_prompt("floral print shirt");
  const PrototypeBank bank =
      build_prototype_bank(*stack.generator, *stack.semantic, 20, 7, 1.0);

  InversionConfig config;
  config.steps = 5;
  config.init_strategy = InitStrategy::kInjection;
  const InversionResult result =
      run_inversion(image, prompt, LossWeights{}, config, stack, &bank);

  const Vec text_embedding = stack.semantic->embed_text(prompt);
  const ExtendedLatentCode base = stack.encoder->invert(image);
  const auto [index, proto] = select_prototype(bank, text_embedding);
  const ExtendedLatentCode expected =
      inject_medium_subset(base, proto, LayerSubsets::standard(6));
  CHECK(result.init_code.rows() == expected.rows());
  (void)index;
}
