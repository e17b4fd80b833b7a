#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ganedit/metrics.hpp"
#include "helpers.hpp"

#include <cmath>

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

// Pose stub keyed on the first pixel's sign: images tagged negative map to
// masks_a, others to masks_b.
struct StubPose : PoseParser {
  Mat masks_a, masks_b;
  int side = 8;
  BodyPartMaskSet parse(const ImageTensor& image) const override {
    BodyPartMaskSet set;
    set.side = side;
    set.masks = image.data()[0] < 0.0 ? masks_a : masks_b;
    for (int j = 0; j < set.masks.rows(); ++j) {
      set.part_indices.push_back(j + 1);
    }
    return set;
  }
  Vec parse_vjp(const ImageTensor&, const Mat&) const override {
    throw std::logic_error("not differentiable");
  }
};

struct StubFace : FaceEmbedder {
  std::optional<Vec> a, b;
  std::optional<Vec> embed(const ImageTensor& image) const override {
    return image.data()[0] < 0.0 ? a : b;
  }
};

ImageTensor tagged_image(int side, double tag) {
  Vec data = Vec::Constant(3 * side * side, 0.1);
  data[0] = tag;
  return ImageTensor(side, data);
}

}  // namespace

TEST_CASE("semantic relevance endpoints and scale invariance") {
  const ModelStack stack = toy();
  Rng rng(3);
  const ImageTensor image = random_image(16, rng);
  const TextPrompt prompt = stack.semantic->make_prompt("navy polo shirt");
  const double s = semantic_relevance(image, prompt, *stack.semantic);
  CHECK(s >= -1.0);
  CHECK(s <= 1.0);

  // Against explicit cosine arithmetic on the model's own embeddings.
  const Vec vi = stack.semantic->embed_image(image);
  const Vec vt = stack.semantic->embed_text(prompt);
  CHECK(s == doctest::Approx(vi.dot(vt) / (vi.norm() * vt.norm())).epsilon(1e-12));

  // cos is invariant to positive rescaling of either argument.
  const double cos_scaled = (3.0 * vi).dot(0.25 * vt) /
                            ((3.0 * vi).norm() * (0.25 * vt).norm());
  CHECK(rel_err(cos_scaled, s) < 1e-12);
}

TEST_CASE("pose IoU fixtures on hand-counted 8x8 masks") {
  StubPose pose;
  const int px = 64;
  // Part 0: A has 8 pixels, B has 7, overlap 3 -> union 12, IoU 3/12.
  Mat a = Mat::Constant(1, px, 0.1);
  Mat b = Mat::Constant(1, px, 0.1);
  for (int i = 0; i < 8; ++i) a(0, i) = 0.9;        // A: pixels 0..7
  for (int i = 5; i < 12; ++i) b(0, i) = 0.9;       // B: pixels 5..11, overlap {5,6,7}
  pose.masks_a = a;
  pose.masks_b = b;

  const ImageTensor ia = tagged_image(8, -1.0);
  const ImageTensor ib = tagged_image(8, 1.0);
  const auto iou = pose_iou(ia, ib, pose);
  REQUIRE(iou.has_value());
  CHECK(*iou == doctest::Approx(0.25).epsilon(1e-15));
  // Symmetry.
  CHECK(*pose_iou(ib, ia, pose) == *iou);

  // Identical images parse identically -> IoU 1.
  CHECK(*pose_iou(ia, ia, pose) == 1.0);

  // Disjoint nonempty masks -> 0.
  Mat c = Mat::Constant(1, px, 0.1);
  for (int i = 20; i < 24; ++i) c(0, i) = 0.9;
  pose.masks_b = c;
  pose.masks_a = a;
  CHECK(*pose_iou(ia, ib, pose) == 0.0);
}

TEST_CASE("pose IoU skips parts that are empty in both masks") {
  StubPose pose;
  const int px = 64;
  Mat a = Mat::Constant(2, px, 0.1);
  Mat b = Mat::Constant(2, px, 0.1);
  // Part 0 has content with IoU 1/3; part 1 is empty everywhere.
  a(0, 0) = 0.9;
  b(0, 0) = 0.9;
  a(0, 1) = 0.9;
  b(0, 2) = 0.9;
  pose.masks_a = a;
  pose.masks_b = b;
  const auto iou = pose_iou(tagged_image(8, -1.0), tagged_image(8, 1.0), pose);
  REQUIRE(iou.has_value());
  CHECK(*iou == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // All parts empty -> absent.
  pose.masks_a = Mat::Constant(2, px, 0.1);
  pose.masks_b = Mat::Constant(2, px, 0.1);
  CHECK_FALSE(pose_iou(tagged_image(8, -1.0), tagged_image(8, 1.0), pose).has_value());
}

TEST_CASE("identity similarity cosine and absence handling") {
  const ModelStack stack = toy();
  Rng rng(5);
  const ImageTensor image = random_image(16, rng);
  const auto self = identity_similarity(image, image, *stack.face);
  REQUIRE(self.has_value());
  CHECK(*self == doctest::Approx(1.0).epsilon(1e-12));

  StubFace face;
  Vec ea = rng.gaussian_vec(8).normalized();
  Vec eb = rng.gaussian_vec(8).normalized();
  face.a = ea;
  face.b = eb;
  const auto sim = identity_similarity(tagged_image(8, -1.0), tagged_image(8, 1.0), face);
  REQUIRE(sim.has_value());
  double dot = 0.0;
  for (int i = 0; i < 8; ++i) dot += ea[i] * eb[i];
  CHECK(*sim == doctest::Approx(dot).epsilon(1e-12));

  face.b = std::nullopt;  // detection failure on one side
  CHECK_FALSE(identity_similarity(tagged_image(8, -1.0), tagged_image(8, 1.0), face)
                  .has_value());
}

TEST_CASE("fid of a set against itself is zero") {
  const ModelStack stack = toy();
  Rng rng(7);
  std::vector<ImageTensor> set;
  for (int i = 0; i < 6; ++i) {
    set.push_back(random_image(16, rng));
  }
  CHECK(fid(set, set, *stack.semantic) <= 1e-6);
}

TEST_CASE("fid univariate oracle") {
  // Sample variance (unbiased) of both sets is exactly 1; means are 0 and 1.
  Mat a(3, 1), b(3, 1);
  a << -1.0, 0.0, 1.0;
  b << 0.0, 1.0, 2.0;
  CHECK(std::abs(fid_from_embeddings(a, b) - 1.0) < 1e-6);

  // Random univariate sets against the scalar closed form (eps = 0).
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 8, m = 11;
    Mat x(n, 1), y(m, 1);
    for (int i = 0; i < n; ++i) x(i, 0) = rng.gaussian() * 2.0 + 0.5;
    for (int i = 0; i < m; ++i) y(i, 0) = rng.gaussian() * 0.7 - 1.0;
    const double mx = x.col(0).mean();
    const double my = y.col(0).mean();
    const double vx = (x.col(0).array() - mx).square().sum() / (n - 1);
    const double vy = (y.col(0).array() - my).square().sum() / (m - 1);
    const double expected =
        (mx - my) * (mx - my) + vx + vy - 2.0 * std::sqrt(vx * vy);
    CHECK(rel_err(fid_from_embeddings(x, y, 0.0), expected) < 1e-9);
  }
}

TEST_CASE("fid symmetry, nonnegativity, and input validation") {
  Rng rng(13);
  Mat a(10, 4), b(14, 4);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = rng.gaussian();
  for (int i = 0; i < b.size(); ++i) b.data()[i] = rng.gaussian() * 1.4 + 0.2;
  const double ab = fid_from_embeddings(a, b);
  const double ba = fid_from_embeddings(b, a);
  CHECK(ab >= 0.0);
  CHECK(std::abs(ab - ba) < 1e-6);

  CHECK_THROWS_AS(fid_from_embeddings(Mat::Zero(1, 4), b), ValidationError);
  CHECK_THROWS_AS(fid_from_embeddings(a, Mat::Zero(14, 3)), ShapeError);
  const ModelStack stack = toy();
  std::vector<ImageTensor> one{random_image(16, rng)};
  std::vector<ImageTensor> two{random_image(16, rng), random_image(16, rng)};
  CHECK_THROWS_AS(fid(one, two, *stack.semantic), ValidationError);
}

TEST_CASE("aggregate of a single record echoes the record") {
  PromptGroup group;
  group.prompt_id = "p000";
  MetricReport r;
  r.semantic = 0.42;
  r.iou = 0.8;
  r.identity = 0.9;
  group.reports.push_back(r);
  group.fid = 12.5;

  const AggregateSummary s = aggregate({group});
  CHECK(s.semantic.mean == 0.42);
  CHECK(s.semantic.count == 1);
  CHECK(s.iou.mean == 0.8);
  CHECK(s.identity.mean == 0.9);
  CHECK(s.fid.mean == 12.5);
  CHECK(s.per_prompt.size() == 1);
  CHECK(s.per_prompt[0].semantic_mean == 0.42);
}

TEST_CASE("aggregate averages FID over prompts and counts skips") {
  MetricReport full;
  full.semantic = 0.5;
  full.iou = 0.6;
  full.identity = 0.7;
  MetricReport missing;
  missing.semantic = 0.3;
  missing.iou = 0.4;  // identity absent

  PromptGroup g1{"p000", {full, missing}, 10.0};
  PromptGroup g2{"p001", {full}, 20.0};
  const AggregateSummary s = aggregate({g1, g2});

  CHECK(s.fid.mean == doctest::Approx(15.0).epsilon(1e-15));
  CHECK(s.fid.count == 2);
  CHECK(s.semantic.count == 3);
  CHECK(s.semantic.mean == doctest::Approx((0.5 + 0.3 + 0.5) / 3.0).epsilon(1e-15));
  CHECK(s.identity.count == 2);
  CHECK(s.identity.skipped == 1);
  CHECK(s.identity.mean == doctest::Approx(0.7).epsilon(1e-15));

  CHECK_THROWS_AS(aggregate({}), ValidationError);
}
