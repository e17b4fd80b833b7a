#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ganedit/core.hpp"
#include "helpers.hpp"

#include <cmath>

using namespace ganedit;

TEST_CASE("to_canonical_range maps interval endpoints and midpoints") {
  const int n = 4;
  const Eigen::Index size = 3 * n * n;

  Vec half = Vec::Constant(size, 0.5);
  ImageTensor mid = to_canonical_range(half, 3, n, n, Interval{0.0, 1.0});
  CHECK(mid.data().isApproxToConstant(0.0, 1e-15));

  Vec top = Vec::Constant(size, 255.0);
  ImageTensor one = to_canonical_range(top, 3, n, n, Interval{0.0, 255.0});
  CHECK(one.data().isApproxToConstant(1.0, 1e-15));

  Vec grey = Vec::Constant(size, 64.0);
  ImageTensor mapped = to_canonical_range(grey, 3, n, n, Interval{0.0, 255.0});
  CHECK(mapped.data()[0] == doctest::Approx(-0.4980392156862745).epsilon(1e-12));
  CHECK(mapped.data()[0] == doctest::Approx(2.0 * 64.0 / 255.0 - 1.0).epsilon(1e-15));
}

TEST_CASE("to_canonical_range rejects bad input") {
  const int n = 4;
  Vec data = Vec::Zero(3 * n * n);
  CHECK_THROWS_AS(to_canonical_range(data, 1, n, n, Interval{0, 1}), ShapeError);
  CHECK_THROWS_AS(to_canonical_range(data, 3, n, n + 1, Interval{0, 1}), ShapeError);
  CHECK_THROWS_AS(to_canonical_range(Vec::Zero(5), 3, n, n, Interval{0, 1}), ShapeError);
  CHECK_THROWS_AS(to_canonical_range(data, 3, n, n, Interval{1.0, 1.0}), RangeError);
  data[7] = std::nan("");
  CHECK_THROWS_AS(to_canonical_range(data, 3, n, n, Interval{0, 1}), RangeError);
}

TEST_CASE("canonical range round trip") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4 + 2 * (trial % 3);
    const double lo = rng.gaussian() * 10.0;
    const double hi = lo + 0.5 + rng.uniform() * 100.0;
    Vec data(3 * n * n);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      data[i] = lo + rng.uniform() * (hi - lo);
    }
    const ImageTensor canonical = to_canonical_range(data, 3, n, n, Interval{lo, hi});
    const Vec back = from_canonical_range(canonical, Interval{lo, hi});
    CHECK((back - data).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("validate_latent checks layer count and finiteness") {
  Rng rng(3);
  const ExtendedLatentCode code(rng.gaussian_mat(14, 512));
  CHECK(&validate_latent(code, 14) == &code);
  CHECK_THROWS_AS(validate_latent(code, 18), ShapeError);

  Mat bad = rng.gaussian_mat(4, 8);
  bad(2, 3) = std::nan("");
  CHECK_THROWS_AS(ExtendedLatentCode{bad}, RangeError);
}

TEST_CASE("is_vanilla detects broadcast rows") {
  Rng rng(5);
  const Vec row = rng.gaussian_vec(16);
  for (int layers : {2, 6, 14}) {
    CHECK(ExtendedLatentCode::broadcast(row, layers).is_vanilla());
  }
  Mat rows = ExtendedLatentCode::broadcast(row, 6).rows();
  rows(3, 2) = std::nextafter(rows(3, 2), 1e300);  // one ulp breaks vanilla-ness
  CHECK_FALSE(ExtendedLatentCode(rows).is_vanilla());
}

TEST_CASE("flatten_code is row-major") {
  Mat rows(2, 3);
  rows << 1, 2, 3, 4, 5, 6;
  const Vec flat = flatten_code(rows);
  for (int j = 0; j < 2; ++j) {
    for (int d = 0; d < 3; ++d) {
      CHECK(flat[j * 3 + d] == rows(j, d));
    }
  }
  CHECK(unflatten_code(flat, 2, 3) == rows);
  CHECK_THROWS_AS(unflatten_code(flat, 2, 4), ShapeError);
}

TEST_CASE("loss weight defaults and validation") {
  const LossWeights w;
  CHECK(w.clip == 1.0);
  CHECK(w.pose == 10.0);
  CHECK(w.reg == 1.0);
  CHECK(w.im == 30.0);
  CHECK(w.head == 1.0);
  w.validate();

  LossWeights bad;
  bad.pose = -0.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("inversion config defaults and validation") {
  const InversionConfig c;
  CHECK(c.steps == 500);
  CHECK(c.learning_rate == 5e-2);
  CHECK(c.beta1 == 0.9);
  CHECK(c.beta2 == 0.999);
  CHECK(c.epsilon == 1e-8);
  CHECK(c.init_strategy == InitStrategy::kEncoder);
  CHECK(c.latent_space == LatentSpace::kExtended);
  c.validate();

  InversionConfig bad = c;
  bad.steps = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.beta2 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("enum string round trips") {
  for (auto s : {InitStrategy::kEncoder, InitStrategy::kMean, InitStrategy::kInjection}) {
    CHECK(init_strategy_from_string(to_string(s)) == s);
  }
  for (auto s : {LatentSpace::kVanilla, LatentSpace::kExtended}) {
    CHECK(latent_space_from_string(to_string(s)) == s);
  }
  CHECK_THROWS_AS(init_strategy_from_string("bogus"), ConfigError);
}

TEST_CASE("rng is deterministic and well scaled") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.gaussian() == b.gaussian());
  }
  Rng c(42);
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = c.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    mean += u;
  }
  CHECK(mean / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("image tensor shape checks") {
  CHECK_THROWS_AS(ImageTensor(4, Vec::Zero(10)), ShapeError);
  CHECK_THROWS_AS(ImageTensor(0, Vec::Zero(0)), ShapeError);
  Vec bad = Vec::Zero(3 * 4 * 4);
  bad[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(ImageTensor(4, bad), RangeError);
  const ImageTensor ok = ImageTensor::zeros(4);
  CHECK(ok.side() == 4);
  CHECK(ok.index(2, 3, 1) == 2 * 16 + 3 * 4 + 1);
}
