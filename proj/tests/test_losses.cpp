#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "glyphnet/losses.hpp"
#include "test_support.hpp"

using namespace glyphnet;
using namespace testsupport;

namespace {

PairFeatureBatch make_pair_batch(Rng& rng, int n, int d, int num_classes,
                                 bool unit_rows = true) {
  PairFeatureBatch b;
  b.left = unit_rows ? random_unit_rows(rng, n, d) : random_matrix(rng, n, d);
  b.right = unit_rows ? random_unit_rows(rng, n, d) : random_matrix(rng, n, d);
  b.left_labels = random_labels(rng, n, num_classes);
  b.right_labels = random_labels(rng, n, num_classes);
  b.flags = flags_from_labels(b.left_labels, b.right_labels);
  return b;
}

}  // namespace

TEST_CASE("scl_loss on identical same-class rows equals B*ln2") {
  EmbeddingBatch batch;
  batch.vectors = Matrix::Zero(3, 4);
  Eigen::RowVector4d v(0.5, 0.5, 0.5, 0.5);
  for (int i = 0; i < 3; ++i) batch.vectors.row(i) = v;
  batch.labels = IntVector::Zero(3);
  batch.unit_normalized = true;

  for (double tau : {0.07, 0.5, 2.0}) {
    REQUIRE(scl_loss(batch, tau) == Catch::Approx(3.0 * std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("scl_loss is zero when every positive set is empty") {
  Rng rng(11);
  EmbeddingBatch batch;
  batch.vectors = random_unit_rows(rng, 4, 6);
  batch.labels = IntVector(4);
  batch.labels << 0, 1, 2, 3;
  batch.unit_normalized = true;
  REQUIRE(scl_loss(batch, 0.07) == 0.0);
}

TEST_CASE("scl_loss matches the scalar loop oracle") {
  Rng rng(12);
  Matrix z = random_unit_rows(rng, 6, 4);
  IntVector labels(6);
  labels << 0, 0, 1, 1, 2, 2;
  const double got = scl_loss(z, labels, 0.07);
  const double expected = scl_oracle(z, labels, 0.07);
  REQUIRE(got == Catch::Approx(expected).epsilon(1e-9));
}

TEST_CASE("scl_loss input validation") {
  Rng rng(13);
  EmbeddingBatch batch;
  batch.vectors = random_unit_rows(rng, 1, 4);
  batch.labels = IntVector::Zero(1);
  batch.unit_normalized = true;
  REQUIRE_THROWS_AS(scl_loss(batch, 0.07), std::invalid_argument);

  batch.vectors = random_unit_rows(rng, 3, 4);
  batch.labels = IntVector::Zero(3);
  REQUIRE_THROWS_AS(scl_loss(batch, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(scl_loss(batch, -1.0), std::invalid_argument);

  batch.vectors(0, 0) += 0.1;  // breaks unit norm
  REQUIRE_THROWS_AS(scl_loss(batch, 0.07), std::invalid_argument);
}

TEST_CASE("scl_loss is invariant under simultaneous row/label permutation") {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(2, 8);
    const int d = rng.uniform_int(2, 16);
    Matrix z = random_unit_rows(rng, n, d);
    IntVector labels = random_labels(rng, n, 3);
    const double base = scl_loss(z, labels, 0.07);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    Matrix zp(n, d);
    IntVector lp(n);
    for (int i = 0; i < n; ++i) {
      zp.row(i) = z.row(perm[i]);
      lp[i] = labels[perm[i]];
    }
    REQUIRE(scl_loss(zp, lp, 0.07) == Catch::Approx(base).margin(1e-9));
  }
}

TEST_CASE("focal_pair_loss is zero at certain targets") {
  Matrix pl = Matrix::Zero(2, 3);
  Matrix pr = Matrix::Zero(2, 3);
  IntVector ll(2), rl(2);
  ll << 0, 2;
  rl << 1, 1;
  pl(0, 0) = 1.0;
  pl(1, 2) = 1.0;
  pr(0, 1) = 1.0;
  pr(1, 1) = 1.0;
  REQUIRE(focal_pair_loss(pl, pr, ll, rl, 3.5) == 0.0);
}

TEST_CASE("focal_pair_loss with gamma=0 on a 50/50 pair equals 2 ln 2") {
  Matrix pl(1, 2), pr(1, 2);
  pl << 0.5, 0.5;
  pr << 0.5, 0.5;
  IntVector ll = IntVector::Zero(1), rl = IntVector::Zero(1);
  REQUIRE(focal_pair_loss(pl, pr, ll, rl, 0.0) ==
          Catch::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("focal_pair_loss matches the element-wise oracle at gamma=3.5") {
  Rng rng(21);
  Matrix pl = random_probabilities(rng, 3, 5);
  Matrix pr = random_probabilities(rng, 3, 5);
  IntVector ll = random_labels(rng, 3, 5);
  IntVector rl = random_labels(rng, 3, 5);
  const double got = focal_pair_loss(pl, pr, ll, rl, 3.5);
  REQUIRE(got == Catch::Approx(focal_oracle(pl, pr, ll, rl, 3.5)).epsilon(1e-9));
}

TEST_CASE("focal_pair_loss reduces to summed cross-entropy at gamma=0") {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(1, 8);
    const int c = rng.uniform_int(2, 12);
    Matrix pl = random_probabilities(rng, n, c);
    Matrix pr = random_probabilities(rng, n, c);
    IntVector ll = random_labels(rng, n, c);
    IntVector rl = random_labels(rng, n, c);
    double ce = 0.0;
    for (int j = 0; j < n; ++j)
      ce -= std::log(pl(j, ll[j])) + std::log(pr(j, rl[j]));
    REQUIRE(focal_pair_loss(pl, pr, ll, rl, 0.0) == Catch::Approx(ce).margin(1e-12));
  }
}

TEST_CASE("focal_pair_loss is non-increasing in each target probability") {
  Rng rng(23);
  for (double gamma : {0.0, 1.0, 2.0, 3.5}) {
    Matrix pl = random_probabilities(rng, 4, 6);
    Matrix pr = random_probabilities(rng, 4, 6);
    IntVector ll = random_labels(rng, 4, 6);
    IntVector rl = random_labels(rng, 4, 6);
    const double base = focal_pair_loss(pl, pr, ll, rl, gamma);
    Matrix bumped = pl;
    for (int j = 0; j < 4; ++j)
      bumped(j, ll[j]) = std::min(1.0, bumped(j, ll[j]) + 0.05);
    REQUIRE(focal_pair_loss(bumped, pr, ll, rl, gamma) <= base + 1e-12);
  }
}

TEST_CASE("focal_pair_loss rejects bad inputs") {
  Matrix pl(1, 2), pr(1, 2);
  pl << 1.0, 0.0;
  pr << 0.0, 1.0;
  IntVector ll = IntVector::Zero(1), rl = IntVector::Zero(1);
  REQUIRE_THROWS_AS(focal_pair_loss(pl, pr, ll, rl, -0.5), std::invalid_argument);
  // pr target (class 0) is exactly zero.
  REQUIRE_THROWS_AS(focal_pair_loss(pl, pr, ll, rl, 2.0), std::invalid_argument);
}

TEST_CASE("lmcl_loss with margin 0 and scale 1 is cross-entropy on cosine softmax") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(1, 8);
    const int c = rng.uniform_int(2, 12);
    Matrix cl = random_cosines(rng, n, c);
    Matrix cr = random_cosines(rng, n, c);
    IntVector ll = random_labels(rng, n, c);
    IntVector rl = random_labels(rng, n, c);
    double ce = 0.0;
    for (int j = 0; j < n; ++j) {
      for (int member = 0; member < 2; ++member) {
        const Matrix& m = member == 0 ? cl : cr;
        const int y = member == 0 ? ll[j] : rl[j];
        double denom = 0.0;
        for (int k = 0; k < c; ++k) denom += std::exp(m(j, k));
        ce -= std::log(std::exp(m(j, y)) / denom);
      }
    }
    REQUIRE(lmcl_loss(cl, cr, ll, rl, 1.0, 0.0) == Catch::Approx(ce).margin(1e-12));
  }
}

TEST_CASE("lmcl_loss saturates to ~0 on a maximally separated cosine pair") {
  Matrix cl(1, 2), cr(1, 2);
  cl << 1.0, -1.0;
  cr << 1.0, -1.0;
  IntVector ll = IntVector::Zero(1), rl = IntVector::Zero(1);
  REQUIRE(lmcl_loss(cl, cr, ll, rl, 30.0, 0.40) < 1e-12);
}

TEST_CASE("lmcl_loss matches the scalar loop oracle") {
  Rng rng(32);
  Matrix cl = random_cosines(rng, 4, 10);
  Matrix cr = random_cosines(rng, 4, 10);
  IntVector ll = random_labels(rng, 4, 10);
  IntVector rl = random_labels(rng, 4, 10);
  const double got = lmcl_loss(cl, cr, ll, rl, 30.0, 0.40);
  REQUIRE(got == Catch::Approx(lmcl_oracle(cl, cr, ll, rl, 30.0, 0.40)).epsilon(1e-9));
}

TEST_CASE("lmcl_loss strictly increases with the margin away from saturation") {
  Rng rng(33);
  Matrix cl = random_cosines(rng, 3, 6);
  Matrix cr = random_cosines(rng, 3, 6);
  IntVector ll = random_labels(rng, 3, 6);
  IntVector rl = random_labels(rng, 3, 6);
  double prev = lmcl_loss(cl, cr, ll, rl, 30.0, 0.0);
  for (double m : {0.1, 0.2, 0.3, 0.4, 0.5}) {
    const double cur = lmcl_loss(cl, cr, ll, rl, 30.0, m);
    REQUIRE(cur > prev);
    prev = cur;
  }
}

TEST_CASE("lmcl_loss rejects bad hyperparameters") {
  Matrix c(1, 2);
  c << 0.5, -0.5;
  IntVector y = IntVector::Zero(1);
  REQUIRE_THROWS_AS(lmcl_loss(c, c, y, y, 0.0, 0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(lmcl_loss(c, c, y, y, 30.0, 0.6), std::invalid_argument);
  REQUIRE_THROWS_AS(lmcl_loss(c, c, y, y, 30.0, -0.1), std::invalid_argument);
}

TEST_CASE("euclidean_pair_loss saturated configurations contribute zero") {
  Matrix l(2, 3), r(2, 3);
  l.row(0) << 1.0, 0.0, 0.0;   // positive pair, identical vectors
  r.row(0) << 1.0, 0.0, 0.0;
  l.row(1) << 1.0, 0.0, 0.0;   // negative pair at distance sqrt(2) >= m_e = 1
  r.row(1) << 0.0, 1.0, 0.0;
  IntVector flags(2);
  flags << 1, 0;
  REQUIRE(euclidean_pair_loss(l, r, flags, 1.0) == 0.0);
}

TEST_CASE("euclidean_pair_loss matches the scalar loop oracle") {
  Rng rng(41);
  PairFeatureBatch b = make_pair_batch(rng, 5, 8, 3);
  const double got = euclidean_pair_loss(b, 1.0);
  REQUIRE(got ==
          Catch::Approx(euclidean_oracle(b.left, b.right, b.flags, 1.0)).epsilon(1e-9));
}

TEST_CASE("euclidean_pair_loss rejects bad inputs") {
  Matrix l(2, 3), r(3, 3);
  IntVector flags(2);
  flags << 1, 0;
  REQUIRE_THROWS_AS(euclidean_pair_loss(l, r, flags, 1.0), std::invalid_argument);
  Matrix r2(2, 3);
  REQUIRE_THROWS_AS(euclidean_pair_loss(l, r2, flags, 0.0), std::invalid_argument);
}

TEST_CASE("angular_pair_loss is zero for aligned positives and 60-degree negatives") {
  Matrix l(2, 3), r(2, 3);
  l.row(0) << 0.2, 0.5, -0.1;
  r.row(0) = 5.0 * l.row(0);          // same direction
  l.row(1) << 1.0, 0.0, 0.0;
  r.row(1) << 0.5, std::sqrt(3.0) / 2.0, 0.0;  // 60 degrees; chord exactly m_a
  IntVector flags(2);
  flags << 1, 0;
  REQUIRE(angular_pair_loss(l, r, flags, 1.0) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("angular_pair_loss chord and cosine forms agree") {
  Rng rng(51);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = rng.uniform_int(1, 8);
    const int d = rng.uniform_int(2, 16);
    PairFeatureBatch b = make_pair_batch(rng, n, d, 3, /*unit_rows=*/false);
    const double eq5 = angular_pair_loss(b.left, b.right, b.flags, 1.0);
    const double eq6 = angular_pair_loss_cosine_form(b.left, b.right, b.flags, 1.0);
    REQUIRE(eq5 == Catch::Approx(eq6).margin(1e-9));
    REQUIRE(eq5 ==
            Catch::Approx(angular_oracle(b.left, b.right, b.flags, 1.0)).margin(1e-9));
  }
}

TEST_CASE("angular_pair_loss is invariant to positive row rescaling") {
  Rng rng(52);
  PairFeatureBatch b = make_pair_batch(rng, 6, 5, 3, /*unit_rows=*/false);
  const double base = angular_pair_loss(b.left, b.right, b.flags, 1.0);
  Matrix l = b.left, r = b.right;
  for (int j = 0; j < 6; ++j) {
    l.row(j) *= rng.uniform(0.1, 10.0);
    r.row(j) *= rng.uniform(0.1, 10.0);
  }
  REQUIRE(angular_pair_loss(l, r, b.flags, 1.0) == Catch::Approx(base).margin(1e-9));
}

TEST_CASE("angular_pair_loss rejects zero-norm rows") {
  Matrix l = Matrix::Zero(1, 3);
  Matrix r = Matrix::Ones(1, 3);
  IntVector flags = IntVector::Ones(1);
  REQUIRE_THROWS_AS(angular_pair_loss(l, r, flags, 1.0), std::invalid_argument);
}

TEST_CASE("all pair losses are non-negative on random batches") {
  Rng rng(61);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = rng.uniform_int(1, 8);
    const int d = rng.uniform_int(2, 12);
    PairFeatureBatch b = make_pair_batch(rng, n, d, 4, false);
    REQUIRE(euclidean_pair_loss(b.left, b.right, b.flags, 1.0) >= 0.0);
    REQUIRE(angular_pair_loss(b.left, b.right, b.flags, 1.0) >= 0.0);
  }
}

TEST_CASE("total_loss arithmetic and validation") {
  REQUIRE(total_loss(1.0, 2.0, 3.0, 4.0, 0.3) == Catch::Approx(5.1).epsilon(1e-15));
  REQUIRE(total_loss(1.5, 2.5, 3.0, 4.0, 0.0) == Catch::Approx(4.0).epsilon(1e-15));
  const double inf = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(total_loss(inf, 0, 0, 0, 0.3), std::invalid_argument);
  REQUIRE_THROWS_AS(total_loss(0, 0, 0, 0, -0.1), std::invalid_argument);
}

TEST_CASE("LossConfig validation enforces documented ranges") {
  LossConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  cfg.m_c = 0.6;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = LossConfig{};
  cfg.tau = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = LossConfig{};
  cfg.gamma = 4.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}
