#include <cmath>

#include "doctest.h"
#include "keyrate/error.hpp"
#include "keyrate/rates.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace keyrate;
using namespace testutil;

TEST_CASE("rates: q = sigma_x is the origin") {
  const GeneralModel g = degraded();
  const RatePair r = rates_general(g, ConditionalCov(g.sigma_x(), g.sigma_x()));
  CHECK(std::abs(r.rp) < 1e-15);
  CHECK(std::abs(r.rk) < 1e-15);

  const AlignedModel a(mat(1, 1, {2}), mat(1, 1, {1}), mat(1, 1, {2}));
  const RatePair ra = rates_aligned(a, ConditionalCov(a.sigma_x(), a.sigma_x()));
  CHECK(std::abs(ra.rp) < 1e-15);
  CHECK(std::abs(ra.rk) < 1e-15);
}

TEST_CASE("rates: scalar aligned example") {
  const AlignedModel a(mat(1, 1, {2}), mat(1, 1, {1}), mat(1, 1, {2}));
  const RatePair r = rates_aligned(a, ConditionalCov(a.sigma_x(), mat(1, 1, {1})));
  CHECK(r.rp == doctest::Approx(0.143841036225890464).epsilon(1e-13));
  CHECK(r.rk == doctest::Approx(0.0588915178281917273).epsilon(1e-13));
  const oracle::ScalarRates o = oracle::scalar_aligned(2, 1, 2, 1);
  CHECK(r.rp == doctest::Approx(o.rp).epsilon(1e-13));
  CHECK(r.rk == doctest::Approx(o.rk).epsilon(1e-13));
}

TEST_CASE("rates: small-q limit of the degraded model is the mutual-information gap") {
  const GeneralModel g = degraded();
  CHECK(mutual_information_gap(g) == doctest::Approx(oracle::kDegradedLimit).epsilon(1e-13));
  const RatePair r = rates_general(g, ConditionalCov(g.sigma_x(), 1e-9 * Matrix::Identity(2, 2)));
  CHECK(std::abs(r.rk - oracle::kDegradedLimit) < 1e-8);
}

TEST_CASE("rates: asymptotic limits") {
  CHECK(asymptotic_limit(degraded()) == doctest::Approx(oracle::kDegradedLimit).epsilon(1e-12));
  CHECK(asymptotic_limit(crossed()) == doctest::Approx(oracle::kCrossedLimit).epsilon(1e-12));
  CHECK(mutual_information_gap(crossed()) == 0.0);
  const GeneralModel same(2.0 * Matrix::Identity(2, 2), mat(1, 2, {1, 0.5}), mat(1, 2, {1, 0.5}));
  CHECK(asymptotic_limit(same) == 0.0);
}

TEST_CASE("rates: equal noises give zero key rate everywhere") {
  PhiloxStream rng(21, 0);
  const Matrix w = spd(rng, 2);
  const AlignedModel a(spd(rng, 2), w, w);
  for (int i = 0; i < 50; ++i) {
    const ConditionalCov q(a.sigma_x(), random_conditional(rng, a.sigma_x().matrix()));
    CHECK(std::abs(rates_aligned(a, q).rk) < 1e-14);
  }
}

TEST_CASE("rates: enhanced functionals at the two extremes") {
  PhiloxStream rng(22, 0);
  const AlignedModel a(spd(rng, 2), spd(rng, 2, 0.2, 0.6), spd(rng, 2, 1.0, 2.0));
  for (int i = 0; i < 20; ++i) {
    const ConditionalCov q(a.sigma_x(), random_conditional(rng, a.sigma_x().matrix()));
    const RatePair base = rates_aligned(a, q);
    const RatePair same = rates_enhanced(a, a.sigma_wy(), q);
    CHECK(std::abs(base.rp - same.rp) < 1e-14);
    CHECK(std::abs(base.rk - same.rk) < 1e-14);
    // precision form agrees with the covariance form
    const Matrix prec = spd_inverse(a.sigma_wy().matrix());
    const RatePair viap = rates_enhanced_precision(to_general(a), prec, q.matrix());
    CHECK(std::abs(viap.rp - base.rp) < 1e-12);
    CHECK(std::abs(viap.rk - base.rk) < 1e-12);
  }
  // W~ = S_wz is admissible only when S_wz <= S_wy; then the key rate vanishes.
  const AlignedModel eve_better(a.sigma_x().matrix(), a.sigma_wz().matrix(), a.sigma_wy().matrix());
  for (int i = 0; i < 20; ++i) {
    const ConditionalCov q(a.sigma_x(), random_conditional(rng, a.sigma_x().matrix()));
    CHECK(std::abs(rates_enhanced(eve_better, eve_better.sigma_wz(), q).rk) < 1e-14);
  }
  try {
    rates_enhanced(a, a.sigma_wz(), ConditionalCov(a.sigma_x(), a.sigma_x().matrix()));
    FAIL("expected InvalidEnhancedNoise");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidEnhancedNoise);
  }
  try {
    rates_enhanced(a, SymMatrix(3.0 * Matrix::Identity(2, 2)),
                   ConditionalCov(a.sigma_x(), a.sigma_x().matrix()));
    FAIL("expected InvalidEnhancedNoise");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidEnhancedNoise);
  }
}

TEST_CASE("rates: property sweep over random models and conditionals") {
  PhiloxStream rng(23, 0);
  for (int model = 0; model < 10; ++model) {
    const GeneralModel g = random_general(rng, 2 + model % 2, 1 + model % 3, 1 + (model + 1) % 3);
    const double limit = asymptotic_limit(g);
    for (int i = 0; i < 200; ++i) {
      const ConditionalCov q(g.sigma_x(), random_conditional(rng, g.sigma_x().matrix(), 1e-4, 1.0));
      const RatePair r = rates_general(g, q);
      CHECK(r.rp >= -1e-12);
      CHECK(r.rk <= limit + 1e-12);
    }
    const ConditionalCov near(g.sigma_x(), (1 - 1e-9) * g.sigma_x().matrix());
    CHECK(rates_general(g, near).rp < 1e-8);
  }
}

TEST_CASE("rates: degraded aligned models never give negative key rate") {
  PhiloxStream rng(24, 0);
  for (int model = 0; model < 20; ++model) {
    const Matrix wy = spd(rng, 2, 0.2, 1.0);
    const Matrix wz = wy + spd(rng, 2, 0.01, 1.0);
    const AlignedModel a(spd(rng, 2), wy, wz);
    for (int i = 0; i < 50; ++i) {
      const ConditionalCov q(a.sigma_x(), random_conditional(rng, a.sigma_x().matrix(), 1e-3, 1.0));
      CHECK(rates_aligned(a, q).rk >= -1e-14);
    }
  }
}

TEST_CASE("rates: scalar models match the closed form on 100 random models") {
  PhiloxStream rng(25, 0);
  for (int i = 0; i < 100; ++i) {
    const double sx = 0.1 + 3 * rng.uniform(), b = 4 * rng.uniform() - 2, e = 4 * rng.uniform() - 2;
    const double q = sx * (0.001 + 0.999 * rng.uniform());
    const GeneralModel g(mat(1, 1, {sx}), mat(1, 1, {b}), mat(1, 1, {e}));
    const RatePair r = rates_general(g, ConditionalCov(g.sigma_x(), mat(1, 1, {q})));
    const oracle::ScalarRates o = oracle::scalar_general(sx, b, e, q);
    CHECK(std::abs(r.rp - o.rp) < 1e-12);
    CHECK(std::abs(r.rk - o.rk) < 1e-12);
  }
}
