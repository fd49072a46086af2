#include <cmath>

#include "doctest.h"
#include "keyrate/error.hpp"
#include "keyrate/mc.hpp"
#include "keyrate/philox.hpp"
#include "keyrate/rates.hpp"
#include "test_util.hpp"

using namespace keyrate;
using namespace testutil;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::SolverFailure;
}

// Conditional covariance of X given U read back from the assembled joint.
Matrix recovered_q(const JointGaussian& j) {
  const Matrix& c = j.cov.matrix();
  const int ou = j.mx + j.my + j.mz;
  const Matrix sxx = c.topLeftCorner(j.mx, j.mx);
  const Matrix sxu = c.block(0, ou, j.mx, j.mu);
  const Matrix suu = c.block(ou, ou, j.mu, j.mu);
  return sxx - sxu * suu.inverse() * sxu.transpose();
}

}  // namespace

TEST_CASE("philox: known-answer vectors") {
  using W = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == W{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        W{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        W{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("philox: streams are reproducible and distinct") {
  PhiloxStream a(5, 0), b(5, 0), c(5, 1), d(6, 0);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const std::uint32_t x = a.next_u32();
    CHECK(x == b.next_u32());
    differs_stream |= x != c.next_u32();
    differs_seed |= x != d.next_u32();
  }
  CHECK(differs_stream);
  CHECK(differs_seed);

  PhiloxStream u(9, 3);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = u.uniform();
    CHECK_FALSE((v <= 0.0 || v >= 1.0));
    sum += v;
  }
  CHECK(std::abs(sum / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
  sum = 0;
  for (int i = 0; i < n; ++i) {
    const double v = u.normal();
    sum += v;
    sq += v * v;
  }
  CHECK(std::abs(sum / n) < 5 / std::sqrt(n));
  CHECK(std::abs(sq / n - 1) < 5 * std::sqrt(2.0 / n));
}

TEST_CASE("mc: joint construction") {
  const GeneralModel g = degraded();
  const JointGaussian j = build_joint(g, ConditionalCov(g.sigma_x(), g.sigma_x().matrix() / 2));
  CHECK(j.cov.dim() == 6);
  // S_V = (q^{-1} - S_x^{-1})^{-1} = (1 - 1/2)^{-1} = 2 per coordinate, so cov(U) = 4I.
  CHECK((j.cov.matrix().block(4, 4, 2, 2) - 4.0 * Matrix::Identity(2, 2)).norm() < 1e-12);
  CHECK(code_of([&] { build_joint(g, ConditionalCov(g.sigma_x(), 0.999999 * g.sigma_x().matrix())); }) ==
        ErrorCode::DegenerateConditional);

  PhiloxStream rng(51, 0);
  for (int i = 0; i < 100; ++i) {
    const GeneralModel m = random_general(rng, 1 + i % 3, 1 + i % 2, 1 + (i / 2) % 3);
    const Matrix q = random_conditional(rng, m.sigma_x().matrix(), 0.05, 0.95);
    const JointGaussian jg = build_joint(m, ConditionalCov(m.sigma_x(), q));
    CHECK((recovered_q(jg) - q).norm() < 1e-10 * (1 + q.norm()));
    // the exact-covariance route reproduces the rate functionals
    const RatePair exact = plug_in_rates(jg.cov, jg.mx, jg.my, jg.mz, jg.mu);
    const RatePair ref = rates_general(m, ConditionalCov(m.sigma_x(), q));
    CHECK(std::abs(exact.rp - ref.rp) < 1e-9);
    CHECK(std::abs(exact.rk - ref.rk) < 1e-9);
  }
}

TEST_CASE("mc: sampling contract") {
  const GeneralModel g = degraded();
  const JointGaussian j = build_joint(g, ConditionalCov(g.sigma_x(), g.sigma_x().matrix() / 2));
  CHECK(code_of([&] { sample(j, 1, 1); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { sample(j, 19, 1); }) == ErrorCode::InvalidArgument);
  JointGaussian bad = j;
  bad.cov = SymMatrix(-j.cov.matrix());
  CHECK(code_of([&] { sample(bad, 100, 1); }) == ErrorCode::NotPsd);

  const std::size_t n = 100000;
  const SampleBatch a = sample(j, n, 7, 1);
  const SampleBatch b = sample(j, n, 7, 2);
  CHECK(a.joint_cov_empirical.matrix() == b.joint_cov_empirical.matrix());
  CHECK(a.fold_covs.size() == static_cast<std::size_t>(kMcFolds));
  const double bound = 5 * j.cov.matrix().norm() / std::sqrt(static_cast<double>(n));
  CHECK((a.joint_cov_empirical.matrix() - j.cov.matrix()).cwiseAbs().maxCoeff() < bound);
  CHECK(sample(j, n, 8).joint_cov_empirical.matrix() != a.joint_cov_empirical.matrix());
}

TEST_CASE("mc: estimates agree with the analytic rates") {
  const GeneralModel g = degraded();
  const ConditionalCov q(g.sigma_x(), g.sigma_x().matrix() / 2);
  const RatePair exact = rates_general(g, q);
  const RateEstimate est = estimate_rates(sample(build_joint(g, q), 100000, 3));
  CHECK(std::abs(est.rp.value - exact.rp) < 3 * est.rp.std_error);
  CHECK(std::abs(est.rk.value - exact.rk) < 3 * est.rk.std_error);
  CHECK(est.rp.std_error > 0);

  // near independence
  const ConditionalCov near(g.sigma_x(), 0.999 * g.sigma_x().matrix());
  const RateEstimate ind = estimate_rates(sample(build_joint(g, near), 100000, 4));
  CHECK(std::abs(ind.rp.value) < 1e-3);
  CHECK(std::abs(ind.rk.value) < 1e-3);

  // B = E: no key
  const GeneralModel same(2.0 * Matrix::Identity(2, 2), mat(1, 2, {1, 0.5}), mat(1, 2, {1, 0.5}));
  const RateEstimate sym = estimate_rates(sample(build_joint(same, q), 100000, 5));
  CHECK(std::abs(sym.rk.value) < 3 * sym.rk.std_error + 1e-12);
}

TEST_CASE("mc: communication-rate estimates stay above -3 standard errors") {
  PhiloxStream rng(52, 0);
  for (int i = 0; i < 20; ++i) {
    const GeneralModel m = random_general(rng, 2, 1, 1);
    const ConditionalCov q(m.sigma_x(), random_conditional(rng, m.sigma_x().matrix(), 0.3, 0.99));
    const RateEstimate est = estimate_rates(sample(build_joint(m, q), 20000, 100 + i));
    CHECK(est.rp.value >= -3 * est.rp.std_error);
  }
}

TEST_CASE("mc: plug-in error shrinks with the sample size" * doctest::timeout(300)) {
  const GeneralModel g = degraded();
  const ConditionalCov q(g.sigma_x(), g.sigma_x().matrix() / 2);
  const JointGaussian j = build_joint(g, q);
  const RatePair exact = rates_general(g, q);
  const auto error = [&](std::size_t n, std::uint64_t seed) {
    const RateEstimate e = estimate_rates(sample(j, n, seed));
    return std::hypot(e.rp.value - exact.rp, e.rk.value - exact.rk);
  };
  int better = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) better += error(1000000, seed) < error(10000, seed + 1000);
  CHECK(better >= 95);
}
