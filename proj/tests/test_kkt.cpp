#include <cmath>

#include "doctest.h"
#include "keyrate/error.hpp"
#include "keyrate/kkt.hpp"
#include "keyrate/model_io.hpp"
#include "keyrate/solver.hpp"
#include "oracles.hpp"
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

struct Optimum {
  AlignedModel model;
  KktCertificate cert;
};

// Certified ascent optima of a few aligned models at a few budgets.
std::vector<Optimum> aligned_optima() {
  std::vector<AlignedModel> models{std::get<AlignedModel>(load_model(data_path("aligned.json"))),
                                   to_aligned(GeneralModel(2.0 * Matrix::Identity(2, 2), mat(2, 2, {1, 0.5, 0, 0.8}),
                                                           mat(2, 2, {0.7, 0.35, 0.1, 0.3})))};
  PhiloxStream rng(41, 0);
  const Matrix wy = spd(rng, 2, 0.2, 0.8);
  models.emplace_back(spd(rng, 2), wy, wy + spd(rng, 2, 0.2, 1.0));
  std::vector<Optimum> out;
  const std::vector<double> rps{0.3, 1.0, 2.5};
  for (const AlignedModel& m : models) {
    const RegionBoundary rb = ascent_boundary(m, rps);
    for (std::size_t k = 0; k < rps.size(); ++k) {
      REQUIRE(rb.solver_meta[k].converged);
      out.push_back({m, certify(m, ConditionalCov(m.sigma_x(), rb.solver_meta[k].sigma_star), rps[k])});
    }
  }
  return out;
}

double g_value(const AlignedModel& m, const Matrix& wt, double mu, const Matrix& s) {
  return mu * log_det(s) + log_det(symmetrize(s + m.sigma_wz().matrix())) - (1 + mu) * log_det(symmetrize(s + wt));
}

}  // namespace

TEST_CASE("kkt: certified aligned optima satisfy every identity") {
  PhiloxStream rng(42, 0);
  for (const Optimum& o : aligned_optima()) {
    const KktCertificate& c = o.cert;
    CHECK(c.max_residual() < kCertTol);
    REQUIRE(c.wy_tilde.has_value());
    const Matrix& wt = c.wy_tilde->matrix();
    CHECK(min_eigenvalue(symmetrize(o.model.sigma_wy().matrix() - wt)) >= -1e-8);
    CHECK(min_eigenvalue(symmetrize(o.model.sigma_wz().matrix() - wt)) >= -1e-8);
    CHECK(c.residuals.at("preservation") < 1e-8);
    const RatePair base = rates_aligned(o.model, c.sigma_star);
    const RatePair enh = rates_enhanced(o.model, *c.wy_tilde, c.sigma_star);
    CHECK(std::abs(base.rk - enh.rk) < 1e-8);
    CHECK(std::abs(base.rp - enh.rp) < 1e-8);

    if (c.mu > 1e-6) {
      CHECK(min_eigenvalue(symmetrize(o.model.sigma_wz().matrix() - wt)) > 1e-10);
      const ChangeOfVariable cv = change_of_variable(o.model, *c.wy_tilde, c.sigma_star, c.mu);
      CHECK(cv.route_gap < 1e-8);
      CHECK(c.residuals.at("proportionality") < 1e-6);
      // N3 = (gamma - 1) S*_{x|uz}
      CHECK(relative_residual(cv.sigma_n3.matrix(), (cv.gamma - 1) * cv.sigma_xuz.matrix()) < 1e-6);
      Eigen::JacobiSVD<Matrix> svd(cv.k_yx);
      CHECK(svd.singularValues().minCoeff() > 1e-10);
    }

    // Gaussian extremal check: S* maximizes g over the feasible interval.
    const double g_star = g_value(o.model, wt, c.mu, c.sigma_star.matrix());
    for (int i = 0; i < 500; ++i) {
      const Matrix s = random_conditional(rng, o.model.sigma_x().matrix(), 1e-3, 1.0);
      CHECK(g_value(o.model, wt, c.mu, s) <= g_star + 1e-8);
    }
  }
}

TEST_CASE("kkt: perturbed multiplier is detected") {
  const Optimum o = aligned_optima()[1];
  REQUIRE(o.cert.mu > 1e-3);
  KktCertificate broken = o.cert;
  broken.mu *= 1.1;
  CHECK(verify_certificate(o.model, broken).at("stationarity") > 1e-3);
}

TEST_CASE("kkt: non-optimal points have no valid multiplier") {
  const AlignedModel m = std::get<AlignedModel>(load_model(data_path("aligned.json")));
  const ConditionalCov half(m.sigma_x(), 0.5 * m.sigma_x().matrix());
  const double rp = rates_aligned(m, half).rp + 0.3;
  CHECK(code_of([&] { recover_multipliers(m, half, rp); }) == ErrorCode::NoValidMultiplier);
  CHECK(code_of([&] { recover_multipliers(to_general(m), half.matrix(), rp); }) == ErrorCode::NoValidMultiplier);
  CHECK(certify(m, half, rp).max_residual() > 1e-3);
}

TEST_CASE("kkt: enhancement edge cases") {
  PhiloxStream rng(43, 0);
  const AlignedModel m(spd(rng, 2), spd(rng, 2, 0.2, 0.6), spd(rng, 2, 1.0, 2.0));
  const ConditionalCov s(m.sigma_x(), random_conditional(rng, m.sigma_x().matrix()));
  // M = 0: no enhancement.
  for (double mu : {0.0, 0.5, 3.0}) {
    CHECK((enhance(m, s, mu, Matrix::Zero(2, 2)).matrix() - m.sigma_wy().matrix()).norm() < 1e-10);
  }
  // General form with M = 0 returns the original precision B^T B.
  const GeneralModel g = to_general(m);
  const Matrix p0 = enhance_precision(g, s.matrix(), 0.7, Matrix::Zero(2, 2));
  CHECK((p0 - g.b().transpose() * g.b()).norm() < 1e-10);

  // mu = 0 with the stationary M = T_z - T_y, which is PSD when S_wz <= S_wy.
  const AlignedModel eve(m.sigma_x().matrix(), m.sigma_wz().matrix(), m.sigma_wy().matrix());
  const Matrix ty = spd_inverse(symmetrize(s.matrix() + eve.sigma_wy().matrix()));
  const Matrix tz = spd_inverse(symmetrize(s.matrix() + eve.sigma_wz().matrix()));
  CHECK((enhance(eve, s, 0.0, symmetrize(tz - ty)).matrix() - eve.sigma_wz().matrix()).norm() < 1e-10);

  CHECK(code_of([&] { enhance(m, s, -1.0, Matrix::Zero(2, 2)); }) == ErrorCode::NonPsdInput);
  CHECK(code_of([&] { enhance(m, s, 1.0, -Matrix::Identity(2, 2)); }) == ErrorCode::NonPsdInput);
}

TEST_CASE("kkt: scalar corner multiplier at S* = S_x") {
  // M = 0 needs mu / sx + 1 / (sx + wz) = (1 + mu) / (sx + wy).
  const double sx = 1.5, wy = 0.5, wz = 2.0;
  const double mu = (1 / (sx + wy) - 1 / (sx + wz)) / (1 / sx - 1 / (sx + wy));
  CHECK(mu > 0);
  const AlignedModel m(mat(1, 1, {sx}), mat(1, 1, {wy}), mat(1, 1, {wz}));
  const ConditionalCov corner(m.sigma_x(), m.sigma_x().matrix());
  KktCertificate c{corner, 0.0, mu, SymMatrix(Matrix::Zero(1, 1)), mat(1, 1, {1 / wy}), SymMatrix(mat(1, 1, {wy})), {}};
  const auto r = verify_certificate(m, c);
  CHECK(r.at("stationarity") < 1e-14);
  CHECK(r.at("enhancement_def") < 1e-14);
  CHECK(r.at("compl_slack_M") < 1e-14);
  CHECK(r.at("compl_slack_mu") < 1e-14);
  const Multipliers rec = recover_multipliers(m, corner, 0.0);
  CHECK(rec.residual < kCertTol);
}

TEST_CASE("kkt: equal noises give mu = 0 and a trivial enhancement") {
  PhiloxStream rng(44, 0);
  const Matrix w = spd(rng, 2);
  const AlignedModel m(spd(rng, 2), w, w);
  const KktCertificate c = certify(m, ConditionalCov(m.sigma_x(), m.sigma_x().matrix()), 1.0);
  CHECK(c.mu == 0.0);
  CHECK(c.max_residual() < kCertTol);
  REQUIRE(c.wy_tilde.has_value());
  CHECK((c.wy_tilde->matrix() - m.sigma_wz().matrix()).norm() < 1e-10);
  CHECK(std::abs(rates_enhanced(m, *c.wy_tilde, c.sigma_star).rk) < 1e-12);
  CHECK(code_of([&] { change_of_variable(m, *c.wy_tilde, c.sigma_star, 0.0); }) == ErrorCode::MuZero);
}

TEST_CASE("kkt: scalar change of variable matches the regression formula") {
  PhiloxStream rng(45, 0);
  for (int i = 0; i < 20; ++i) {
    const double sx = 0.5 + 2 * rng.uniform(), wz = 0.5 + 2 * rng.uniform(), wt = wz * (0.05 + 0.9 * rng.uniform());
    const AlignedModel m(mat(1, 1, {sx}), mat(1, 1, {wt + 0.1}), mat(1, 1, {wz}));
    const ConditionalCov s(m.sigma_x(), mat(1, 1, {0.5 * sx}));
    const ChangeOfVariable cv = change_of_variable(m, SymMatrix(mat(1, 1, {wt})), s, 0.8);
    CHECK(cv.k_yx(0, 0) == doctest::Approx(oracle::scalar_k_yx(sx, wt, wz)).epsilon(1e-12));
    CHECK(std::abs(cv.k_yx(0, 0)) > 1e-10);
    CHECK(cv.gamma == doctest::Approx(1.8 / 0.8));
    CHECK(cv.route_gap < 1e-12);
  }
  const AlignedModel m(mat(1, 1, {1}), mat(1, 1, {1}), mat(1, 1, {1}));
  CHECK(code_of([&] {
          change_of_variable(m, SymMatrix(mat(1, 1, {1})), ConditionalCov(m.sigma_x(), mat(1, 1, {0.5})), 1.0);
        }) == ErrorCode::NotDegraded);
}

TEST_CASE("kkt: general and aligned change of variable agree") {
  PhiloxStream rng(46, 0);
  const AlignedModel a(spd(rng, 2), spd(rng, 2, 0.2, 0.5), spd(rng, 2, 1.0, 2.0));
  const GeneralModel g = to_general(a);
  const ConditionalCov s(a.sigma_x(), random_conditional(rng, a.sigma_x().matrix()));
  const SymMatrix wt(0.5 * a.sigma_wy().matrix());
  const ChangeOfVariable ca = change_of_variable(a, wt, s, 1.3);
  const ChangeOfVariable cg = change_of_variable(g, spd_inverse(wt.matrix()), s.matrix(), 1.3);
  CHECK(ca.route_gap < 1e-10);
  CHECK(cg.route_gap < 1e-10);
  CHECK(relative_residual(ca.k_yx, cg.k_yx) < 1e-10);
  CHECK(relative_residual(ca.sigma_n3.matrix(), cg.sigma_n3.matrix()) < 1e-10);
  CHECK(relative_residual(ca.sigma_xuz.matrix(), cg.sigma_xuz.matrix()) < 1e-10);
  CHECK(relative_residual(ca.sigma_xz.matrix(), cg.sigma_xz.matrix()) < 1e-10);
}

TEST_CASE("kkt: general-model certificates from the sweep") {
  const GeneralModel g = crossed();
  SweepOptions so;
  so.st_resolution = 60;
  const RegionBoundary rb = sweep_boundary(g, {0.5, 2.0}, so);
  for (const PointMeta& m : rb.solver_meta) {
    const KktCertificate c = certify(g, m.sigma_star, m.rp_achieved);
    CHECK(c.max_residual() < kCertTol);
    CHECK(c.mu > 0.0);
    const nlohmann::json j = certificate_to_json(c);
    CHECK(j["residuals"].size() == 10);
    for (const char* key : kResidualKeys) CHECK(j["residuals"][key].is_number());
    CHECK(j["max_residual"].get<double>() == c.max_residual());
  }
  KktCertificate bad = certify(g, rb.solver_meta[0].sigma_star, rb.solver_meta[0].rp_achieved);
  bad.residuals["rate_match"] = std::numeric_limits<double>::infinity();
  CHECK(certificate_to_json(bad)["residuals"]["rate_match"].is_null());
  CHECK(certificate_to_json(bad)["max_residual"].is_null());
}
