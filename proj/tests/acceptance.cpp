// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#include "keyrate/kkt.hpp"
#include "keyrate/mc.hpp"
#include "keyrate/solver.hpp"
#include "test_util.hpp"

using namespace keyrate;
using namespace testutil;

namespace {

// Stated reference values, compared at the stated tolerances.
constexpr double kDegradedTarget = 0.226546;
constexpr double kCrossedTarget = 0.390829;

struct Outcome {
  bool pass;
  std::string detail;
};

struct Certified {
  int points = 0;
  int converged = 0;
  double worst = 0.0;
};

Certified g_certified;

// Sweep points are certified at the rate they achieve.
void certify_sweep(const GeneralModel& g, const RegionBoundary& rb) {
  for (const PointMeta& m : rb.solver_meta) {
    ++g_certified.points;
    if (!m.converged) continue;
    ++g_certified.converged;
    g_certified.worst = std::max(g_certified.worst, certify(g, m.sigma_star, m.rp_achieved).max_residual());
  }
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool nondecreasing(const RegionBoundary& rb) {
  for (std::size_t i = 1; i < rb.points.size(); ++i) {
    if (rb.points[i].rk < rb.points[i - 1].rk) return false;
  }
  return true;
}

// Largest increase of the chord slope along the boundary.
double concavity_violation(const RegionBoundary& rb) {
  double worst = 0.0;
  for (std::size_t i = 2; i < rb.points.size(); ++i) {
    const RatePair &a = rb.points[i - 2], &b = rb.points[i - 1], &c = rb.points[i];
    const double s1 = (b.rk - a.rk) / (b.rp - a.rp), s2 = (c.rk - b.rk) / (c.rp - b.rp);
    worst = std::max(worst, s2 - s1);
  }
  return worst;
}

std::vector<double> boundary_rates() {
  std::vector<double> rps;
  for (int i = 0; i <= 24; ++i) rps.push_back(0.25 * i);
  for (double r : {7.0, 9.0, 12.0, 16.0, 20.0}) rps.push_back(r);
  return rps;
}

Outcome degraded_curve(double& seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  const GeneralModel g = degraded();
  const RegionBoundary rb = sweep_boundary(g, boundary_rates(), 200);
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  certify_sweep(g, rb);
  const double end = rb.points.back().rk;
  const double cv = concavity_violation(rb);
  const bool ok = nondecreasing(rb) && cv < 1e-6 && std::abs(end - kDegradedTarget) < 1e-3 && seconds < 60;
  return {ok, fmt("R_k(20) = %.6f (target 0.226546 +- 1e-3), concavity slack %.1e, %.1f s (< 60 s)", end, cv,
                  seconds)};
}

Outcome crossed_curve() {
  const GeneralModel g = crossed();
  const RegionBoundary rb = sweep_boundary(g, boundary_rates(), 200);
  certify_sweep(g, rb);
  const double gap = mutual_information_gap(g);
  double at_one = 0.0;
  for (std::size_t i = 0; i < rb.points.size(); ++i) {
    if (rb.points[i].rp == 1.0) at_one = rb.points[i].rk;
  }
  const double end = rb.points.back().rk;
  const bool ok = gap == 0.0 && at_one > 0.05 && std::abs(end - kCrossedTarget) < 1e-3 && nondecreasing(rb);
  return {ok, fmt("I(X;Y) - I(X;Z) = %g, R_k(1) = %.6f (> 0.05), R_k(20) = %.6f (target 0.390829 +- 1e-3)", gap,
                  at_one, end)};
}

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> rps{0.1, 0.2, 0.4, 0.7, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0};
  PhiloxStream rng(2024, 0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const GeneralModel g = random_general(rng, 2, 1, 1);
    const RegionBoundary rb = sweep_boundary(g, rps, 100);
    certify_sweep(g, rb);
    const std::vector<RatePair> grid = brute_force_grid(g, rps, 60);
    for (std::size_t k = 0; k < rps.size(); ++k) worst = std::max(worst, std::abs(rb.points[k].rk - grid[k].rk));
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst < 1e-2 && seconds < 300,
          fmt("max |sweep - grid| = %.4f nats over 200 points (< 1e-2), %.1f s (< 300 s)", worst, seconds)};
}

Outcome certification() {
  const bool ok = g_certified.points > 0 && g_certified.worst < 1e-6;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d of %d points converged, worst max residual %.2e (< 1e-6)",
                g_certified.converged, g_certified.points, g_certified.worst);
  return {ok, buf};
}

Outcome enhancement_edges() {
  PhiloxStream rng(77, 0);
  double worst_mu0 = 0.0, worst_m0 = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int n = 1 + i % 3;
    const Matrix wz = spd(rng, n, 0.2, 0.8);
    const AlignedModel m(spd(rng, n), wz + spd(rng, n, 0.1, 1.0), wz);  // S_wz <= S_wy
    const ConditionalCov s(m.sigma_x(), random_conditional(rng, m.sigma_x().matrix()));
    const Matrix ty = spd_inverse(symmetrize(s.matrix() + m.sigma_wy().matrix()));
    const Matrix tz = spd_inverse(symmetrize(s.matrix() + m.sigma_wz().matrix()));
    // mu = 0: stationarity fixes M = T_z - T_y.
    worst_mu0 = std::max(worst_mu0, (enhance(m, s, 0.0, symmetrize(tz - ty)).matrix() - wz).norm());
    worst_m0 = std::max(worst_m0,
                        (enhance(m, s, 2.0 * rng.uniform(), Matrix::Zero(n, n)).matrix() - m.sigma_wy().matrix()).norm());
  }
  return {worst_mu0 < 1e-10 && worst_m0 < 1e-10,
          fmt("mu = 0: |W~ - S_wz| = %.1e, M = 0: |W~ - S_wy| = %.1e (both < 1e-10)", worst_mu0, worst_m0)};
}

// One draw of the criterion: 10 random (model, q) pairs at n = 1e5. Returns
// how many pairs have both estimates within 3 standard errors.
int monte_carlo_draw(std::uint64_t seed) {
  PhiloxStream rng(seed, 0);
  int agree = 0;
  for (int i = 0; i < 10; ++i) {
    const GeneralModel g = random_general(rng, 2, 1 + i % 2, 1 + (i / 2) % 2);
    const ConditionalCov q(g.sigma_x(), random_conditional(rng, g.sigma_x().matrix(), 0.2, 0.9));
    const RatePair exact = rates_general(g, q);
    const RateEstimate est = estimate_rates(sample(build_joint(g, q), 100000, seed + i + 100 * seed));
    agree += std::abs(est.rp.value - exact.rp) < 3 * est.rp.std_error &&
             std::abs(est.rk.value - exact.rk) < 3 * est.rk.std_error;
  }
  return agree;
}

// The verdict comes from the draw with the default CLI seed. With 10-fold
// standard errors a draw meets the bar only with high probability, so the
// pass rate over further independent draws is reported alongside.
Outcome monte_carlo() {
  const auto t0 = std::chrono::steady_clock::now();
  const int agree = monte_carlo_draw(1);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  int draws_ok = 0;
  const int draws = 50;
  for (int d = 0; d < draws; ++d) draws_ok += monte_carlo_draw(1000 + d) >= 9;
  return {agree >= 9 && seconds < 120,
          fmt("%.0f of 10 cases within 3 standard errors (>= 9), %.1f s (< 120 s); ", agree, seconds) +
              fmt("%.0f of %.0f further draws also meet the bar", draws_ok, draws)};
}

Outcome eigen_identities() {
  PhiloxStream rng(7, 1);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const GeneralModel g = random_general(rng, 1 + i % 4, 1 + i % 3, 1 + (i / 3) % 3);
    const Matrix r = sqrtm_psd(g.sigma_x());
    const int n = g.mx();
    const Matrix a = r * g.b().transpose() * g.b() * r + Matrix::Identity(n, n);
    const Matrix c = r * g.e().transpose() * g.e() * r + Matrix::Identity(n, n);
    double prod = 1.0;
    for (double phi : gen_eigs(g).phis) prod *= phi;
    const double ratio = a.determinant() / c.determinant();
    worst = std::max(worst, std::abs(prod - ratio) / ratio);
  }
  const Matrix b = uniform(rng, 2, 3, -1, 1);
  const double same = asymptotic_limit(GeneralModel(spd(rng, 3), b, b));
  return {worst < 1e-10 && same == 0.0,
          fmt("max relative |prod phi - |A|/|C|| = %.1e (< 1e-10), limit at B = E is %g", worst, same)};
}

Outcome vanishing_gap() {
  const GeneralModel g = degraded();  // e is 1 x 2, rank deficient after padding
  double prev = perturb_svd(g, 1e-1).gap;
  bool decreasing = true;
  double last = prev;
  for (double a : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
    last = perturb_svd(g, a).gap;
    decreasing = decreasing && last < prev;
    prev = last;
  }
  return {decreasing && last < 1e-4, std::string("strictly decreasing: ") + (decreasing ? "yes" : "no") +
                                         fmt(", gap at 1e-6 = %.2e nats (< 1e-4)", last)};
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  double degraded_seconds = 0.0;
  report(1, "degraded boundary", degraded_curve(degraded_seconds));
  report(2, "crossed boundary", crossed_curve());
  report(3, "oracle equivalence", oracle_equivalence());
  report(4, "KKT certification", certification());
  report(5, "enhancement edge cases", enhancement_edges());
  report(6, "Monte-Carlo cross-validation", monte_carlo());
  report(7, "generalized-eigenvalue identities", eigen_identities());
  report(8, "vanishing perturbation gap", vanishing_gap());
  return failures == 0 ? 0 : 1;
}
