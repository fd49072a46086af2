#include "keyrate/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <variant>

#include "CLI11.hpp"
#include "keyrate/error.hpp"
#include "keyrate/kkt.hpp"
#include "keyrate/mc.hpp"
#include "keyrate/model_io.hpp"
#include "keyrate/solver.hpp"

namespace keyrate {
namespace {

using nlohmann::json;

struct RunConfig {
  std::string model_path;
  std::string output_path;
  std::string sidecar_path;
  std::string units = "nats";
  double rp_max = 5.0;
  int points = 50;
  int grid = 200;
  int grid_density = 60;
  double rp = 1.0;
  double tol = kCertTol;
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  double q_scale = 0.5;
  int threads = 0;
};

void check_config(const RunConfig& c) {
  if (!(c.rp_max > 0.0)) throw Error(ErrorCode::InvalidArgument, "--rp-max must be positive");
  if (c.points < 2) throw Error(ErrorCode::InvalidArgument, "--points must be at least 2");
  if (c.units != "nats" && c.units != "bits") throw Error(ErrorCode::InvalidArgument, "--units must be nats or bits");
  if (c.grid < 2) throw Error(ErrorCode::InvalidArgument, "--grid must be at least 2");
  if (c.grid_density < 1) throw Error(ErrorCode::InvalidArgument, "--grid-density must be positive");
  if (!(c.rp >= 0.0)) throw Error(ErrorCode::InvalidArgument, "--rp must be nonnegative");
  if (!(c.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "--tol must be positive");
}

double unit_scale(const RunConfig& c) { return c.units == "bits" ? kNatsToBits : 1.0; }

std::string summary(double nats) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.6f nats (%.6f bits)", nats, nats * kNatsToBits);
  return buf;
}

GeneralModel as_general(const AnyModel& m) {
  if (const auto* g = std::get_if<GeneralModel>(&m)) return *g;
  return to_general(std::get<AlignedModel>(m));
}

std::string digest_of(const AnyModel& m) {
  return std::visit([](const auto& v) { return model_digest(v); }, m);
}

bool uses_sweep(const GeneralModel& g) { return g.my() == 1 && g.mz() == 1; }

std::vector<double> rate_grid(const RunConfig& c) {
  std::vector<double> g(c.points);
  for (int i = 0; i < c.points; ++i) g[i] = c.rp_max * i / (c.points - 1);
  return g;
}

RegionBoundary boundary_of(const AnyModel& any, const std::vector<double>& rps, const RunConfig& c) {
  const GeneralModel g = as_general(any);
  if (std::holds_alternative<GeneralModel>(any) && uses_sweep(g)) {
    SweepOptions so;
    so.st_resolution = c.grid;
    so.threads = c.threads;
    return sweep_boundary(g, rps, so);
  }
  AscentOptions ao;
  ao.threads = c.threads;
  ao.certify_tol = c.tol;
  if (const auto* a = std::get_if<AlignedModel>(&any)) return ascent_boundary(*a, rps, ao);
  return ascent_boundary(g, rps, ao);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  f << text;
}

json meta_json(const PointMeta& m) {
  json j;
  j["s"] = m.s;
  j["t"] = m.t;
  j["kkt_residual"] = m.kkt_residual;
  j["converged"] = m.converged;
  j["saturated"] = m.saturated;
  j["rp_achieved"] = m.rp_achieved;
  return j;
}

int cmd_validate(const AnyModel& any, std::ostream& out) {
  if (const auto* g = std::get_if<GeneralModel>(&any)) {
    out << "valid general model: m_x=" << g->mx() << " m_y=" << g->my() << " m_z=" << g->mz() << "\n";
  } else {
    out << "valid aligned model: m=" << std::get<AlignedModel>(any).dim() << "\n";
  }
  out << "digest: " << digest_of(any) << "\n";
  return kExitOk;
}

int cmd_limit(const AnyModel& any, std::ostream& out) {
  const GeneralModel g = as_general(any);
  const GenEigResult ge = gen_eigs(g);
  out << "limit: " << summary(asymptotic_limit(g)) << "\n";
  out << "rho: " << ge.rho << "\n";
  out << "phis:";
  for (double phi : ge.phis) out << " " << format_double(phi);
  out << "\n";
  return kExitOk;
}

int cmd_region(const AnyModel& any, const RunConfig& c, std::ostream& out) {
  const std::vector<double> rps = rate_grid(c);
  const RegionBoundary rb = boundary_of(any, rps, c);
  const double scale = unit_scale(c);
  std::ostringstream csv;
  csv << "rp,rk\n";
  for (const RatePair& p : rb.points) csv << format_double(p.rp * scale) << "," << format_double(p.rk * scale) << "\n";

  json side;
  side["model_digest"] = rb.model_digest;
  side["units"] = c.units;
  side["method"] = uses_sweep(as_general(any)) && std::holds_alternative<GeneralModel>(any) ? "sweep" : "ascent";
  side["asymptotic_limit"] = asymptotic_limit(as_general(any)) * scale;
  json metas = json::array();
  for (const PointMeta& m : rb.solver_meta) metas.push_back(meta_json(m));
  side["solver_meta"] = metas;

  std::string sidecar = c.sidecar_path;
  if (c.output_path.empty()) {
    out << csv.str();
  } else {
    write_text(c.output_path, csv.str());
    if (sidecar.empty()) sidecar = c.output_path + ".json";
  }
  if (!sidecar.empty()) write_text(sidecar, side.dump(2) + "\n");
  return kExitOk;
}

// The boundary point at --rp and its certificate. Sweep points are certified
// at the rate they actually use, which is where their constraint is active.
KktCertificate certificate_at(const AnyModel& any, const RunConfig& c) {
  const RegionBoundary rb = boundary_of(any, {c.rp}, c);
  const PointMeta& meta = rb.solver_meta.front();
  if (const auto* a = std::get_if<AlignedModel>(&any)) {
    return certify(*a, ConditionalCov(a->sigma_x(), meta.sigma_star), c.rp);
  }
  const GeneralModel& g = std::get<GeneralModel>(any);
  const double rp_cert = uses_sweep(g) && c.rp > 0.0 ? meta.rp_achieved : c.rp;
  return certify(g, meta.sigma_star, rp_cert);
}

void emit_json(const json& j, const RunConfig& c, std::ostream& out) {
  if (c.output_path.empty()) {
    out << j.dump(2) << "\n";
  } else {
    write_text(c.output_path, j.dump(2) + "\n");
  }
}

int cmd_kkt(const AnyModel& any, const RunConfig& c, std::ostream& out, std::ostream& err) {
  const KktCertificate cert = certificate_at(any, c);
  json j = certificate_to_json(cert);
  j["rp_requested"] = c.rp;
  j["tolerance"] = c.tol;
  const bool ok = cert.max_residual() < c.tol;
  j["certified"] = ok;
  emit_json(j, c, out);
  if (!ok) {
    err << "certificate residual " << format_double(cert.max_residual()) << " exceeds tolerance\n";
    return kExitSolver;
  }
  return kExitOk;
}

int cmd_enhance(const AnyModel& any, const RunConfig& c, std::ostream& out) {
  const KktCertificate cert = certificate_at(any, c);
  json j;
  j["rp"] = cert.rp;
  j["mu"] = cert.mu;
  j["m_matrix"] = matrix_to_json(cert.m_matrix.matrix());
  j["wy_tilde_precision"] = matrix_to_json(cert.wy_tilde_precision);
  j["wy_tilde"] = cert.wy_tilde ? matrix_to_json(cert.wy_tilde->matrix()) : json(nullptr);
  j["order_wy"] = cert.residuals.at("order_wy");
  j["order_wz"] = cert.residuals.at("order_wz");
  j["preservation"] = cert.residuals.at("preservation");
  emit_json(j, c, out);
  return kExitOk;
}

int cmd_oracle(const AnyModel& any, const RunConfig& c, std::ostream& out) {
  const GeneralModel g = as_general(any);
  const std::vector<double> rps = rate_grid(c);
  const std::vector<RatePair> grid = brute_force_grid(g, rps, c.grid_density);
  const RegionBoundary rb = boundary_of(any, rps, c);
  const double scale = unit_scale(c);
  double worst = 0.0;
  out << "rp,solver,grid,diff\n";
  for (std::size_t i = 0; i < rps.size(); ++i) {
    const double diff = rb.points[i].rk - grid[i].rk;
    worst = std::max(worst, std::abs(diff));
    out << format_double(rps[i] * scale) << "," << format_double(rb.points[i].rk * scale) << ","
        << format_double(grid[i].rk * scale) << "," << format_double(diff * scale) << "\n";
  }
  out << "# max |diff|: " << summary(worst) << "\n";
  return kExitOk;
}

int cmd_mc(const AnyModel& any, const RunConfig& c, std::ostream& out) {
  const GeneralModel g = as_general(any);
  if (!(c.q_scale > 0.0 && c.q_scale < 1.0)) throw Error(ErrorCode::InvalidArgument, "--q-scale must be in (0, 1)");
  const ConditionalCov q(g.sigma_x(), c.q_scale * g.sigma_x().matrix());
  const RatePair exact = rates_general(g, q);
  const SampleBatch batch = sample(build_joint(g, q), c.samples, c.seed, c.threads);
  const RateEstimate est = estimate_rates(batch);
  const auto line = [&](const char* name, double analytic, const MiEstimate& e) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: analytic %.6f  estimate %.6f +- %.6f bits  (z = %.2f)\n", name,
                  analytic * kNatsToBits, e.value * kNatsToBits, e.std_error * kNatsToBits,
                  (e.value - analytic) / e.std_error);
    out << buf;
  };
  out << "samples: " << c.samples << "  seed: " << c.seed << "  q-scale: " << format_double(c.q_scale) << "\n";
  line("I(U;X) - I(U;Y)", exact.rp, est.rp);
  line("I(U;Y) - I(U;Z)", exact.rk, est.rk);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Key-rate versus communication-rate regions for vector Gaussian sources"};
  app.require_subcommand(1);
  RunConfig c;

  const auto add_model = [&](CLI::App* sub) {
    sub->add_option("model", c.model_path, "Model JSON file")->required();
    sub->add_option("--threads", c.threads, "Worker threads (default: KEYRATE_THREADS or all cores)");
  };
  const auto add_grid = [&](CLI::App* sub) {
    sub->add_option("--rp-max", c.rp_max, "Largest communication rate (nats)")->capture_default_str();
    sub->add_option("--points", c.points, "Number of rate points")->capture_default_str();
    sub->add_option("--grid", c.grid, "(s, t) sweep resolution per axis")->capture_default_str();
    sub->add_option("--units", c.units, "Units of output files: nats or bits")->capture_default_str();
  };
  const auto add_point = [&](CLI::App* sub) {
    sub->add_option("--rp", c.rp, "Communication rate of the boundary point (nats)")->capture_default_str();
    sub->add_option("--tol", c.tol, "Certificate tolerance")->capture_default_str();
    sub->add_option("--grid", c.grid, "(s, t) sweep resolution per axis")->capture_default_str();
    sub->add_option("-o,--output", c.output_path, "Write JSON here instead of stdout");
  };

  CLI::App* validate = app.add_subcommand("validate", "Parse and validate a model");
  add_model(validate);
  CLI::App* limit = app.add_subcommand("limit", "Key rate as the communication rate grows without bound");
  add_model(limit);
  CLI::App* region = app.add_subcommand("region", "Boundary of the region as CSV rp,rk plus a JSON sidecar");
  add_model(region);
  add_grid(region);
  region->add_option("-o,--output", c.output_path, "CSV path (sidecar goes to <path>.json); stdout if omitted");
  region->add_option("--sidecar", c.sidecar_path, "JSON sidecar path");
  CLI::App* kkt = app.add_subcommand("kkt-check", "Certificate JSON for the boundary point at --rp");
  add_model(kkt);
  add_point(kkt);
  CLI::App* enh = app.add_subcommand("enhance", "Enhanced noise at the boundary point at --rp");
  add_model(enh);
  add_point(enh);
  CLI::App* oracle = app.add_subcommand("oracle", "Compare the solver with the brute-force grid (m_x <= 2)");
  add_model(oracle);
  add_grid(oracle);
  oracle->add_option("--grid-density", c.grid_density, "Brute-force points per axis")->capture_default_str();
  CLI::App* mc = app.add_subcommand("mc", "Monte-Carlo check of the rates at q = q-scale * sigma_x");
  add_model(mc);
  mc->add_option("--samples", c.samples, "Number of draws")->capture_default_str();
  mc->add_option("--seed", c.seed, "Generator seed")->capture_default_str();
  mc->add_option("--q-scale", c.q_scale, "q = q-scale * sigma_x, in (0, 1)")->capture_default_str();

  std::vector<const char*> argv{"keyrate"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    check_config(c);
    const AnyModel model = load_model(c.model_path);
    if (validate->parsed()) return cmd_validate(model, out);
    if (limit->parsed()) return cmd_limit(model, out);
    if (region->parsed()) return cmd_region(model, c, out);
    if (kkt->parsed()) return cmd_kkt(model, c, out, err);
    if (enh->parsed()) return cmd_enhance(model, c, out);
    if (oracle->parsed()) return cmd_oracle(model, c, out);
    if (mc->parsed()) return cmd_mc(model, c, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? kExitValidation : kExitSolver;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitValidation;
}

}  // namespace keyrate
