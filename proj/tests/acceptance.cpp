// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with
// the measured quantities; the process exits nonzero if any criterion fails.
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "adm/control.hpp"
#include "adm/experiment.hpp"
#include "adm/micro.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

std::string fmt_fixed(double v, int prec = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

void report(int index, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", index, name,
              detail.c_str());
  if (!ok) ++failures;
}

void run(int index, const char* name, const std::function<void(int, const char*)>& body) {
  try {
    body(index, name);
  } catch (const std::exception& e) {
    report(index, name, false, std::string("exception: ") + e.what());
  }
}

const adm::ModelParams kRunning{100, 0.3, 50.0, 0.5};

double slope_loglog(const std::vector<double>& ts, const std::vector<double>& es) {
  double mt = 0.0, me = 0.0;
  const std::size_t n = ts.size();
  std::vector<double> lt(n), le(n);
  for (std::size_t i = 0; i < n; ++i) {
    lt[i] = std::log(ts[i]);
    le[i] = std::log(es[i]);
    mt += lt[i];
    me += le[i];
  }
  mt /= static_cast<double>(n);
  me /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (lt[i] - mt) * (le[i] - me);
    den += (lt[i] - mt) * (lt[i] - mt);
  }
  return num / den;
}

void criterion_closed_form_vs_oracle(int index, const char* name) {
  const auto start = Clock::now();
  double max_err = 0.0;
  for (double lambda : {1.0, 10.0, 50.0, 80.0}) {
    const adm::PoissonTable table = adm::build_poisson_table(lambda, 100);
    for (int i = 0; i < 1000; ++i) {
      const double a = 1.0 + 99.0 * i / 999.0;
      max_err = std::max(max_err,
                         std::fabs(adm::eval_g(a, table) - adm::g_oracle(a, lambda)));
    }
  }
  const double elapsed = seconds_since(start);
  report(index, name, max_err <= 1e-11 && elapsed < 1.0,
         "max err " + fmt(max_err) + ", " + fmt_fixed(elapsed, 2) + " s");
}

void criterion_ensemble_vs_recursion(int index, const char* name) {
  const auto start = Clock::now();
  const fs::path dir =
      fs::temp_directory_path() / ("adm_acceptance_" + std::to_string(getpid()));
  adm::ExperimentConfig cfg = adm::parse_config_text(
      "experiment = micro-validate\n"
      "k_agents = 100\n"
      "lambda = 80\n"
      "u = 0.9\n"
      "horizon = 200\n"
      "runs = 100\n"
      "seed = 20240817\n"
      "init = uniform\n"
      "alpha_min = 1\nalpha_max = 50\n"
      "beta_min = 1\nbeta_max = 50\n"
      "p_min = 0\np_max = 1\n");
  cfg.output_path = dir.string();
  adm::run_experiment(cfg);
  std::ifstream in(dir / "summary.json");
  const nlohmann::json summary = nlohmann::json::parse(in);
  const double gap_direct = summary.at("max_gap_direct").get<double>();
  const double gap_pooled = summary.at("max_gap_pooled").get<double>();
  fs::remove_all(dir);
  const double elapsed = seconds_since(start);
  report(index, name, gap_direct <= 0.02 && gap_pooled <= 0.02 && elapsed < 60.0,
         "max gap direct " + fmt(gap_direct) + ", pooled " + fmt(gap_pooled) + ", " +
             fmt_fixed(elapsed, 1) + " s");
}

void criterion_unique_fixed_point(int index, const char* name) {
  adm::RngStream rng(112358);
  double max_diff = 0.0;
  int bad_counts = 0;
  for (int rep = 0; rep < 50; ++rep) {
    adm::ModelParams params;
    params.k_agents = 2 + static_cast<int>(rng.next_index(199));
    params.p_base = rng.next_double();
    params.lambda = 0.5 + 99.5 * rng.next_double();
    params.u = params.p_base + (1.0 - params.p_base) * rng.next_double();
    const adm::PoissonTable table =
        adm::build_poisson_table(params.lambda, params.k_agents);
    const adm::FixedPointScan scan =
        adm::scan_fixed_points(params.u, params, table, 1000);
    if (scan.roots.size() != 1) {
      ++bad_counts;
      continue;
    }
    const double x_star = adm::solve_x_star(params.u, params, table).x_star;
    max_diff = std::max(max_diff, std::fabs(scan.roots[0] - x_star));
  }
  report(index, name, bad_counts == 0 && max_diff <= 1e-8,
         "50 instances, multi-root cases " + std::to_string(bad_counts) +
             ", max |scan - solve| " + fmt(max_diff));
}

void criterion_multiplicity_regime(int index, const char* name) {
  adm::ModelParams params{50, 0.9, 10.0, 0.05};
  const adm::PoissonTable table = adm::build_poisson_table(10.0, 50);
  const adm::UniquenessCertificate weak = adm::uniqueness_certificate(0.05, params, table);
  const adm::FixedPointScan weak_scan = adm::scan_fixed_points(0.05, params, table, 10000);
  const adm::UniquenessCertificate strong = adm::uniqueness_certificate(0.6, params, table);
  const adm::FixedPointScan strong_scan = adm::scan_fixed_points(0.6, params, table, 10000);
  const bool ok = weak.regime == adm::UniquenessRegime::inconclusive &&
                  weak.lipschitz_constant >= 1.0 && weak_scan.roots.size() >= 2 &&
                  strong.regime == adm::UniquenessRegime::contraction &&
                  strong_scan.roots.size() == 1;
  report(index, name, ok,
         "weak control: " + std::string(to_string(weak.regime)) + ", L " +
             fmt_fixed(weak.lipschitz_constant) + ", roots " +
             std::to_string(weak_scan.roots.size()) + "; strong control: " +
             std::string(to_string(strong.regime)) + ", L " +
             fmt_fixed(strong.lipschitz_constant) + ", roots " +
             std::to_string(strong_scan.roots.size()));
}

void criterion_global_convergence(int index, const char* name) {
  const adm::PoissonTable table = adm::build_poisson_table(50.0, 100);
  double max_err = 0.0;
  bool nonincreasing = true;
  double prev = 2.0;
  std::string terminals;
  for (double u : {0.3, 0.5, 0.7, 0.9}) {
    adm::ModelParams params = kRunning;
    params.u = u;
    const adm::MfTrajectory traj = adm::mf_trajectory(params, 0.25, 4.0, 10000, table);
    const double x_end = traj.states.back().x_bar;
    const double x_star = adm::solve_x_star(u, params, table).x_star;
    max_err = std::max(max_err, std::fabs(x_end - x_star));
    if (x_end > prev) nonincreasing = false;
    prev = x_end;
    terminals += (terminals.empty() ? "" : ", ") + fmt_fixed(x_end, 4);
  }
  report(index, name, max_err <= 1e-3 && nonincreasing,
         "max terminal err " + fmt(max_err) + ", terminals " + terminals +
             (nonincreasing ? " nonincreasing" : " NOT nonincreasing"));
}

void criterion_error_decay_slope(int index, const char* name) {
  const adm::PoissonTable table = adm::build_poisson_table(50.0, 100);
  bool ok = true;
  std::string detail = "slopes";
  for (double u : {0.5, 0.7, 0.9}) {
    adm::ModelParams params = kRunning;
    params.u = u;
    const adm::MfTrajectory traj = adm::mf_trajectory(params, 0.25, 4.0, 10000, table);
    const double x_star = adm::solve_x_star(u, params, table).x_star;
    std::vector<double> ts, es;
    for (std::int64_t t = 100; t <= 10000; ++t) {
      const double err = std::fabs(traj.states[static_cast<std::size_t>(t)].x_bar - x_star);
      if (err > 0.0) {
        ts.push_back(static_cast<double>(t));
        es.push_back(err);
      }
    }
    const double slope = slope_loglog(ts, es);
    ok = ok && slope >= -1.4 && slope <= -0.6;
    detail += " " + fmt_fixed(slope) + " (u=" + fmt_fixed(u, 1) + ")";
  }
  report(index, name, ok, detail + ", band [-1.4, -0.6]");
}

void criterion_frontier_vs_transient(int index, const char* name) {
  const adm::PoissonTable table = adm::build_poisson_table(50.0, 100);
  std::vector<double> us;
  for (int i = 0; i <= 14; ++i) us.push_back(0.3 + 0.05 * i);
  const std::vector<adm::SteadyStateMetrics> rows = adm::frontier(kRunning, us, table);
  bool nonincreasing = true;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].x_inf > rows[i - 1].x_inf) nonincreasing = false;
  double max_gap_x = 0.0, max_gap_thr = 0.0;
  for (std::size_t i = 0; i < us.size(); ++i) {
    adm::ModelParams params = kRunning;
    params.u = us[i];
    const adm::MfTrajectory traj = adm::mf_trajectory(params, 0.25, 4.0, 1000, table);
    double sx = 0.0, sthr = 0.0;
    for (std::int64_t t = 801; t <= 1000; ++t) {
      sx += traj.states[static_cast<std::size_t>(t)].x_bar;
      sthr += traj.diag[static_cast<std::size_t>(t)].throughput();
    }
    max_gap_x = std::max(max_gap_x, std::fabs(sx / 200.0 - rows[i].x_inf));
    max_gap_thr = std::max(max_gap_thr, std::fabs(sthr / 200.0 - rows[i].throughput));
  }
  const bool ok = nonincreasing && max_gap_x <= 5e-3 && max_gap_thr <= 5e-3;
  report(index, name, ok,
         std::string(nonincreasing ? "x_inf nonincreasing" : "x_inf NOT nonincreasing") +
             ", max gap x " + fmt(max_gap_x) + ", max gap throughput " +
             fmt(max_gap_thr) + ", tol 5e-3");
}

void criterion_feasibility_search(int index, const char* name) {
  const auto start = Clock::now();
  const adm::PoissonTable table = adm::build_poisson_table(50.0, 100);
  const adm::OptimalControlResult res =
      adm::optimal_u(kRunning, 0.9, 1e-6, 1e-10, table);

  // Independent reference: 1e4-point feasibility grid over [p, 1], with the
  // bracketing interval between the last feasible and first infeasible grid
  // point narrowed by bisection (grid spacing 7e-5 alone cannot resolve the
  // 1e-6 comparison).
  auto feasible = [&](double u) {
    return adm::solve_x_star(u, kRunning, table, 1e-10).x_star >= 0.9;
  };
  const double p = kRunning.p_base;
  double lo = p, hi = 1.0;
  for (int i = 1; i <= 10000; ++i) {
    const double u = p + (1.0 - p) * i / 10000.0;
    if (feasible(u)) {
      lo = u;
    } else {
      hi = u;
      break;
    }
  }
  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }

  const bool a_ok = res.status == adm::OptimalStatus::optimal && res.u_star.has_value() &&
                    std::fabs(*res.u_star - lo) <= 1e-6 &&
                    std::fabs(res.x_at_u_star - 0.9) <= 1e-4;

  const double x_p = adm::solve_x_star(p, kRunning, table).x_star;
  const adm::OptimalControlResult infeasible =
      adm::optimal_u(kRunning, 0.5 * (1.0 + x_p), 1e-6, 1e-10, table);
  const bool b_ok = infeasible.status == adm::OptimalStatus::infeasible;

  const adm::OptimalControlResult saturated =
      adm::optimal_u(kRunning, 0.5, 1e-6, 1e-10, table);
  const bool c_ok = saturated.status == adm::OptimalStatus::saturated_at_one &&
                    saturated.u_star.has_value() && *saturated.u_star == 1.0;

  const double elapsed = seconds_since(start);
  report(index, name, a_ok && b_ok && c_ok && elapsed < 1.0,
         "u* " + (res.u_star ? fmt_fixed(*res.u_star, 7) : "none") + ", grid ref " +
             fmt_fixed(lo, 7) + ", |x - floor| " +
             fmt(std::fabs(res.x_at_u_star - 0.9)) +
             (b_ok ? ", high floor infeasible" : ", high floor NOT infeasible") +
             (c_ok ? ", low floor saturates" : ", low floor does NOT saturate") + ", " +
             fmt_fixed(elapsed, 2) + " s");
}

void criterion_matching_uniformity(int index, const char* name) {
  adm::MicroState st;
  st.agents.assign(10, adm::AgentState{1.0, 1.0, 1.0});
  adm::RngStream rng(271828);
  std::vector<int> hits(10, 0);
  bool totals_ok = true;
  const int reps = 100000;
  for (int rep = 0; rep < reps; ++rep) {
    const adm::EpochOutcome oc = adm::sample_epoch_fixed_demand(st, 1.0, 3, rng);
    int total = 0;
    for (std::size_t i = 0; i < 10; ++i) {
      hits[i] += oc.allocation[i];
      total += oc.allocation[i];
    }
    totals_ok = totals_ok && total == 3;
  }
  double worst = 0.0;
  for (int h : hits) worst = std::max(worst, std::fabs(h / static_cast<double>(reps) - 0.3));
  report(index, name, totals_ok && worst <= 0.005,
         std::string(totals_ok ? "totals exact" : "totals WRONG") +
             ", worst |freq - 0.3| " + fmt(worst) + ", tol 5e-3");
}

void criterion_throughput_slope(int index, const char* name) {
  const adm::PoissonTable table = adm::build_poisson_table(50.0, 100);
  const adm::GammaPrimeResult slope = adm::gamma_prime_at_p(kRunning, table);
  const double p = kRunning.p_base, h = 1e-4;
  // Steady-state throughput is undefined below p, so the difference is
  // centered at p + h using the two computable endpoints.
  const double gamma_p = adm::steady_state_metrics(p, kRunning, table).throughput;
  const double gamma_2h = adm::steady_state_metrics(p + 2 * h, kRunning, table).throughput;
  const double fd = (gamma_2h - gamma_p) / (2 * h);
  const double rel = std::fabs(fd - slope.value) / std::fabs(slope.value);

  bool monotone_ok = true;
  if (slope.value > 0.0) {
    const adm::SteadyStateMetrics base = adm::steady_state_metrics(p, kRunning, table);
    const adm::SteadyStateMetrics bumped =
        adm::steady_state_metrics(p + 1e-3, kRunning, table);
    monotone_ok = bumped.throughput > base.throughput && bumped.x_inf <= base.x_inf;
  }
  report(index, name, rel <= 1e-2 && monotone_ok,
         "slope " + fmt_fixed(slope.value, 6) + ", finite difference " +
             fmt_fixed(fd, 6) + ", rel err " + fmt(rel) +
             (monotone_ok ? ", local monotonicity holds" : ", local monotonicity FAILS"));
}

}  // namespace

int main() {
  run(1, "closed-form service probability vs series oracle", criterion_closed_form_vs_oracle);
  run(2, "heterogeneous ensemble tracks the recursion", criterion_ensemble_vs_recursion);
  run(3, "unique fixed point located by scan and solver", criterion_unique_fixed_point);
  run(4, "weak-control multiplicity and contraction certificate", criterion_multiplicity_regime);
  run(5, "global convergence to the fixed point", criterion_global_convergence);
  run(6, "error decay slope stays in band", criterion_error_decay_slope);
  run(7, "frontier matches transient averaging", criterion_frontier_vs_transient);
  run(8, "largest feasible control search", criterion_feasibility_search);
  run(9, "scarce matching allocates uniformly", criterion_matching_uniformity);
  run(10, "throughput slope at the base control", criterion_throughput_slope);
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures > 0 ? 1 : 0;
}
