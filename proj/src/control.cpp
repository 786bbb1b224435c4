#include "adm/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "fmt_util.hpp"

namespace adm {

SteadyStateMetrics steady_state_metrics(double u, const ModelParams& params,
                                        const PoissonTable& table, double delta_x) {
  SteadyStateMetrics m;
  m.u = u;
  m.x_inf = solve_x_star(u, params, table, delta_x).x_star;
  m.q_star = params.p_base + (u - params.p_base) * m.x_inf;
  m.throughput = m.q_star * m.x_inf;
  return m;
}

GammaPrimeResult gamma_prime_at_p(const ModelParams& params, const PoissonTable& table) {
  params.validate();
  const double p = params.p_base;
  const double a_p = 1.0 + (params.k_agents - 1) * p;
  const double x_p = eval_g(a_p, table);
  const double gp = eval_g_prime(a_p, table);
  GammaPrimeResult r;
  r.value = x_p * x_p + p * (params.k_agents - 1) * x_p * gp;
  r.one_sided = std::floor(a_p) == a_p;
  return r;
}

namespace {

double a_of(double u, double x, const ModelParams& params) {
  return 1.0 + (params.k_agents - 1) * (params.p_base + (u - params.p_base) * x);
}

}  // namespace

MonotonicityCertificate throughput_monotonicity_certificate(const ModelParams& params,
                                                            const PoissonTable& table,
                                                            int u_grid) {
  params.validate();
  if (u_grid < 100)
    throw std::invalid_argument("throughput_monotonicity_certificate: u_grid must be >= 100");

  const double p = params.p_base;
  auto x_at = [&](double u) { return solve_x_star(u, params, table).x_star; };
  auto a_at = [&](double u) { return a_of(u, x_at(u), params); };

  const std::size_t n = static_cast<std::size_t>(u_grid);
  std::vector<double> us(n + 1), xs(n + 1), as(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    us[i] = p + (1.0 - p) * static_cast<double>(i) / static_cast<double>(u_grid);
    xs[i] = x_at(us[i]);
    as[i] = a_of(us[i], xs[i], params);
  }

  MonotonicityCertificate cert;

  // a*(u) is nondecreasing, so every integer level it passes is crossed inside
  // some grid interval; locate each crossing by bisection on u.
  for (std::size_t i = 0; i <= n; ++i)
    if (std::floor(as[i]) == as[i]) cert.integer_crossings.push_back(us[i]);
  for (std::size_t i = 0; i < n; ++i) {
    for (double level = std::floor(as[i]) + 1.0; level <= as[i + 1]; level += 1.0) {
      double lo = us[i], hi = us[i + 1];
      for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (a_at(mid) < level)
          lo = mid;
        else
          hi = mid;
      }
      cert.integer_crossings.push_back(0.5 * (lo + hi));
    }
  }

  double sup_gprime = 0.0, sup_drift = 0.0;
  double inf_x = std::numeric_limits<double>::infinity();
  auto fold = [&](double u, double x, double gprime_abs) {
    sup_gprime = std::max(sup_gprime, gprime_abs);
    sup_drift = std::max(sup_drift, p + 2.0 * (u - p) * x);
    inf_x = std::min(inf_x, x);
  };
  for (std::size_t i = 0; i <= n; ++i)
    fold(us[i], xs[i], std::fabs(eval_g_prime(as[i], table)));
  for (double u : cert.integer_crossings) {
    const double x = x_at(u);
    const double a = a_of(u, x, params);
    // At a crossing, take the steeper (right-hand) branch of g' so the
    // envelope stays an upper bound even when a lands just below the integer.
    const int level = static_cast<int>(std::llround(a));
    const double gp = table.lambda / (a * a) * table.cdf_at(level - 1);
    fold(u, x, gp);
  }

  cert.sup_gprime_abs = sup_gprime;
  cert.sup_drift = sup_drift;
  cert.inf_x_inf = inf_x;
  cert.lhs = (params.k_agents - 1) * sup_gprime * sup_drift;
  cert.rhs = inf_x;
  cert.holds = cert.lhs < cert.rhs;
  return cert;
}

std::vector<SteadyStateMetrics> frontier(const ModelParams& params,
                                         const std::vector<double>& u_values,
                                         const PoissonTable& table, double delta_x) {
  params.validate();
  for (double u : u_values) {
    if (!(u >= 0.0 && u <= 1.0))
      throw std::invalid_argument("frontier: u = " + std::to_string(u) +
                                  " outside [0, 1]");
    if (u < params.p_base)
      throw RegimeError("frontier: u = " + std::to_string(u) + " is below p");
  }
  std::vector<SteadyStateMetrics> rows;
  rows.reserve(u_values.size());
  for (double u : u_values) rows.push_back(steady_state_metrics(u, params, table, delta_x));
  return rows;
}

const char* to_string(OptimalStatus status) {
  switch (status) {
    case OptimalStatus::optimal:
      return "optimal";
    case OptimalStatus::infeasible:
      return "infeasible";
    case OptimalStatus::saturated_at_one:
      return "saturated_at_one";
  }
  return "?";
}

OptimalControlResult optimal_u(const ModelParams& params, double x_floor, double delta_u,
                               double delta_x, const PoissonTable& table) {
  params.validate();
  if (!(x_floor > 0.0 && x_floor < 1.0))
    throw std::invalid_argument("optimal_u: x_floor must be in (0, 1)");
  if (!(delta_u > 0.0))
    throw std::invalid_argument("optimal_u: delta_u must be positive");
  if (!(delta_x > 0.0))
    throw std::invalid_argument("optimal_u: delta_x must be positive");

  auto x_inf = [&](double u) { return solve_x_star(u, params, table, delta_x).x_star; };
  auto fill = [&](OptimalControlResult& r, double u) {
    r.u_star = u;
    r.x_at_u_star = x_inf(u);
    const double q = params.p_base + (u - params.p_base) * r.x_at_u_star;
    r.throughput_at_u_star = q * r.x_at_u_star;
  };

  OptimalControlResult r;
  const double p = params.p_base;
  if (x_inf(p) < x_floor) {
    r.status = OptimalStatus::infeasible;
    r.x_at_u_star = std::numeric_limits<double>::quiet_NaN();
    r.throughput_at_u_star = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  if (x_inf(1.0) >= x_floor) {
    r.status = OptimalStatus::saturated_at_one;
    fill(r, 1.0);
    return r;
  }

  double lo = p, hi = 1.0;
  int iterations = 0;
  while (hi - lo > delta_u) {
    const double mid = 0.5 * (lo + hi);
    if (x_inf(mid) >= x_floor)
      lo = mid;
    else
      hi = mid;
    ++iterations;
  }
  r.status = OptimalStatus::optimal;
  fill(r, lo);
  r.iterations = iterations;
  return r;
}

void write_frontier_csv(const std::vector<SteadyStateMetrics>& rows, std::ostream& out) {
  out << "u,x_inf,q_star,throughput\n";
  for (const SteadyStateMetrics& m : rows)
    out << detail::fmt_double(m.u) << ',' << detail::fmt_double(m.x_inf) << ','
        << detail::fmt_double(m.q_star) << ',' << detail::fmt_double(m.throughput) << '\n';
}

nlohmann::json optimal_u_report(const OptimalControlResult& result,
                                double delta_u, double delta_x) {
  nlohmann::json j;
  switch (result.status) {
    case OptimalStatus::optimal:
      j["status"] = "OPTIMAL";
      break;
    case OptimalStatus::infeasible:
      j["status"] = "INFEASIBLE";
      break;
    case OptimalStatus::saturated_at_one:
      j["status"] = "SATURATED_AT_ONE";
      break;
  }
  if (result.u_star) {
    j["u_star"] = *result.u_star;
    j["x_at_u_star"] = result.x_at_u_star;
    j["throughput"] = result.throughput_at_u_star;
  }
  j["iterations"] = result.iterations;
  j["tolerances"] = {{"delta_u", delta_u}, {"delta_x", delta_x}};
  return j;
}

}  // namespace adm
