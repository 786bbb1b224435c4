#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "adm/equilibrium.hpp"
#include "json.hpp"

namespace adm {

struct SteadyStateMetrics {
  double u = 0.0;
  double x_inf = 0.0;       // x*(u)
  double q_star = 0.0;      // p + (u-p) x*(u)
  double throughput = 0.0;  // q* x*
};

// Equilibrium metrics at control u (requires u >= p, like solve_x_star).
SteadyStateMetrics steady_state_metrics(double u, const ModelParams& params,
                                        const PoissonTable& table,
                                        double delta_x = 1e-10);

// d/du of steady-state throughput at u = p:
//   Gamma'(p) = x_p^2 + p (K-1) x_p g'(a_p),  a_p = 1+(K-1)p,  x_p = g(a_p).
// one_sided is set when a_p is an integer (g' is then the right-hand value).
struct GammaPrimeResult {
  double value = 0.0;
  bool one_sided = false;
};

GammaPrimeResult gamma_prime_at_p(const ModelParams& params, const PoissonTable& table);

// Sufficient condition for the frontier to be strictly decreasing in x (and
// throughput increasing in u):
//   (K-1) sup_u |g'(a*(u))| sup_u (p + 2(u-p) x_inf(u)) < inf_u x_inf(u),
// evaluated on a u-grid over [p,1] augmented with every u where a*(u) crosses
// an integer (those u are reported; the theorem assumes a*(u) off integers).
struct MonotonicityCertificate {
  bool holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double sup_gprime_abs = 0.0;
  double sup_drift = 0.0;   // sup of p + 2(u-p) x_inf
  double inf_x_inf = 0.0;
  std::vector<double> integer_crossings;  // u values with a*(u) integral
};

MonotonicityCertificate throughput_monotonicity_certificate(const ModelParams& params,
                                                            const PoissonTable& table,
                                                            int u_grid);

// Equilibrium frontier at the given controls (every u must be >= p); output
// order matches the input order.
std::vector<SteadyStateMetrics> frontier(const ModelParams& params,
                                         const std::vector<double>& u_values,
                                         const PoissonTable& table,
                                         double delta_x = 1e-10);

enum class OptimalStatus { optimal, infeasible, saturated_at_one };

const char* to_string(OptimalStatus status);

// Feasibility bisection for max{u in [p,1] : x_inf(u) >= x_floor}. Fields
// other than status and iterations are unset (NaN/absent) when infeasible.
struct OptimalControlResult {
  OptimalStatus status = OptimalStatus::infeasible;
  std::optional<double> u_star;
  double x_at_u_star = 0.0;
  double throughput_at_u_star = 0.0;
  int iterations = 0;  // bisection steps over u
};

// x_floor in (0,1), delta_u and delta_x positive. Feasible(u) means
// x_inf(u) >= x_floor; equality counts as feasible. Returns infeasible when
// Feasible(p) fails, saturated_at_one when Feasible(1) holds, otherwise
// bisects and returns the lower (feasible) endpoint once the bracket is
// narrower than delta_u.
OptimalControlResult optimal_u(const ModelParams& params, double x_floor,
                               double delta_u, double delta_x,
                               const PoissonTable& table);

// Columns: u, x_inf, q_star, throughput.
void write_frontier_csv(const std::vector<SteadyStateMetrics>& rows, std::ostream& out);

// Report keys: status, u_star, x_at_u_star, throughput, iterations,
// tolerances. Status strings are uppercase (OPTIMAL, INFEASIBLE,
// SATURATED_AT_ONE); value fields are omitted when infeasible.
nlohmann::json optimal_u_report(const OptimalControlResult& result,
                                double delta_u, double delta_x);

}  // namespace adm
