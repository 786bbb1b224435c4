#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "adm/demand.hpp"

namespace adm {

struct ModelParams {
  int k_agents = 1;      // K >= 1
  double p_base = 0.0;   // p in [0, 1]
  double lambda = 1.0;   // > 0
  double u = 0.0;        // recommendation intensity in [0, 1]

  void validate() const;  // throws std::invalid_argument naming the field
};

// Population state (x_bar, n_bar). alpha_bar is the pooled numerator
// x_bar*n_bar carried across steps so that the closed recursion
// x' = x + gamma (s - x) and the pooled form x' = (alpha + q s)/(n + q)
// produce bit-identical trajectories (they are the same computation here).
struct MeanFieldState {
  double x_bar = 0.0;
  double n_bar = 1.0;
  std::int64_t epoch = 0;
  double alpha_bar = 0.0;

  MeanFieldState() = default;
  MeanFieldState(double x0, double n0)
      : x_bar(x0), n_bar(n0), epoch(0), alpha_bar(x0 * n0) {}
};

struct MfDiagnostics {
  double q_bar = 0.0;   // (1-x)p + ux
  double s = 0.0;       // g(1 + (K-1) q_bar)
  double gamma = 0.0;   // q_bar / (n_bar + q_bar)
  double throughput() const { return q_bar * s; }
};

struct MfStepResult {
  MeanFieldState state;  // state at epoch t+1
  MfDiagnostics diag;    // diagnostics evaluated at the input state
};

// Diagnostics of a state without advancing it.
MfDiagnostics mf_diagnostics(const MeanFieldState& state, const ModelParams& params,
                             const PoissonTable& table);

// One deterministic recursion step:
//   q = (1-x)p + ux,  s = g(1+(K-1)q),  n' = n + q,  x' = x + [q/(n+q)](s - x).
MfStepResult mf_step(const MeanFieldState& state, const ModelParams& params,
                     const PoissonTable& table);

struct MfTrajectory {
  std::vector<MeanFieldState> states;  // size horizon+1
  std::vector<MfDiagnostics> diag;     // diag[t] evaluated at states[t]
};

// Runs the recursion for `horizon` steps from (x0, n0). Throws
// std::invalid_argument if x0 is outside [0,1] or n0 <= 0 or horizon < 0.
MfTrajectory mf_trajectory(const ModelParams& params, double x0, double n0,
                           std::int64_t horizon, const PoissonTable& table);

// Smallest t such that |x_bar(tau) - x_star| <= epsilon for every recorded
// tau >= t; nullopt when the final sample still violates the band. Throws
// std::invalid_argument on an empty trajectory or epsilon <= 0.
std::optional<std::int64_t> convergence_time(const MfTrajectory& traj, double x_star,
                                             double epsilon);

// Columns: t, x_bar, n_bar, q_bar, s, gamma, throughput.
void write_mf_trajectory_csv(const MfTrajectory& traj, std::ostream& out);

}  // namespace adm
