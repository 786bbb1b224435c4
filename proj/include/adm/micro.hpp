#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "adm/demand.hpp"
#include "adm/meanfield.hpp"
#include "adm/rng.hpp"
#include "json.hpp"

namespace adm {

// Beta(alpha, beta) belief plus the agent's baseline participation rate.
struct AgentState {
  double alpha = 1.0;
  double beta = 1.0;
  double p_base = 0.0;

  double belief() const { return alpha / (alpha + beta); }      // x_i
  double pseudo_count() const { return alpha + beta; }          // n_i
};

struct MicroState {
  std::vector<AgentState> agents;
  std::int64_t epoch = 0;
};

struct EpochOutcome {
  std::vector<std::uint8_t> participation;  // B_i
  std::vector<std::uint8_t> allocation;     // A_i, subset of participants
  std::vector<double> q;                    // effective participation probs used
  int demand = 0;                           // realized D
};

// q_i = (1 - x_i) p_i + x_i u.
double effective_participation(const AgentState& agent, double u);

// Samples one epoch from a frozen state. Draw order: participation uniforms in
// agent order, then one demand uniform (CDF inversion on `table`), then the
// matching permutation. Exactly min(D, #participants) agents are allocated,
// uniformly without replacement (partial Fisher-Yates over the active list).
EpochOutcome sample_epoch(const MicroState& state, double u, const PoissonTable& table,
                          RngStream& rng);

// Same mechanism with the demand draw replaced by a fixed value (no demand
// uniform is consumed); used by matching-property tests.
EpochOutcome sample_epoch_fixed_demand(const MicroState& state, double u, int demand,
                                       RngStream& rng);

// alpha_i += A_i, beta_i += (1 - A_i) B_i, epoch advances. Beliefs only move
// for participants.
MicroState update_beliefs(const MicroState& state, const EpochOutcome& outcome);

// Exact allocation probability of agent `tagged` conditional on participating:
//   s_i = sum_k P(M_-i = k) g(k+1)
// with M_-i Poisson-binomial over q_j, j != tagged, via the O(K^2) convolution
// DP. Requires q.size() <= 2000 (cost guard) and table.k_max >= q.size().
double allocation_prob_exact(const std::vector<double>& q, std::size_t tagged,
                             const PoissonTable& table);

// Per-run and cross-run participation-belief means of a Monte Carlo ensemble.
// Index t = 0 is the initial state; t runs to `horizon` inclusive.
struct McTrajectory {
  std::int64_t horizon = 0;
  int runs = 0;
  std::vector<std::vector<double>> direct;  // [run][t], mean of alpha/(alpha+beta)
  std::vector<std::vector<double>> pooled;  // [run][t], sum(alpha)/sum(n)
  std::vector<double> mc_direct_mean;       // [t], average over runs
  std::vector<double> mc_pooled_mean;       // [t]
};

// M independent runs from the same initial population. Run m draws from
// RngStream::substream(seed, m+1), so results are reproducible and independent
// of thread scheduling. threads = 0 picks a hardware-based default.
McTrajectory run_monte_carlo(const ModelParams& params, const std::vector<AgentState>& init,
                             const PoissonTable& table, std::int64_t horizon, int runs,
                             std::uint64_t seed, int threads = 0);

// Columns: run, t, direct_mean, pooled_mean.
void write_mc_trajectory_csv(const McTrajectory& traj, std::ostream& out);

// MC averages per epoch.
nlohmann::json mc_trajectory_summary_json(const McTrajectory& traj);

}  // namespace adm
