#include "adm/micro.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <utility>

#include "fmt_util.hpp"

namespace adm {

double effective_participation(const AgentState& agent, double u) {
  const double x = agent.belief();
  return (1.0 - x) * agent.p_base + x * u;
}

namespace {

int sample_poisson(const PoissonTable& table, RngStream& rng) {
  const double v = rng.next_double();
  auto it = std::upper_bound(table.cdf.begin(), table.cdf.end(), v);
  if (it == table.cdf.end()) return table.k_max;
  return static_cast<int>(it - table.cdf.begin());
}

// fixed_demand < 0 means: draw demand from the table.
EpochOutcome sample_epoch_impl(const MicroState& state, double u, const PoissonTable* table,
                               int fixed_demand, RngStream& rng) {
  if (!(u >= 0.0 && u <= 1.0))
    throw std::invalid_argument("sample_epoch: u must be in [0, 1]");
  const std::size_t n = state.agents.size();
  if (n == 0) throw std::invalid_argument("sample_epoch: empty population");

  EpochOutcome out;
  out.q.resize(n);
  out.participation.resize(n);
  out.allocation.assign(n, 0);

  std::vector<std::uint32_t> active;
  active.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double qi = effective_participation(state.agents[i], u);
    out.q[i] = qi;
    const bool b = rng.next_bernoulli(qi);
    out.participation[i] = b ? 1 : 0;
    if (b) active.push_back(static_cast<std::uint32_t>(i));
  }

  out.demand = fixed_demand >= 0 ? fixed_demand : sample_poisson(*table, rng);

  const std::size_t filled = std::min<std::size_t>(out.demand, active.size());
  for (std::size_t j = 0; j < filled; ++j) {
    const std::size_t pick = j + rng.next_index(active.size() - j);
    std::swap(active[j], active[pick]);
    out.allocation[active[j]] = 1;
  }
  return out;
}

void validate_population(const std::vector<AgentState>& agents) {
  for (const AgentState& a : agents) {
    if (!(a.alpha > 0.0) || !(a.beta > 0.0))
      throw std::invalid_argument("micro: agent pseudo-counts must be positive");
    if (!(a.p_base >= 0.0 && a.p_base <= 1.0))
      throw std::invalid_argument("micro: agent p_base must be in [0, 1]");
  }
}

}  // namespace

EpochOutcome sample_epoch(const MicroState& state, double u, const PoissonTable& table,
                          RngStream& rng) {
  return sample_epoch_impl(state, u, &table, -1, rng);
}

EpochOutcome sample_epoch_fixed_demand(const MicroState& state, double u, int demand,
                                       RngStream& rng) {
  if (demand < 0)
    throw std::invalid_argument("sample_epoch_fixed_demand: demand must be nonnegative");
  return sample_epoch_impl(state, u, nullptr, demand, rng);
}

MicroState update_beliefs(const MicroState& state, const EpochOutcome& outcome) {
  const std::size_t n = state.agents.size();
  if (outcome.participation.size() != n || outcome.allocation.size() != n)
    throw std::invalid_argument("update_beliefs: outcome does not match population size");
  MicroState next;
  next.agents = state.agents;
  next.epoch = state.epoch + 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (outcome.allocation[i])
      next.agents[i].alpha += 1.0;
    else if (outcome.participation[i])
      next.agents[i].beta += 1.0;
  }
  return next;
}

double allocation_prob_exact(const std::vector<double>& q, std::size_t tagged,
                             const PoissonTable& table) {
  const std::size_t n = q.size();
  if (n == 0) throw std::invalid_argument("allocation_prob_exact: q must be nonempty");
  if (tagged >= n) throw std::invalid_argument("allocation_prob_exact: tagged out of range");
  if (n > 2000) throw std::invalid_argument("allocation_prob_exact: K exceeds the 2000 guard");
  for (double v : q)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("allocation_prob_exact: q entries must be in [0, 1]");

  // Distribution of the number of other participants, built up one agent at a
  // time (in-place convolution, descending index).
  std::vector<double> f(n, 0.0);
  f[0] = 1.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == tagged) continue;
    const double qj = q[j];
    ++count;
    for (std::size_t k = count; k >= 1; --k) f[k] = f[k] * (1.0 - qj) + f[k - 1] * qj;
    f[0] *= 1.0 - qj;
  }

  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    s += f[k] * eval_g(static_cast<double>(k) + 1.0, table);
  return s;
}

McTrajectory run_monte_carlo(const ModelParams& params, const std::vector<AgentState>& init,
                             const PoissonTable& table, std::int64_t horizon, int runs,
                             std::uint64_t seed, int threads) {
  params.validate();
  if (init.size() != static_cast<std::size_t>(params.k_agents))
    throw std::invalid_argument("run_monte_carlo: init size must equal k_agents");
  validate_population(init);
  if (horizon < 0) throw std::invalid_argument("run_monte_carlo: horizon must be nonnegative");
  if (runs < 1) throw std::invalid_argument("run_monte_carlo: runs must be >= 1");
  if (threads < 0) throw std::invalid_argument("run_monte_carlo: threads must be >= 0");

  McTrajectory out;
  out.horizon = horizon;
  out.runs = runs;
  out.direct.assign(runs, {});
  out.pooled.assign(runs, {});

  const std::size_t len = static_cast<std::size_t>(horizon) + 1;
  const double inv_k = 1.0 / params.k_agents;

  auto one_run = [&](int m) {
    RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(m) + 1);
    MicroState st{init, 0};
    std::vector<double>& dm = out.direct[static_cast<std::size_t>(m)];
    std::vector<double>& pm = out.pooled[static_cast<std::size_t>(m)];
    dm.resize(len);
    pm.resize(len);
    for (std::int64_t t = 0;; ++t) {
      double sum_x = 0.0, sum_alpha = 0.0, sum_n = 0.0;
      for (const AgentState& a : st.agents) {
        sum_x += a.belief();
        sum_alpha += a.alpha;
        sum_n += a.pseudo_count();
      }
      dm[static_cast<std::size_t>(t)] = sum_x * inv_k;
      pm[static_cast<std::size_t>(t)] = sum_alpha / sum_n;
      if (t == horizon) break;
      EpochOutcome oc = sample_epoch(st, params.u, table, rng);
      st = update_beliefs(st, oc);
    }
  };

  int workers = threads;
  if (workers == 0) {
    unsigned hw = std::thread::hardware_concurrency();
    workers = static_cast<int>(hw == 0 ? 1 : hw);
    workers = std::min(workers, 8);
  }
  workers = std::min(workers, runs);

  if (workers <= 1) {
    for (int m = 0; m < runs; ++m) one_run(m);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          const int m = next.fetch_add(1);
          if (m >= runs) return;
          one_run(m);
        }
      });
    for (std::thread& th : pool) th.join();
  }

  // Deterministic aggregation: fixed summation order over runs.
  out.mc_direct_mean.assign(len, 0.0);
  out.mc_pooled_mean.assign(len, 0.0);
  for (int m = 0; m < runs; ++m)
    for (std::size_t t = 0; t < len; ++t) {
      out.mc_direct_mean[t] += out.direct[static_cast<std::size_t>(m)][t];
      out.mc_pooled_mean[t] += out.pooled[static_cast<std::size_t>(m)][t];
    }
  const double inv_runs = 1.0 / runs;
  for (std::size_t t = 0; t < len; ++t) {
    out.mc_direct_mean[t] *= inv_runs;
    out.mc_pooled_mean[t] *= inv_runs;
  }
  return out;
}

void write_mc_trajectory_csv(const McTrajectory& traj, std::ostream& out) {
  out << "run,t,direct_mean,pooled_mean\n";
  for (int m = 0; m < traj.runs; ++m) {
    const auto& dm = traj.direct[static_cast<std::size_t>(m)];
    const auto& pm = traj.pooled[static_cast<std::size_t>(m)];
    for (std::int64_t t = 0; t <= traj.horizon; ++t)
      out << m << ',' << t << ',' << detail::fmt_double(dm[static_cast<std::size_t>(t)])
          << ',' << detail::fmt_double(pm[static_cast<std::size_t>(t)]) << '\n';
  }
}

nlohmann::json mc_trajectory_summary_json(const McTrajectory& traj) {
  nlohmann::json j;
  j["runs"] = traj.runs;
  j["horizon"] = traj.horizon;
  j["mc_direct_mean"] = traj.mc_direct_mean;
  j["mc_pooled_mean"] = traj.mc_pooled_mean;
  return j;
}

}  // namespace adm
