#include "adm/meanfield.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "fmt_util.hpp"

namespace adm {

void ModelParams::validate() const {
  if (k_agents < 1)
    throw std::invalid_argument("ModelParams: k_agents must be >= 1");
  if (!(p_base >= 0.0 && p_base <= 1.0))
    throw std::invalid_argument("ModelParams: p_base must be in [0, 1]");
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("ModelParams: lambda must be positive and finite");
  if (!(u >= 0.0 && u <= 1.0))
    throw std::invalid_argument("ModelParams: u must be in [0, 1]");
}

MfDiagnostics mf_diagnostics(const MeanFieldState& state, const ModelParams& params,
                             const PoissonTable& table) {
  MfDiagnostics d;
  d.q_bar = (1.0 - state.x_bar) * params.p_base + params.u * state.x_bar;
  d.s = eval_g(1.0 + (params.k_agents - 1) * d.q_bar, table);
  d.gamma = d.q_bar / (state.n_bar + d.q_bar);
  return d;
}

namespace {

// Shared by mf_step and mf_trajectory so repeated stepping is bit-identical
// to stepping through the pooled numerator form.
MeanFieldState advance(const MeanFieldState& state, const MfDiagnostics& d) {
  MeanFieldState next;
  next.alpha_bar = state.alpha_bar + d.q_bar * d.s;
  next.n_bar = state.n_bar + d.q_bar;
  next.x_bar = next.alpha_bar / next.n_bar;
  next.epoch = state.epoch + 1;
  return next;
}

}  // namespace

MfStepResult mf_step(const MeanFieldState& state, const ModelParams& params,
                     const PoissonTable& table) {
  MfDiagnostics d = mf_diagnostics(state, params, table);
  return {advance(state, d), d};
}

MfTrajectory mf_trajectory(const ModelParams& params, double x0, double n0,
                           std::int64_t horizon, const PoissonTable& table) {
  params.validate();
  if (!(x0 >= 0.0 && x0 <= 1.0))
    throw std::invalid_argument("mf_trajectory: x0 must be in [0, 1]");
  if (!(n0 > 0.0) || !std::isfinite(n0))
    throw std::invalid_argument("mf_trajectory: n0 must be positive and finite");
  if (horizon < 0)
    throw std::invalid_argument("mf_trajectory: horizon must be nonnegative");

  MfTrajectory out;
  out.states.reserve(static_cast<std::size_t>(horizon) + 1);
  out.diag.reserve(static_cast<std::size_t>(horizon) + 1);
  MeanFieldState state(x0, n0);
  for (std::int64_t t = 0; t <= horizon; ++t) {
    MfDiagnostics d = mf_diagnostics(state, params, table);
    out.states.push_back(state);
    out.diag.push_back(d);
    if (t < horizon) state = advance(state, d);
  }
  return out;
}

std::optional<std::int64_t> convergence_time(const MfTrajectory& traj, double x_star,
                                             double epsilon) {
  if (traj.states.empty())
    throw std::invalid_argument("convergence_time: empty trajectory");
  if (!(epsilon > 0.0))
    throw std::invalid_argument("convergence_time: epsilon must be positive");
  std::size_t i = traj.states.size();
  while (i > 0) {
    if (std::fabs(traj.states[i - 1].x_bar - x_star) > epsilon) break;
    --i;
  }
  if (i == traj.states.size()) return std::nullopt;  // final point still outside
  return traj.states[i].epoch;
}

void write_mf_trajectory_csv(const MfTrajectory& traj, std::ostream& out) {
  out << "t,x_bar,n_bar,q_bar,s,gamma,throughput\n";
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const MeanFieldState& st = traj.states[i];
    const MfDiagnostics& d = traj.diag[i];
    out << st.epoch << ',' << detail::fmt_double(st.x_bar) << ','
        << detail::fmt_double(st.n_bar) << ',' << detail::fmt_double(d.q_bar) << ','
        << detail::fmt_double(d.s) << ',' << detail::fmt_double(d.gamma) << ','
        << detail::fmt_double(d.throughput()) << '\n';
  }
}

}  // namespace adm
