#include "dcpf/mp.hpp"

#include <cmath>

#include "dcpf/errors.hpp"

namespace dcpf {

std::vector<double> lc_residual(std::span<const double> theta, std::span<const double> p,
                                const NodalMatrix& Y) {
  if (theta.size() != p.size() || static_cast<int>(theta.size()) != Y.dim)
    throw DimensionMismatch("lc_residual: dimension mismatch");
  std::vector<double> e(Y.dim);
  Y.multiply(theta, e);
  for (int i = 0; i < Y.dim; ++i) e[i] = p[i] - e[i];
  return e;
}

double max_nonslack_residual(std::span<const double> residual, int slack_bus) {
  double m = 0.0;
  for (int i = 0; i < static_cast<int>(residual.size()); ++i)
    if (i != slack_bus) m = std::max(m, std::abs(residual[i]));
  return m;
}

double mean_nonslack_residual(std::span<const double> residual, int slack_bus) {
  const int n = static_cast<int>(residual.size());
  if (n <= 1) return 0.0;
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    if (i != slack_bus) s += std::abs(residual[i]);
  return s / (n - 1);
}

std::vector<double> phasor_update(std::span<const double> theta, std::span<const double> p,
                                  const NodalMatrix& Y, double omega, int slack_bus) {
  const int n = Y.dim;
  // neighbor message sum: sum_{j in N(i)} theta_j y_ij
  std::vector<double> msg(n, 0.0);
  for (const auto& e : Y.off) {
    msg[e.i] += e.y * theta[e.j];
    msg[e.j] += e.y * theta[e.i];
  }
  std::vector<double> next(n);
  for (int i = 0; i < n; ++i) {
    if (i == slack_bus) {
      next[i] = 0.0;
      continue;
    }
    next[i] = (1.0 - omega) * theta[i] + omega * (p[i] - msg[i]) / Y.diag[i];
  }
  return next;
}

MpSolveResult mp_opt_solve(const NodalMatrix& Y, std::span<const double> p, int slack_bus,
                           const MpConfig& config) {
  MpSolveResult res;
  res.theta.assign(Y.dim, 0.0);

  double resid = max_nonslack_residual(lc_residual(res.theta, p, Y), slack_bus);
  for (int k = 0; k < config.n_layers; ++k) {
    if (resid < config.tol) break;
    res.theta = phasor_update(res.theta, p, Y, config.omega, slack_bus);
    ++res.layers_run;
    std::vector<double> e = lc_residual(res.theta, p, Y);
    resid = max_nonslack_residual(e, slack_bus);
    if (config.track_trajectory) {
      res.trajectory.max_residual.push_back(resid);
      res.trajectory.mean_residual.push_back(mean_nonslack_residual(e, slack_bus));
    }
  }
  res.trajectory.layers_run = res.layers_run;
  res.final_residual = resid;
  res.converged = resid < config.tol;
  return res;
}

MpSolveResult mp_opt_solve(const BusGraph& bg, std::span<const double> p,
                           const MpConfig& config) {
  return mp_opt_solve(build_nodal_matrix(bg), p, bg.slack_bus, config);
}

std::vector<double> mp_forward(std::span<const double> theta0, std::span<const double> p,
                               const NodalMatrix& Y, double omega, int n_layers, int slack_bus,
                               MpForwardCache* cache, bool keep_states) {
  std::vector<double> theta(theta0.begin(), theta0.end());
  if (slack_bus >= 0) theta[slack_bus] = 0.0;
  if (cache) {
    cache->omega = omega;
    cache->n_layers = n_layers;
    cache->slack_bus = slack_bus;
    cache->states.clear();
    if (keep_states) cache->states.push_back(theta);
  }
  for (int k = 0; k < n_layers; ++k) {
    theta = phasor_update(theta, p, Y, omega, slack_bus);
    if (cache && keep_states) cache->states.push_back(theta);
  }
  return theta;
}

std::vector<double> phasor_update_adjoint(std::span<const double> grad, const NodalMatrix& Y,
                                          double omega, int slack_bus) {
  const int n = Y.dim;
  // forward map on non-slack rows: A[i][i] = 1-omega, A[i][j] = -omega y_ij / y_ii;
  // the transpose swaps which end carries the 1/y_ii factor.
  std::vector<double> out(n, 0.0);
  for (int j = 0; j < n; ++j)
    if (j != slack_bus) out[j] = (1.0 - omega) * grad[j];
  for (const auto& e : Y.off) {
    if (e.i != slack_bus) out[e.j] -= omega * e.y / Y.diag[e.i] * grad[e.i];
    if (e.j != slack_bus) out[e.i] -= omega * e.y / Y.diag[e.j] * grad[e.j];
  }
  if (slack_bus >= 0) out[slack_bus] = 0.0;
  return out;
}

std::vector<double> mp_adjoint(std::span<const double> grad_theta_k, const NodalMatrix& Y,
                               const MpForwardCache& cache) {
  std::vector<double> g(grad_theta_k.begin(), grad_theta_k.end());
  if (cache.slack_bus >= 0) g[cache.slack_bus] = 0.0;
  for (int k = 0; k < cache.n_layers; ++k)
    g = phasor_update_adjoint(g, Y, cache.omega, cache.slack_bus);
  return g;
}

}  // namespace dcpf
