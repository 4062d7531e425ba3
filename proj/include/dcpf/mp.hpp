#pragma once

#include <span>
#include <vector>

#include "dcpf/grid.hpp"

namespace dcpf {

struct MpConfig {
  int n_layers = 5000;   // layer budget; weakly coupled N-1 topologies need the headroom
  double omega = 1.0;    // damping in (0, 1]; 1 = plain Jacobi update
  double tol = 1e-8;     // stop when max non-slack |LC residual| drops below
  bool track_trajectory = false;
};

struct MpTrajectory {
  std::vector<double> max_residual;   // per executed layer, non-slack buses
  std::vector<double> mean_residual;
  int layers_run = 0;
};

// NotConverged is a result state, not an exception: the caller decides severity.
struct MpSolveResult {
  std::vector<double> theta;
  MpTrajectory trajectory;
  bool converged = false;
  double final_residual = 0.0;
  int layers_run = 0;
};

// Local conservation error E = p - Y theta, for every bus including slack.
std::vector<double> lc_residual(std::span<const double> theta, std::span<const double> p,
                                const NodalMatrix& Y);

// max |E_i| over non-slack buses; the convergence measure.
double max_nonslack_residual(std::span<const double> residual, int slack_bus);
double mean_nonslack_residual(std::span<const double> residual, int slack_bus);

// One damped Jacobi step: messages sum over neighbors only, the self term
// lives in the division by y_ii; the slack phasor stays pinned at 0.
std::vector<double> phasor_update(std::span<const double> theta, std::span<const double> p,
                                  const NodalMatrix& Y, double omega, int slack_bus);

// Flat (zero) initialization, then phasor updates until the residual drops
// below tol or the layer budget runs out.
MpSolveResult mp_opt_solve(const NodalMatrix& Y, std::span<const double> p, int slack_bus,
                           const MpConfig& config);
MpSolveResult mp_opt_solve(const BusGraph& bg, std::span<const double> p,
                           const MpConfig& config);

// Fixed-depth unrolled chain from an arbitrary start (the PIMP path). The
// input's slack component is pinned to 0 before the first layer. When
// keep_states is set, per-layer phasors (including layer 0) are cached for
// losses that touch intermediate layers.
struct MpForwardCache {
  double omega = 1.0;
  int n_layers = 0;
  int slack_bus = -1;
  std::vector<std::vector<double>> states;  // only filled when requested
};

std::vector<double> mp_forward(std::span<const double> theta0, std::span<const double> p,
                               const NodalMatrix& Y, double omega, int n_layers, int slack_bus,
                               MpForwardCache* cache = nullptr, bool keep_states = false);

// Transpose of one phasor_update step as a linear map in theta (the update is
// affine, so the adjoint needs no cached state).
std::vector<double> phasor_update_adjoint(std::span<const double> grad, const NodalMatrix& Y,
                                          double omega, int slack_bus);

// Pulls a cotangent at theta_K back to theta_0 through the unrolled chain.
// The returned slack component is 0.
std::vector<double> mp_adjoint(std::span<const double> grad_theta_k, const NodalMatrix& Y,
                               const MpForwardCache& cache);

}  // namespace dcpf
