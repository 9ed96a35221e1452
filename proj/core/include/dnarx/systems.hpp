#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Core>

namespace dnarx::bench {

/// Hysteretic oscillator m y'' + c y' + k y + z = u with
/// z' = alpha y' - beta (gamma |y'| |z|^(nu-1) z + delta y' |z|^nu).
struct BoucWenParams {
  double m_L = 2.0;
  double c_L = 10.0;
  double k_L = 5e4;
  double alpha = 5e4;
  double beta = 1e3;
  double gamma = 0.8;
  double delta = -1.1;
  double nu = 1.0;
};

struct NewmarkOptions {
  double beta = 0.25;
  double gamma = 0.5;
  double tol = 1e-10;   ///< relative Newton tolerance on (y'', z)
  int max_newton = 50;
  int substeps = 1;     ///< internal steps per input sample, input linearly interpolated
};

struct BoucWenState {
  double y = 0.0;
  double v = 0.0;
  double z = 0.0;
};

/// Displacement at every input sample. Throws NumericError naming the step
/// at which Newton failed to converge.
Eigen::VectorXd simulate_boucwen(const BoucWenParams& p, const Eigen::VectorXd& u, double dt,
                                 const NewmarkOptions& opts = {}, BoucWenState init = {});

/// m y'' + d y' + (a + b y^2) y = u. The defaults are synthetic: resonance
/// near 60 Hz with light damping.
struct DuffingParams {
  double m = 1.0;
  double d = 40.0;
  double a = 1.4e5;
  double b = 1.4e7;
};

struct Rk4Options {
  int substeps = 1;            ///< RK4 steps per input sample
  double blowup = 1e12;        ///< |y| above this is reported as overflow
};

/// Fixed-step RK4 with the input linearly interpolated between samples.
Eigen::VectorXd simulate_duffing(const DuffingParams& p, const Eigen::VectorXd& u, double dt,
                                 const Rk4Options& opts = {});

/// Same integrator driven by a continuous input u(t); returns y at t = k dt
/// for k = 0 .. n-1.
Eigen::VectorXd simulate_duffing(const DuffingParams& p, const std::function<double(double)>& u,
                                 double dt, std::size_t n, const Rk4Options& opts = {});

}  // namespace dnarx::bench
