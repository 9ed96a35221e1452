#include "dnarx/systems.hpp"

#include <cmath>
#include <string>

#include "dnarx/errors.hpp"

namespace dnarx::bench {

namespace {

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct Hysteresis {
  const BoucWenParams& p;

  double f(double v, double z) const {
    const double az = std::abs(z);
    return p.alpha * v - p.beta * (p.gamma * std::abs(v) * std::pow(az, p.nu - 1.0) * z +
                                   p.delta * v * std::pow(az, p.nu));
  }
  double df_dv(double v, double z) const {
    const double az = std::abs(z);
    return p.alpha - p.beta * (p.gamma * sgn(v) * std::pow(az, p.nu - 1.0) * z +
                               p.delta * std::pow(az, p.nu));
  }
  double df_dz(double v, double z) const {
    const double az = std::abs(z);
    const double dpow = az > 0.0 ? p.nu * std::pow(az, p.nu - 1.0) : (p.nu == 1.0 ? 1.0 : 0.0);
    // d(|z|^(nu-1) z)/dz = nu |z|^(nu-1); d|z|^nu/dz = nu |z|^(nu-1) sgn(z)
    return -p.beta * (p.gamma * std::abs(v) * dpow + p.delta * v * dpow * sgn(z));
  }
};

void check_input(const Eigen::VectorXd& u, double dt, int substeps) {
  if (!(dt > 0.0)) throw ParseError("time step must be positive");
  if (substeps < 1) throw ParseError("substeps must be >= 1");
  if (!u.allFinite()) throw NumericError("input contains NaN or Inf");
}

}  // namespace

Eigen::VectorXd simulate_boucwen(const BoucWenParams& p, const Eigen::VectorXd& u, double dt,
                                 const NewmarkOptions& opts, BoucWenState init) {
  check_input(u, dt, opts.substeps);
  if (!(p.m_L > 0.0)) throw ParseError("Bouc-Wen mass must be positive");
  Eigen::VectorXd out(u.size());
  if (u.size() == 0) return out;

  const Hysteresis hz{p};
  const double h = dt / opts.substeps;
  const double b = opts.beta;
  const double g = opts.gamma;
  double y = init.y;
  double v = init.v;
  double z = init.z;
  double a = (u[0] - p.c_L * v - p.k_L * y - z) / p.m_L;
  out[0] = y;

  for (Eigen::Index n = 1; n < u.size(); ++n) {
    for (int s = 1; s <= opts.substeps; ++s) {
      const double w = static_cast<double>(s) / opts.substeps;
      const double un = (1.0 - w) * u[n - 1] + w * u[n];
      const double fz0 = hz.f(v, z);
      double a1 = a;
      double z1 = z;
      bool ok = false;
      for (int it = 0; it < opts.max_newton; ++it) {
        const double y1 = y + h * v + h * h * ((0.5 - b) * a + b * a1);
        const double v1 = v + h * ((1.0 - g) * a + g * a1);
        const double r1 = p.m_L * a1 + p.c_L * v1 + p.k_L * y1 + z1 - un;
        const double r2 = z1 - z - 0.5 * h * (fz0 + hz.f(v1, z1));
        const double j11 = p.m_L + p.c_L * g * h + p.k_L * b * h * h;
        const double j12 = 1.0;
        const double j21 = -0.5 * h * hz.df_dv(v1, z1) * g * h;
        const double j22 = 1.0 - 0.5 * h * hz.df_dz(v1, z1);
        const double det = j11 * j22 - j12 * j21;
        if (det == 0.0 || !std::isfinite(det)) break;
        const double da = -(j22 * r1 - j12 * r2) / det;
        const double dz = -(-j21 * r1 + j11 * r2) / det;
        a1 += da;
        z1 += dz;
        if (std::abs(da) <= opts.tol * (1.0 + std::abs(a1)) &&
            std::abs(dz) <= opts.tol * (1.0 + std::abs(z1))) {
          ok = true;
          break;
        }
      }
      if (!ok || !std::isfinite(a1) || !std::isfinite(z1)) {
        throw NumericError("Newmark/Newton did not converge at sample " + std::to_string(n) +
                           " (substep " + std::to_string(s) + ")");
      }
      const double y1 = y + h * v + h * h * ((0.5 - b) * a + b * a1);
      const double v1 = v + h * ((1.0 - g) * a + g * a1);
      y = y1;
      v = v1;
      a = a1;
      z = z1;
    }
    out[n] = y;
  }
  return out;
}

namespace {

template <class Input>
Eigen::VectorXd duffing_rk4(const DuffingParams& p, Input&& u_at, double dt, std::size_t n,
                            const Rk4Options& opts) {
  if (!(dt > 0.0)) throw ParseError("time step must be positive");
  if (!(p.m > 0.0)) throw ParseError("Duffing mass must be positive");
  if (opts.substeps < 1) throw ParseError("substeps must be >= 1");
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  if (n == 0) return out;
  const double h = dt / opts.substeps;
  auto accel = [&](double y, double v, double u) {
    return (u - p.d * v - (p.a + p.b * y * y) * y) / p.m;
  };
  double y = 0.0;
  double v = 0.0;
  out[0] = y;
  for (std::size_t k = 1; k < n; ++k) {
    for (int s = 0; s < opts.substeps; ++s) {
      const double t0 = static_cast<double>(k - 1) * dt + s * h;
      const double u0 = u_at(t0);
      const double um = u_at(t0 + 0.5 * h);
      const double u1 = u_at(t0 + h);
      const double k1y = v;
      const double k1v = accel(y, v, u0);
      const double k2y = v + 0.5 * h * k1v;
      const double k2v = accel(y + 0.5 * h * k1y, k2y, um);
      const double k3y = v + 0.5 * h * k2v;
      const double k3v = accel(y + 0.5 * h * k2y, k3y, um);
      const double k4y = v + h * k3v;
      const double k4v = accel(y + h * k3y, k4y, u1);
      y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
      v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    if (!std::isfinite(y) || std::abs(y) > opts.blowup) {
      throw NumericError("Duffing integration overflowed at sample " + std::to_string(k) +
                         " (excitation too large?)");
    }
    out[static_cast<Eigen::Index>(k)] = y;
  }
  return out;
}

}  // namespace

Eigen::VectorXd simulate_duffing(const DuffingParams& p, const Eigen::VectorXd& u, double dt,
                                 const Rk4Options& opts) {
  check_input(u, dt, opts.substeps);
  const Eigen::Index n = u.size();
  auto u_at = [&](double t) {
    const double s = t / dt;
    auto i = static_cast<Eigen::Index>(std::floor(s));
    if (i >= n - 1) return u[n - 1];
    if (i < 0) return u[0];
    const double w = s - static_cast<double>(i);
    return (1.0 - w) * u[i] + w * u[i + 1];
  };
  return duffing_rk4(p, u_at, dt, static_cast<std::size_t>(n), opts);
}

Eigen::VectorXd simulate_duffing(const DuffingParams& p, const std::function<double(double)>& u,
                                 double dt, std::size_t n, const Rk4Options& opts) {
  return duffing_rk4(p, u, dt, n, opts);
}

}  // namespace dnarx::bench
