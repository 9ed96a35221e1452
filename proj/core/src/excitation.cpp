#include "dnarx/excitation.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "dnarx/errors.hpp"

namespace dnarx::bench {

Eigen::VectorXd gen_multisine(std::size_t n_period, const std::vector<int>& harmonics,
                              double rms_target, bool odd_only, std::uint64_t seed,
                              int oversample) {
  if (n_period < 2) throw ParseError("multisine period must be >= 2 samples");
  if (oversample < 1) throw ParseError("oversample must be >= 1");
  std::vector<int> lines;
  for (int k : harmonics) {
    if (k < 1 || 2 * static_cast<std::size_t>(k) >= n_period) {
      throw ParseError("harmonic " + std::to_string(k) + " outside (0, Nyquist)");
    }
    if (odd_only && k % 2 == 0) continue;
    lines.push_back(k);
  }
  if (lines.empty()) throw ParseError("multisine needs at least one harmonic line");
  if (odd_only && n_period % 2 != 0) throw ParseError("odd multisine needs an even period");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> phi(lines.size());
  for (auto& p : phi) p = phase(rng);

  const auto n = static_cast<Eigen::Index>(n_period) * oversample;
  Eigen::VectorXd u(n);
  const Eigen::Index computed = odd_only ? n / 2 : n;
  for (Eigen::Index t = 0; t < computed; ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      // k t / n reduced modulo 1 keeps the argument small and exactly periodic
      const auto num = (static_cast<std::int64_t>(lines[i]) * t) % n;
      s += std::cos(2.0 * std::numbers::pi * static_cast<double>(num) / static_cast<double>(n) +
                    phi[i]);
    }
    u[t] = s;
  }
  if (odd_only) u.tail(n - computed) = -u.head(computed);
  if (rms_target > 0.0) {
    const double rms = std::sqrt(u.squaredNorm() / static_cast<double>(n));
    u *= rms_target / rms;
  }
  return u;
}

std::vector<int> harmonic_band(int lo, int hi) {
  std::vector<int> out;
  for (int k = lo; k <= hi; ++k) out.push_back(k);
  return out;
}

Eigen::VectorXd repeat_periods(const Eigen::VectorXd& one_period, int periods) {
  if (periods < 1) throw ParseError("periods must be >= 1");
  Eigen::VectorXd out(one_period.size() * periods);
  for (int p = 0; p < periods; ++p) out.segment(p * one_period.size(), one_period.size()) = one_period;
  return out;
}

Eigen::VectorXd gen_swept_sine(double f_start, double f_end, double duration_s,
                               double sample_rate_hz, double amplitude) {
  if (!(duration_s > 0.0) || !(sample_rate_hz > 0.0)) {
    throw ParseError("swept sine needs positive duration and sample rate");
  }
  if (f_start < 0.0 || f_end < 0.0 || std::max(f_start, f_end) > 0.5 * sample_rate_hz) {
    throw ParseError("swept sine frequencies must lie in [0, Nyquist]");
  }
  const auto n = static_cast<Eigen::Index>(std::llround(duration_s * sample_rate_hz));
  Eigen::VectorXd u(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / sample_rate_hz;
    u[k] = amplitude * std::sin(2.0 * std::numbers::pi *
                                (f_start * t + (f_end - f_start) * t * t / (2.0 * duration_s)));
  }
  return u;
}

}  // namespace dnarx::bench
