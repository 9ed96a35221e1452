#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace dnarx::bench {

/// Random-phase multisine: sum over harmonic lines k of cos(2 pi k n / N + phi_k)
/// with i.i.d. uniform phases, equal amplitudes, scaled to `rms_target`.
/// With `odd_only` every even line is dropped and the second half period is
/// built as the exact negative of the first, so even lines vanish exactly.
/// `oversample` evaluates the same continuous signal on a grid that is that
/// many times finer (N * oversample samples per period).
Eigen::VectorXd gen_multisine(std::size_t n_period, const std::vector<int>& harmonics,
                              double rms_target, bool odd_only, std::uint64_t seed,
                              int oversample = 1);

/// Lines lo..hi inclusive; convenient for band-limited excitations.
std::vector<int> harmonic_band(int lo, int hi);

/// `periods` exact copies of one period.
Eigen::VectorXd repeat_periods(const Eigen::VectorXd& one_period, int periods);

/// Linear sweep A sin(2 pi (f0 t + (f1 - f0) t^2 / (2 T))) sampled at fs.
Eigen::VectorXd gen_swept_sine(double f_start, double f_end, double duration_s,
                               double sample_rate_hz, double amplitude);

}  // namespace dnarx::bench
