#include "dnarx/narx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dnarx/errors.hpp"

namespace dnarx::narx {

int NarxConfig::lag() const noexcept {
  const int input_lag = n_u > 0 ? n_k + n_u - 1 : 0;
  return std::max(n_y, input_lag);
}

void NarxConfig::validate() const {
  if (n_u < 0 || n_y < 0 || n_k < 0) {
    throw ParseError("NARX lags must be non-negative (n_u, n_y, n_k)");
  }
  if (n_u + n_y < 1) throw ParseError("NARX model needs n_u + n_y >= 1");
  if (degree < 1) throw ParseError("NARX polynomial degree must be >= 1");
}

std::vector<Segment> Dataset::effective_segments() const {
  if (segments.empty()) return {Segment{0, size()}};
  return segments;
}

void Dataset::validate() const {
  if (u.size() != y.size()) {
    throw DimensionError("dataset u and y lengths differ (" + std::to_string(u.size()) +
                         " vs " + std::to_string(y.size()) + ")");
  }
  if (!(sample_rate_hz > 0.0)) throw ParseError("dataset sample rate must be positive");
  std::size_t prev_end = 0;
  for (const auto& s : segments) {
    if (s.begin >= s.end || s.end > size() || s.begin < prev_end) {
      throw ParseError("dataset segments must be non-empty, sorted, disjoint and in range");
    }
    prev_end = s.end;
  }
}

Dataset Dataset::select_segments(const std::vector<std::size_t>& which) const {
  const auto segs = effective_segments();
  std::size_t total = 0;
  for (auto i : which) {
    if (i >= segs.size()) throw DimensionError("segment index out of range");
    total += segs[i].size();
  }
  Dataset out;
  out.sample_rate_hz = sample_rate_hz;
  out.u.resize(static_cast<Eigen::Index>(total));
  out.y.resize(static_cast<Eigen::Index>(total));
  std::size_t pos = 0;
  for (auto i : which) {
    const auto& s = segs[i];
    const auto n = static_cast<Eigen::Index>(s.size());
    out.u.segment(static_cast<Eigen::Index>(pos), n) = u.segment(static_cast<Eigen::Index>(s.begin), n);
    out.y.segment(static_cast<Eigen::Index>(pos), n) = y.segment(static_cast<Eigen::Index>(s.begin), n);
    out.segments.push_back({pos, pos + s.size()});
    pos += s.size();
  }
  return out;
}

std::vector<Segment> segments_from_zero_runs(const Eigen::VectorXd& u, std::size_t min_run,
                                             double tolerance) {
  if (min_run == 0) throw ParseError("separator run length must be >= 1");
  const std::size_t n = static_cast<std::size_t>(u.size());
  std::vector<Segment> out;
  std::size_t seg_start = 0;
  std::size_t i = 0;
  while (i < n) {
    if (std::abs(u[static_cast<Eigen::Index>(i)]) > tolerance) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && std::abs(u[static_cast<Eigen::Index>(j)]) <= tolerance) ++j;
    if (j - i >= min_run) {
      if (i > seg_start) out.push_back({seg_start, i});
      seg_start = j;
    }
    i = j;
  }
  if (n > seg_start) out.push_back({seg_start, n});
  return out;
}

RegressorTable RegressorTable::subsample(std::size_t max_rows) const {
  const auto n = static_cast<std::size_t>(rows());
  if (max_rows == 0 || n <= max_rows) return *this;
  const std::size_t stride = (n + max_rows - 1) / max_rows;
  RegressorTable out;
  const std::size_t count = (n + stride - 1) / stride;
  out.Z.resize(static_cast<Eigen::Index>(count), Z.cols());
  out.target.resize(static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) {
    const auto src = static_cast<Eigen::Index>(k * stride);
    out.Z.row(static_cast<Eigen::Index>(k)) = Z.row(src);
    out.target[static_cast<Eigen::Index>(k)] = target[src];
    out.origin_index.push_back(origin_index[static_cast<std::size_t>(src)]);
  }
  return out;
}

namespace {

// Fills z(t) from the given output history (which may be measured or
// simulated) and the measured input.
template <class YSource>
void fill_regressor(const NarxConfig& cfg, const Eigen::VectorXd& u, std::size_t t,
                    const YSource& ysrc, double* z) {
  int c = 0;
  for (int i = 1; i <= cfg.n_y; ++i) z[c++] = ysrc(t - static_cast<std::size_t>(i));
  for (int i = 0; i < cfg.n_u; ++i) {
    z[c++] = u[static_cast<Eigen::Index>(t - static_cast<std::size_t>(cfg.n_k + i))];
  }
}

std::size_t count_rows(const Dataset& d, const NarxConfig& cfg) {
  const auto lag = static_cast<std::size_t>(cfg.lag());
  std::size_t rows = 0;
  for (const auto& s : d.effective_segments()) {
    if (s.size() <= lag) {
      throw DimensionError("segment [" + std::to_string(s.begin) + ", " +
                           std::to_string(s.end) + ") is too short for lag " +
                           std::to_string(lag));
    }
    rows += s.size() - lag;
  }
  return rows;
}

}  // namespace

RegressorTable build_regressors(const Dataset& d, const NarxConfig& cfg) {
  cfg.validate();
  d.validate();
  const std::size_t rows = count_rows(d, cfg);
  if (rows == 0) throw DimensionError("dataset yields no regressor rows");
  const int m = cfg.input_dim();
  RegressorTable tab;
  tab.Z.resize(static_cast<Eigen::Index>(rows), m);
  tab.target.resize(static_cast<Eigen::Index>(rows));
  tab.origin_index.reserve(rows);
  const auto lag = static_cast<std::size_t>(cfg.lag());
  auto measured = [&](std::size_t t) { return d.y[static_cast<Eigen::Index>(t)]; };
  std::vector<double> z(static_cast<std::size_t>(m));
  Eigen::Index r = 0;
  for (const auto& s : d.effective_segments()) {
    for (std::size_t t = s.begin + lag; t < s.end; ++t, ++r) {
      fill_regressor(cfg, d.u, t, measured, z.data());
      for (int k = 0; k < m; ++k) tab.Z(r, k) = z[static_cast<std::size_t>(k)];
      tab.target[r] = d.y[static_cast<Eigen::Index>(t)];
      tab.origin_index.push_back(t);
    }
  }
  return tab;
}

Eigen::MatrixXd monomial_design(const Eigen::MatrixXd& Z,
                                const std::vector<poly::Exponents>& monomials) {
  const Eigen::Index N = Z.rows();
  const Eigen::Index m = Z.cols();
  int max_e = 0;
  for (const auto& e : monomials) {
    if (static_cast<Eigen::Index>(e.size()) != m) {
      throw DimensionError("monomial_design: exponent length != regressor width");
    }
    for (int v : e) max_e = std::max(max_e, v);
  }
  Eigen::MatrixXd X(N, static_cast<Eigen::Index>(monomials.size()));
  std::vector<Eigen::MatrixXd> powers(static_cast<std::size_t>(max_e) + 1);
  powers[0] = Eigen::MatrixXd::Ones(N, m);
  for (int e = 1; e <= max_e; ++e) {
    powers[static_cast<std::size_t>(e)] = powers[static_cast<std::size_t>(e - 1)].cwiseProduct(Z);
  }
  for (std::size_t j = 0; j < monomials.size(); ++j) {
    auto col = X.col(static_cast<Eigen::Index>(j));
    col.setOnes();
    for (Eigen::Index k = 0; k < m; ++k) {
      const int e = monomials[j][static_cast<std::size_t>(k)];
      if (e != 0) col.array() *= powers[static_cast<std::size_t>(e)].col(k).array();
    }
  }
  return X;
}

std::uint64_t count_pnarx_params(int m, int degree) {
  if (m < 1) throw DimensionError("count_pnarx_params: m must be >= 1");
  if (degree != 3) {
    throw DimensionError("count_pnarx_params: closed form only covers degree 3; "
                         "use count_pnarx_params_general");
  }
  const auto mm = static_cast<std::uint64_t>(m);
  return 1 + mm + mm * (mm + 1) / 2 + mm * (mm + 1) * (mm + 2) / 6;
}

std::uint64_t count_pnarx_params_general(int m, int degree) {
  if (m < 1 || degree < 0) throw DimensionError("count_pnarx_params_general: bad arguments");
  return poly::monomial_count(m, degree);
}

Nonlinearity as_nonlinearity(const poly::CoupledPolynomial& p) {
  return [p](const Eigen::Ref<const Eigen::VectorXd>& z) { return p.eval(z); };
}

Eigen::VectorXd predict_one_step(const Nonlinearity& model, const Dataset& d,
                                 const NarxConfig& cfg) {
  const RegressorTable tab = build_regressors(d, cfg);
  Eigen::VectorXd out(tab.rows());
  for (Eigen::Index r = 0; r < tab.rows(); ++r) out[r] = model(tab.Z.row(r).transpose());
  return out;
}

SimulationResult simulate_free_run(const Nonlinearity& model, const Dataset& d,
                                   const NarxConfig& cfg, const SimulationOptions& opts) {
  cfg.validate();
  d.validate();
  const std::size_t rows = count_rows(d, cfg);
  if (opts.y_init && opts.y_init->size() != cfg.n_y) {
    throw DimensionError("simulate_free_run: y_init must have n_y entries");
  }
  double ref = opts.reference_std;
  if (ref <= 0.0) {
    const double mean = d.y.mean();
    ref = std::sqrt((d.y.array() - mean).square().mean());
    if (!(ref > 0.0)) ref = 1.0;
  }
  const double limit = opts.blowup_factor * ref;

  SimulationResult res;
  res.y_hat.resize(static_cast<Eigen::Index>(rows));
  const auto lag = static_cast<std::size_t>(cfg.lag());
  const int m = cfg.input_dim();
  Eigen::VectorXd z(m);
  Eigen::VectorXd ysim = d.y;
  Eigen::Index r = 0;
  const auto segs = d.effective_segments();
  for (std::size_t si = 0; si < segs.size(); ++si) {
    const auto& s = segs[si];
    if (si == 0 && opts.y_init) {
      for (int i = 0; i < cfg.n_y; ++i) {
        ysim[static_cast<Eigen::Index>(s.begin + lag) - cfg.n_y + i] = (*opts.y_init)[i];
      }
    }
    auto simulated = [&](std::size_t t) { return ysim[static_cast<Eigen::Index>(t)]; };
    bool diverged = false;
    for (std::size_t t = s.begin + lag; t < s.end; ++t, ++r) {
      if (diverged) {
        res.y_hat[r] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      fill_regressor(cfg, d.u, t, simulated, z.data());
      const double yh = model(z);
      if (!std::isfinite(yh) || std::abs(yh) > limit) {
        diverged = true;
        res.unstable = true;
        res.unstable_segments.push_back(si);
        res.y_hat[r] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      ysim[static_cast<Eigen::Index>(t)] = yh;
      res.y_hat[r] = yh;
    }
  }
  return res;
}

}  // namespace dnarx::narx
