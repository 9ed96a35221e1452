#include <algorithm>
#include <limits>

#include "dnarx/errors.hpp"
#include "dnarx/linalg.hpp"
#include "dnarx/narx.hpp"

namespace dnarx::narx {

namespace {

// Candidates whose orthogonalized energy drops below this fraction of their
// original energy are linearly dependent on the selected set.
constexpr double kDependenceTol = 1e-10;

struct Selection {
  std::vector<std::size_t> order;
  std::vector<double> err;
};

Selection frols_select(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Frols& opts) {
  const Eigen::Index P = X.cols();
  const std::size_t max_terms =
      opts.max_terms == 0 ? static_cast<std::size_t>(P)
                          : std::min<std::size_t>(opts.max_terms, static_cast<std::size_t>(P));
  const double sigma = y.squaredNorm();
  if (!(sigma > 0.0)) throw NumericError("FROLS: target is identically zero; no term passes threshold");

  Eigen::MatrixXd W = X;
  const Eigen::VectorXd energy0 = X.colwise().squaredNorm().transpose();
  std::vector<bool> taken(static_cast<std::size_t>(P), false);
  Selection sel;
  double cumulative = 0.0;
  while (sel.order.size() < max_terms) {
    Eigen::Index best = -1;
    double best_err = -1.0;
    for (Eigen::Index j = 0; j < P; ++j) {
      if (taken[static_cast<std::size_t>(j)]) continue;
      const double ww = W.col(j).squaredNorm();
      if (!(ww > kDependenceTol * energy0[j])) continue;
      const double wy = W.col(j).dot(y);
      const double err = wy * wy / (ww * sigma);
      if (err > best_err) {
        best_err = err;
        best = j;
      }
    }
    if (best < 0) break;
    taken[static_cast<std::size_t>(best)] = true;
    sel.order.push_back(static_cast<std::size_t>(best));
    sel.err.push_back(best_err);
    cumulative += best_err;

    const Eigen::VectorXd q = W.col(best);
    const double qq = q.squaredNorm();
    for (Eigen::Index j = 0; j < P; ++j) {
      if (taken[static_cast<std::size_t>(j)]) continue;
      W.col(j) -= (q.dot(W.col(j)) / qq) * q;
    }
    if (cumulative >= 1.0 - opts.err_threshold) break;
  }
  if (sel.order.empty()) throw NumericError("FROLS: no candidate term passes the threshold");
  return sel;
}

}  // namespace

FitResult fit_full_pnarx(const RegressorTable& tab, const NarxConfig& cfg,
                         const SelectionPolicy& selection) {
  cfg.validate();
  if (tab.Z.cols() != cfg.input_dim()) {
    throw DimensionError("regressor table width does not match NARX config");
  }
  const auto candidates = poly::enumerate_monomials(cfg.input_dim(), cfg.degree);
  const Eigen::MatrixXd X = monomial_design(tab.Z, candidates);

  FitResult out;
  out.candidate_count = candidates.size();
  std::vector<std::size_t> keep;
  if (const auto* frols = std::get_if<Frols>(&selection)) {
    auto sel = frols_select(X, tab.target, *frols);
    out.selection_order = sel.order;
    out.err = std::move(sel.err);
    keep = sel.order;
    std::sort(keep.begin(), keep.end());
  } else {
    keep.resize(candidates.size());
    for (std::size_t j = 0; j < keep.size(); ++j) keep[j] = j;
  }
  if (static_cast<std::size_t>(tab.rows()) <= keep.size()) {
    throw NumericError("P-NARX fit needs more rows (" + std::to_string(tab.rows()) +
                       ") than retained terms (" + std::to_string(keep.size()) + ")");
  }

  Eigen::MatrixXd Xs(X.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    Xs.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(keep[j]));
  }
  const auto ls = linalg::lstsq(Xs, tab.target);
  std::vector<poly::MonomialTerm> terms;
  terms.reserve(keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    terms.push_back({candidates[keep[j]], ls.coef[static_cast<Eigen::Index>(j)]});
  }
  out.model = poly::CoupledPolynomial(cfg.input_dim(), cfg.degree, std::move(terms));
  out.residual = ls.residual;
  out.condition = ls.condition;
  return out;
}

}  // namespace dnarx::narx
