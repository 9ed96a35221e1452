#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dnarx/decoupler.hpp"
#include "dnarx/errors.hpp"
#include "synthetic.hpp"

using namespace dnarx;
using decouple::DecoupledModel;
using poly::UnivariatePoly;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double s = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, s);
  Eigen::MatrixXd A(r, c);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = nd(rng);
  return A;
}

DecoupledModel random_model(int m, int r, int M, std::uint64_t seed) {
  DecoupledModel d;
  d.cfg = narx::NarxConfig{m - m / 2, m / 2, 1, M};
  d.V = gaussian(m, r, seed);
  const Eigen::MatrixXd C = gaussian(M, r, seed + 1, 0.5);
  for (int l = 0; l < r; ++l) {
    d.branches.emplace_back(std::vector<double>(C.col(l).data(), C.col(l).data() + M));
  }
  d.c0 = 0.3;
  return d;
}

struct Clean {
  DecoupledModel truth;
  narx::Dataset data;
  narx::RegressorTable tab;
};

const Clean& clean() {
  static const Clean c = [] {
    Clean out;
    out.truth = dnarx::testing::synthetic_truth();
    dnarx::testing::SyntheticOptions o;
    o.n = 2000;
    out.data = dnarx::testing::synthetic_dataset(out.truth, o);
    out.tab = narx::build_regressors(out.data, out.truth.cfg);
    return out;
  }();
  return c;
}

}  // namespace

TEST(ParamCount, Formula) {
  EXPECT_EQ(decouple::count_dpnarx_params(6, 3, 4), 37u);
  EXPECT_EQ(decouple::count_dpnarx_params(30, 9, 5), 196u);
  EXPECT_EQ(decouple::count_dpnarx_params(1, 1, 1), 3u);
  EXPECT_THROW(decouple::count_dpnarx_params(0, 3, 1), DimensionError);
  EXPECT_EQ(random_model(6, 4, 3, 1).param_count(), 37u);
}

TEST(HessianTensor, HandExamples) {
  const poly::CoupledPolynomial p(2, 2, {{{1, 1}, 1.0}});
  const auto T = decouple::build_hessian_tensor(p, gaussian(5, 2, 1));
  EXPECT_TRUE(T.symmetric());
  for (Eigen::Index k = 0; k < 5; ++k) {
    EXPECT_EQ(T(0, 0, k), 0.0);
    EXPECT_EQ(T(0, 1, k), 1.0);
    EXPECT_EQ(T(1, 0, k), 1.0);
    EXPECT_EQ(T(1, 1, k), 0.0);
  }
  const poly::CoupledPolynomial lin(3, 1, {{{1, 0, 0}, 2.0}, {{0, 0, 1}, -1.0}, {{0, 0, 0}, 4.0}});
  EXPECT_EQ(decouple::build_hessian_tensor(lin, gaussian(7, 3, 2)).norm(), 0.0);
}

TEST(HessianTensor, MatchesDecoupledSecondDerivatives) {
  const auto m = random_model(5, 3, 4, 3);
  const auto p = decouple::expand_decoupled(m);
  const Eigen::MatrixXd Z = gaussian(40, 5, 4);
  const auto T = decouple::build_hessian_tensor(p, Z);
  for (Eigen::Index k = 0; k < Z.rows(); ++k) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(5, 5);
    for (Eigen::Index l = 0; l < 3; ++l) {
      const double x = Z.row(k).dot(m.V.col(l));
      H += m.branches[static_cast<std::size_t>(l)].eval(x, 2) * m.V.col(l) * m.V.col(l).transpose();
    }
    EXPECT_LT((Eigen::MatrixXd(T.slice(k)) - H).norm(), 1e-12 * std::max(1.0, H.norm()));
  }
}

TEST(ExpandDecoupled, HandExamples) {
  DecoupledModel a;
  a.cfg = {1, 1, 1, 2};
  a.V = Eigen::Vector2d(1, 0);
  a.branches = {UnivariatePoly({0.0, 1.0})};
  const auto pa = decouple::expand_decoupled(a);
  EXPECT_EQ(pa.coefficient_of({2, 0}), 1.0);
  EXPECT_EQ(pa.coefficient_of({1, 1}), 0.0);

  DecoupledModel b;
  b.cfg = {1, 1, 1, 1};
  b.V = Eigen::Matrix2d::Identity();
  b.branches = {UnivariatePoly({1.0}), UnivariatePoly({1.0})};
  const auto pb = decouple::expand_decoupled(b);
  EXPECT_EQ(pb.coefficient_of({1, 0}), 1.0);
  EXPECT_EQ(pb.coefficient_of({0, 1}), 1.0);
  EXPECT_EQ(pb.coefficient_of({0, 0}), 0.0);

  EXPECT_THROW(decouple::expand_decoupled(random_model(3, 1, 5, 1), 4), DimensionError);
}

TEST(ExpandDecoupled, PointwiseOracle) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto m = random_model(4, 3, 5, 10 + s);
    const auto p = decouple::expand_decoupled(m);
    const Eigen::MatrixXd Z = gaussian(100, 4, 20 + s);
    const Eigen::VectorXd a = p.eval_rows(Z);
    const Eigen::VectorXd b = m.evaluate_rows(Z);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff()), 1e-10);
  }
}

TEST(ExpandDecoupled, PredictionsAgreeWithRecoupledModel) {
  const auto& c = clean();
  const auto p = decouple::expand_decoupled(c.truth);
  const Eigen::VectorXd a = narx::predict_one_step(narx::as_nonlinearity(p), c.data, c.truth.cfg);
  const Eigen::VectorXd b = narx::predict_one_step(c.truth.as_nonlinearity(), c.data, c.truth.cfg);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(DecoupledModel, GaugeAndPermutationInvariance) {
  auto m = random_model(4, 3, 4, 30);
  const Eigen::MatrixXd Z = gaussian(50, 4, 31);
  const Eigen::VectorXd y0 = m.evaluate_rows(Z);

  // (a v, g(x / a)) leaves every output unchanged
  auto scaled = m;
  const double a = -2.5;
  scaled.V.col(1) *= a;
  auto& c = scaled.branches[1].mutable_coeffs();
  for (std::size_t j = 0; j < c.size(); ++j) c[j] /= std::pow(a, static_cast<double>(j + 1));
  EXPECT_LT((scaled.evaluate_rows(Z) - y0).cwiseAbs().maxCoeff(), 1e-12 * y0.cwiseAbs().maxCoeff());

  auto normalized = m;
  normalized.normalize();
  EXPECT_LT((normalized.evaluate_rows(Z) - y0).cwiseAbs().maxCoeff(), 1e-12 * y0.cwiseAbs().maxCoeff());
  for (Eigen::Index l = 0; l < 3; ++l) EXPECT_NEAR(normalized.V.col(l).norm(), 1.0, 1e-15);

  auto perm = m;
  perm.V.col(0).swap(perm.V.col(2));
  std::swap(perm.branches[0], perm.branches[2]);
  const Eigen::VectorXd yp = perm.evaluate_rows(Z);
  for (Eigen::Index k = 0; k < Z.rows(); ++k) EXPECT_NEAR(yp[k], y0[k], 1e-13 * std::abs(y0[k]) + 1e-15);
}

TEST(DecoupledModel, ValidateCatchesShapeErrors) {
  auto m = random_model(4, 2, 3, 40);
  EXPECT_NO_THROW(m.validate());
  m.branches.pop_back();
  EXPECT_THROW(m.validate(), DimensionError);
}

TEST(BranchCoefficients, NormalEquationsHold) {
  const auto& c = clean();
  const auto bs = decouple::solve_branch_coefficients(c.truth.V, c.tab.Z, c.tab.target, 3);
  const Eigen::MatrixXd X = decouple::branch_design(c.truth.V, c.tab.Z, 3);
  ASSERT_EQ(X.cols(), 1 + 2 * 3);
  const double sd = std::sqrt((c.tab.target.array() - c.tab.target.mean()).square().mean());
  EXPECT_LT((X.transpose() * bs.residual).cwiseAbs().maxCoeff(), 1e-8 * c.tab.rows() * sd);
  EXPECT_LT(bs.residual.norm(), 1e-9 * c.tab.target.norm());
  for (int l = 0; l < 2; ++l) {
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(bs.branches[static_cast<std::size_t>(l)].coeffs()[static_cast<std::size_t>(j)],
                  c.truth.branches[static_cast<std::size_t>(l)].coeffs()[static_cast<std::size_t>(j)],
                  1e-8);
    }
  }
}

TEST(BranchCoefficients, CollinearBranchesRankDeficient) {
  const auto& c = clean();
  Eigen::MatrixXd V(4, 2);
  V.col(0) = c.truth.V.col(0);
  V.col(1) = c.truth.V.col(0);
  EXPECT_THROW(decouple::solve_branch_coefficients(V, c.tab.Z, c.tab.target, 3), NumericError);
}

TEST(SeparatedJacobian, ExactFormMatchesFiniteDifferences) {
  const auto& c = clean();
  const narx::RegressorTable sub = c.tab.subsample(400);
  const Eigen::MatrixXd V = gaussian(4, 2, 50);
  Eigen::VectorXd y = sub.target;
  y += gaussian(y.size(), 1, 51, 0.05).col(0);
  const Eigen::MatrixXd J = decouple::separated_jacobian(V, sub.Z, y, 3, true);
  const double h = 1e-6;
  Eigen::MatrixXd fd(J.rows(), J.cols());
  for (Eigen::Index l = 0; l < 2; ++l) {
    for (Eigen::Index p = 0; p < 4; ++p) {
      Eigen::MatrixXd Vp = V, Vm = V;
      Vp(p, l) += h;
      Vm(p, l) -= h;
      fd.col(l * 4 + p) = (decouple::separated_residual(Vp, sub.Z, y, 3) -
                           decouple::separated_residual(Vm, sub.Z, y, 3)) / (2 * h);
    }
  }
  for (Eigen::Index k = 0; k < J.cols(); ++k) {
    EXPECT_LT((J.col(k) - fd.col(k)).norm() / fd.col(k).norm(), 1e-5) << "column " << k;
  }
}

TEST(SeparatedJacobian, FirstOrderFormExactAtZeroResidual) {
  const auto& c = clean();
  const narx::RegressorTable sub = c.tab.subsample(300);
  const Eigen::MatrixXd Jk = decouple::separated_jacobian(c.truth.V, sub.Z, sub.target, 3, false);
  const Eigen::MatrixXd Je = decouple::separated_jacobian(c.truth.V, sub.Z, sub.target, 3, true);
  EXPECT_LT((Jk - Je).norm() / Je.norm(), 1e-7);
}

TEST(SeparatedJacobian, CoefficientFixedJacobianMatchesFiniteDifferences) {
  const auto m = random_model(4, 2, 3, 60);
  const Eigen::MatrixXd Z = gaussian(30, 4, 61);
  const Eigen::MatrixXd J = decouple::coefficient_fixed_jacobian(m, Z);
  const double h = 1e-6;
  for (Eigen::Index l = 0; l < 2; ++l) {
    for (Eigen::Index p = 0; p < 4; ++p) {
      auto mp = m, mm = m;
      mp.V(p, l) += h;
      mm.V(p, l) -= h;
      const Eigen::VectorXd fd = (mp.evaluate_rows(Z) - mm.evaluate_rows(Z)) / (2 * h);
      EXPECT_LT((J.col(l * 4 + p) - fd).norm() / fd.norm(), 1e-6);
    }
  }
}

TEST(InitFromCpd, StructuredInitialModelPredictsCleanData) {
  const auto& c = clean();
  const auto p = decouple::expand_decoupled(c.truth);
  decouple::InitOptions o;
  o.seed = 1;
  o.als.seed = 1;
  const auto st = decouple::init_from_cpd(p, c.tab, c.truth.cfg, 2, 3, decouple::InitMode::cpd_structured, o);
  const auto un = decouple::init_from_cpd(p, c.tab, c.truth.cfg, 2, 3, decouple::InitMode::cpd, o);
  const auto fs = decouple::evaluate_fits(st.model.as_nonlinearity(), c.data, c.truth.cfg);
  const auto fu = decouple::evaluate_fits(un.model.as_nonlinearity(), c.data, c.truth.cfg);
  ASSERT_TRUE(fs.prediction && fu.prediction);
  EXPECT_GT(*fs.prediction, 99.9);
  EXPECT_LT(std::abs(*fs.prediction - *fu.prediction), 0.5);
  EXPECT_LT(dnarx::testing::max_column_angle_deg(c.truth.V, st.model.V), 1e-3);
}

TEST(InitFromCpd, LinearSingleBranchFollowsRegression) {
  narx::RegressorTable tab;
  tab.Z = gaussian(300, 3, 70);
  const Eigen::Vector3d w(0.5, -1.0, 2.0);
  tab.target = tab.Z * w;
  const narx::NarxConfig cfg{2, 1, 1, 1};
  const poly::CoupledPolynomial p(3, 1, {{{1, 0, 0}, 0.5}, {{0, 1, 0}, -1.0}, {{0, 0, 1}, 2.0}});
  decouple::InitOptions o;
  o.seed = 2;
  const auto res = decouple::init_from_cpd(p, tab, cfg, 1, 1, decouple::InitMode::cpd_structured, o);
  EXPECT_GT(std::abs(res.model.V.col(0).dot(w.normalized())), 1.0 - 1e-10);
  EXPECT_FALSE(res.notes.empty());
}

TEST(RefineSls, ExactInitIsFixedPoint) {
  const auto& c = clean();
  const auto res = decouple::refine_sls(c.truth, c.tab);
  EXPECT_LE(res.report.iterations, 2);
  EXPECT_LT(res.report.cost.back(), 1e-18 * c.tab.target.squaredNorm());
  EXPECT_TRUE(res.report.converged);
}

TEST(RefineSls, CostNonIncreasingAndRandomInitRecovers) {
  const auto& c = clean();
  const auto init = decouple::init_random(c.tab, c.truth.cfg, 2, 3, 5);
  decouple::SlsOptions o;
  o.max_iter = 300;
  const auto res = decouple::refine_sls(init.model, c.tab, o);
  for (std::size_t i = 1; i < res.report.cost.size(); ++i) {
    EXPECT_LE(res.report.cost[i], res.report.cost[i - 1]);
  }
  EXPECT_EQ(res.report.cost.size(), static_cast<std::size_t>(res.report.iterations) + 1);
  EXPECT_EQ(res.report.initializer, decouple::InitMode::random);
  EXPECT_GT(res.report.condition, 0.0);
}

TEST(RefineSls, CpdInitNoWorseThanBestRandom) {
  const auto& c = clean();
  const auto p = decouple::expand_decoupled(c.truth);
  decouple::InitOptions io;
  io.seed = 3;
  io.als.seed = 3;
  const auto init = decouple::init_from_cpd(p, c.tab, c.truth.cfg, 2, 3, decouple::InitMode::cpd_structured, io);
  const auto cpd = decouple::refine_sls(init.model, c.tab, {}, decouple::InitMode::cpd_structured);
  const auto rs = decouple::random_restarts(c.tab, c.truth.cfg, 2, 3, 10, 7, {}, 4);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : rs) {
    if (!r.failed) best = std::min(best, r.final_cost);
  }
  EXPECT_LE(cpd.report.cost.back(), best + 1e-9);
}

TEST(RandomRestarts, DeterministicAcrossThreadCounts) {
  const auto& c = clean();
  const auto sub = c.tab.subsample(500);
  decouple::SlsOptions o;
  o.max_iter = 50;
  const auto a = decouple::random_restarts(sub, c.truth.cfg, 2, 3, 4, 11, o, 1);
  const auto b = decouple::random_restarts(sub, c.truth.cfg, 2, 3, 4, 11, o, 4);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(a[i].iterations, b[i].iterations);
    EXPECT_EQ(a[i].final_cost, b[i].final_cost);
  }
}

TEST(Standardization, PolynomialRoundTrip) {
  const auto& c = clean();
  const auto st = decouple::make_standardization(c.data, c.truth.cfg, true);
  EXPECT_GT(st.su, 0.0);
  EXPECT_GT(st.sy, 0.0);
  const auto p = decouple::expand_decoupled(c.truth);
  const auto back = st.from_standard(st.to_standard(p));
  for (const auto& t : p.terms()) {
    EXPECT_NEAR(back.coefficient_of(t.exponents), t.coefficient, 1e-13 * std::max(1.0, std::abs(t.coefficient)));
  }
  // p_std(z / s) = p(z) / sy
  const auto ps = st.to_standard(p);
  const Eigen::VectorXd z = gaussian(4, 1, 80).col(0);
  EXPECT_NEAR(ps.eval(z.cwiseQuotient(st.zscale)), p.eval(z) / st.sy, 1e-12);
}

TEST(Algorithm1, SyntheticEndToEnd) {
  const auto& c = clean();
  decouple::Algorithm1Options o;
  o.selection = std::monostate{};
  o.init.seed = 1;
  o.init.als.seed = 1;
  const auto res = decouple::run_algorithm1(c.data, c.truth.cfg, o);
  ASSERT_TRUE(res.report.final_model.prediction);
  EXPECT_GT(*res.report.final_model.prediction, 99.9);
  EXPECT_EQ(res.report.decoupled_params, decouple::count_dpnarx_params(4, 3, 2));
  EXPECT_EQ(res.report.candidate_count, 35u);
  EXPECT_FALSE(res.report.sls.cost.empty());
  EXPECT_LT(dnarx::testing::max_column_angle_deg(c.truth.V, res.model.V), 1e-3);
}

TEST(Algorithm1, ErrorsCarryStage) {
  const auto& c = clean();
  decouple::Algorithm1Options o;
  o.r = 0;
  try {
    decouple::run_algorithm1(c.data, c.truth.cfg, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "input");
  }
  o.r = 2;
  o.init.structured.mem_budget_bytes = 16;
  try {
    decouple::run_algorithm1(c.data, c.truth.cfg, o);
    FAIL();
  } catch (const BudgetError& e) {
    EXPECT_EQ(e.stage(), "initialization");
  }
}

TEST(DemoJacobian, RotationReproducesStackedJacobian) {
  const auto& c = clean();
  const double a = 0.4;
  Eigen::Matrix2d R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  const auto rep = decouple::demo_jacobian_matrix_nonuniqueness(c.truth, c.tab.Z, R);
  EXPECT_LT(rep.reconstruction_error, 1e-10);
  EXPECT_GT(rep.factor_change, 0.1);
  EXPECT_EQ(rep.J.rows(), 4);
  EXPECT_EQ(rep.J.cols(), c.tab.rows());
}

TEST(PlotData, BranchCurveAndFir) {
  const auto& c = clean();
  const auto bc = decouple::branch_curve(c.truth, c.tab.Z, 0, 101);
  EXPECT_EQ(bc.x_normalized.size(), 101);
  EXPECT_DOUBLE_EQ(bc.x_normalized[0], -1.0);
  EXPECT_DOUBLE_EQ(bc.x_normalized[100], 1.0);
  EXPECT_NEAR(bc.g_nonlinear.cwiseAbs().maxCoeff(), 1.0, 1e-15);
  EXPECT_LT(bc.x_min, bc.x_max);

  const auto fr = decouple::fir_response(c.truth, 1, 100.0, 64);
  EXPECT_DOUBLE_EQ(fr.hz[63], 50.0);
  // at omega = 0 the magnitudes are the plain sums of the lag coefficients
  const auto v = c.truth.V.col(1);
  EXPECT_NEAR(fr.mag_y[0], std::abs(v[0] + v[1]), 1e-15);
  EXPECT_NEAR(fr.mag_u[0], std::abs(v[2] + v[3]), 1e-15);
  EXPECT_THROW(decouple::branch_curve(c.truth, c.tab.Z, 2), DimensionError);
}

TEST(InitMode, StringRoundTrip) {
  for (auto m : {decouple::InitMode::random, decouple::InitMode::cpd, decouple::InitMode::cpd_structured}) {
    EXPECT_EQ(decouple::init_mode_from_string(decouple::to_string(m)), m);
  }
  EXPECT_EQ(decouple::init_mode_from_string("structured"), decouple::InitMode::cpd_structured);
  EXPECT_EQ(decouple::init_mode_from_string("unstructured"), decouple::InitMode::cpd);
  EXPECT_THROW(decouple::init_mode_from_string("bogus"), ParseError);
}
