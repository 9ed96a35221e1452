#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "dnarx/cpd.hpp"
#include "dnarx/decoupler.hpp"
#include "dnarx/errors.hpp"
#include "dnarx/linalg.hpp"
#include "dnarx/tensor3.hpp"
#include "synthetic.hpp"

using namespace dnarx;
using cpd::Tensor3;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double s = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, s);
  Eigen::MatrixXd A(r, c);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = nd(rng);
  return A;
}

Tensor3 from_factors(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W) {
  cpd::CpdFactors f{V, W, std::nullopt};
  return f.reconstruct();
}

struct StructuredCase {
  Eigen::MatrixXd V;
  cpd::StructuredW W;
  Eigen::MatrixXd Z;
  Tensor3 T;
};

StructuredCase decoupled_case(std::size_t N, std::uint64_t seed) {
  const auto truth = dnarx::testing::synthetic_truth();
  StructuredCase c;
  c.V = truth.V;
  c.W.coeffs.resize(2, 2);
  for (int l = 0; l < 2; ++l) {
    const auto cf = truth.branches[static_cast<std::size_t>(l)].coeffs();
    c.W.coeffs(0, l) = cf[1];
    c.W.coeffs(1, l) = cf[2];
  }
  c.Z = gaussian(static_cast<Eigen::Index>(N), 4, seed, 0.7);
  c.T = cpd::reconstruct_structured(c.V, c.W, c.Z);
  return c;
}

Tensor3 add_noise(const Tensor3& T, double rel, std::uint64_t seed) {
  const double n = static_cast<double>(T.data().size());
  const double sd = T.norm() / std::sqrt(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, rel * sd);
  Tensor3 out = T;
  for (Eigen::Index k = 0; k < T.dim(2); ++k) {
    for (Eigen::Index j = 0; j < T.dim(1); ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        const double e = nd(rng);
        out(i, j, k) += e;
        if (i != j) out(j, i, k) += e;
      }
    }
  }
  out.mark_symmetric();
  return out;
}

}  // namespace

TEST(Tensor3, LayoutAndSymmetry) {
  Tensor3 T(2, 3, 4);
  T(1, 2, 3) = 7.0;
  EXPECT_EQ(T.data()[1 + 2 * (2 + 3 * 3)], 7.0);
  EXPECT_EQ(T.slice(3)(1, 2), 7.0);
  EXPECT_THROW(T.mark_symmetric(), DimensionError);
  EXPECT_THROW(Tensor3(2, 2, 2, std::vector<double>(7), false), DimensionError);
  std::vector<double> asym(8, 0.0);
  asym[2] = 1.0;  // (0,1,0)
  EXPECT_THROW(Tensor3(2, 2, 2, asym, true), DimensionError);
}

TEST(StorageElements, TableValues) {
  EXPECT_EQ(cpd::jacobian_storage_elements(40960, 5, 30, 9), 6819840000ull);
  EXPECT_EQ(cpd::jacobian_storage_elements(40960, 10, 10, 8), 655360000ull);
  EXPECT_EQ(cpd::jacobian_storage_elements(1, 1, 1, 2), 1ull);
}

TEST(StorageElements, BudgetCheck) {
  EXPECT_NO_THROW(cpd::check_jacobian_budget(40960, 10, 10, 8, 8.0 * 655360000.0));
  try {
    cpd::check_jacobian_budget(40960, 5, 30, 9, 4.0 * 1024 * 1024 * 1024);
    FAIL() << "expected BudgetError";
  } catch (const BudgetError& e) {
    EXPECT_EQ(e.elements(), 6819840000ull);
    EXPECT_DOUBLE_EQ(e.bytes(), 8.0 * 6819840000.0);
  }
}

TEST(CpdAls, ExactRankReconstruction) {
  Eigen::MatrixXd V = gaussian(5, 2, 1);
  const Eigen::MatrixXd W = gaussian(50, 2, 2);
  const Tensor3 T = from_factors(V, W);
  cpd::AlsOptions o;
  o.seed = 3;
  const auto res = cpd::cpd_als(T, 2, o);
  EXPECT_LT(res.relative_error, 1e-8);
  EXPECT_LT(cpd::relative_error(T, res.factors), 1e-8);
}

TEST(CpdAls, RankOneCollinear) {
  Eigen::VectorXd v = gaussian(6, 1, 4).col(0).normalized();
  const Eigen::MatrixXd W = gaussian(30, 1, 5);
  const Tensor3 T = from_factors(v, W);
  cpd::AlsOptions o;
  o.seed = 6;
  const auto res = cpd::cpd_als(T, 1, o);
  EXPECT_GT(std::abs(res.factors.V.col(0).dot(v)), 1.0 - 1e-8);
}

TEST(CpdAls, ZeroTensor) {
  const Tensor3 T(4, 4, 10, true);
  cpd::AlsOptions o;
  o.seed = 1;
  const auto res = cpd::cpd_als(T, 2, o);
  EXPECT_EQ(res.relative_error, 0.0);
  EXPECT_TRUE(res.factors.W.isZero(0.0));
  for (Eigen::Index l = 0; l < 2; ++l) EXPECT_NEAR(res.factors.V.col(l).norm(), 1.0, 1e-14);
}

TEST(CpdAls, MonotoneHistoryWithinRestart) {
  const auto c = decoupled_case(200, 7);
  const Tensor3 T = add_noise(c.T, 0.05, 8);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    cpd::AlsOptions o;
    o.seed = seed;
    o.restarts = 1;
    o.max_iter = 300;
    const auto res = cpd::cpd_als(T, 3, o);
    ASSERT_GT(res.history.size(), 1u);
    for (std::size_t i = 1; i < res.history.size(); ++i) {
      EXPECT_LE(res.history[i], res.history[i - 1] + 1e-15) << "iteration " << i;
    }
  }
}

TEST(CpdAls, SharedModesAreIdentical) {
  const auto c = decoupled_case(100, 9);
  cpd::AlsOptions o;
  o.seed = 1;
  const auto res = cpd::cpd_als(c.T, 2, o);
  EXPECT_TRUE(res.factors.shared_modes());
  EXPECT_EQ(&res.factors.mode2(), &res.factors.V);
  EXPECT_LT(res.relative_error, 1e-8);
  EXPECT_LT(dnarx::testing::max_column_angle_deg(c.V, res.factors.V), 1e-4);
}

TEST(CpdAls, UnsharedModesFlag) {
  const auto c = decoupled_case(80, 10);
  cpd::AlsOptions o;
  o.seed = 2;
  o.shared_modes = false;
  const auto res = cpd::cpd_als(c.T, 2, o);
  EXPECT_FALSE(res.factors.shared_modes());
  EXPECT_LT(res.relative_error, 1e-6);
}

TEST(CpdAls, RejectsNaN) {
  Tensor3 T(2, 2, 2);
  T(0, 0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(cpd::cpd_als(T, 1), NumericError);
}

TEST(CpdFactors, NormalizeIdempotentBitwise) {
  cpd::CpdFactors f{gaussian(5, 3, 11), gaussian(20, 3, 12), std::nullopt};
  f.normalize();
  const auto once = f;
  f.normalize();
  EXPECT_TRUE(f.V == once.V);
  EXPECT_TRUE(f.W == once.W);
  for (Eigen::Index l = 0; l < 3; ++l) {
    EXPECT_NEAR(f.V.col(l).norm(), 1.0, 1e-15);
    Eigen::Index i;
    f.V.col(l).cwiseAbs().maxCoeff(&i);
    EXPECT_GT(f.V(i, l), 0.0);
  }
}

TEST(CpdFactors, NormalizePreservesTensor) {
  cpd::CpdFactors f{gaussian(4, 2, 13), gaussian(10, 2, 14), std::nullopt};
  const Tensor3 before = f.reconstruct();
  f.normalize();
  const Tensor3 after = f.reconstruct();
  double diff = 0.0;
  for (std::size_t i = 0; i < before.data().size(); ++i) {
    diff = std::max(diff, std::abs(before.data()[i] - after.data()[i]));
  }
  EXPECT_LT(diff, 1e-12 * before.norm());
}

TEST(StructuredW, EvaluateMatchesDefinition) {
  const auto c = decoupled_case(20, 15);
  const Eigen::MatrixXd Wk = c.W.evaluate(c.Z, c.V);
  const Eigen::MatrixXd X = c.Z * c.V;
  for (Eigen::Index k = 0; k < 20; ++k) {
    for (Eigen::Index l = 0; l < 2; ++l) {
      const double want = 2 * c.W.coeffs(0, l) + 6 * c.W.coeffs(1, l) * X(k, l);
      EXPECT_NEAR(Wk(k, l), want, 1e-14);
    }
  }
}

TEST(StructuredW, ReconstructionLinearInCoefficients) {
  const auto c = decoupled_case(30, 16);
  cpd::StructuredW twice = c.W;
  twice.coeffs *= 2.0;
  const Tensor3 T2 = cpd::reconstruct_structured(c.V, twice, c.Z);
  for (std::size_t i = 0; i < T2.data().size(); ++i) EXPECT_EQ(T2.data()[i], 2.0 * c.T.data()[i]);
}

TEST(StructuredJacobian, MatchesFiniteDifferences) {
  const Eigen::Index m = 4, r = 2;
  const int M = 4;
  const Eigen::MatrixXd V = gaussian(m, r, 17);
  cpd::StructuredW W;
  W.coeffs = gaussian(M - 1, r, 18);
  const Eigen::VectorXd z = gaussian(m, 1, 19).col(0);
  const Eigen::MatrixXd J = cpd::structured_jacobian_slice(V, W, z);
  ASSERT_EQ(J.rows(), m * m);
  ASSERT_EQ(J.cols(), m * r + (M - 1) * r);
  const Eigen::MatrixXd Z = z.transpose();
  auto slice = [&](const Eigen::MatrixXd& Vp, const cpd::StructuredW& Wp) {
    const Tensor3 T = cpd::reconstruct_structured(Vp, Wp, Z);
    return Eigen::Map<const Eigen::VectorXd>(T.data().data(), m * m).eval();
  };
  const double h = 1e-6;
  Eigen::MatrixXd fd(m * m, J.cols());
  for (Eigen::Index l = 0; l < r; ++l) {
    for (Eigen::Index p = 0; p < m; ++p) {
      Eigen::MatrixXd Vp = V, Vm = V;
      Vp(p, l) += h;
      Vm(p, l) -= h;
      fd.col(l * m + p) = (slice(Vp, W) - slice(Vm, W)) / (2 * h);
    }
    for (int a = 0; a < M - 1; ++a) {
      cpd::StructuredW Wp = W, Wm = W;
      Wp.coeffs(a, l) += h;
      Wm.coeffs(a, l) -= h;
      fd.col(m * r + l * (M - 1) + a) = (slice(V, Wp) - slice(V, Wm)) / (2 * h);
    }
  }
  EXPECT_LT((J - fd).norm() / J.norm(), 1e-6);
  for (Eigen::Index c = 0; c < J.cols(); ++c) {
    EXPECT_LT((J.col(c) - fd.col(c)).norm(), 1e-6 * std::max(1.0, J.col(c).norm())) << "column " << c;
  }
}

TEST(CpdStructured, RecoversExactDecoupledFactors) {
  const auto c = decoupled_case(300, 20);
  cpd::StructuredOptions o;
  o.als.seed = 21;
  const auto res = cpd::cpd_structured(c.T, c.Z, 2, 3, o);
  EXPECT_LT(res.relative_error, 1e-8);
  EXPECT_LT(dnarx::testing::max_column_angle_deg(c.V, res.V) * std::numbers::pi / 180.0, 1e-4);
  for (std::size_t i = 1; i < res.history.size(); ++i) EXPECT_LE(res.history[i], res.history[i - 1]);
}

TEST(CpdStructured, ConstraintCostsFitVersusAls) {
  const auto c = decoupled_case(300, 22);
  const Tensor3 T = add_noise(c.T, 0.01, 23);
  cpd::AlsOptions ao;
  ao.seed = 24;
  ao.restarts = 8;
  const auto als = cpd::cpd_als(T, 2, ao);
  cpd::StructuredOptions so;
  so.als = ao;
  const auto st = cpd::cpd_structured(T, c.Z, 2, 3, so);
  EXPECT_GE(st.relative_error, als.relative_error - 1e-10);
  EXPECT_LT(dnarx::testing::max_column_angle_deg(c.V, st.V), 1.0);
}

TEST(CpdStructured, ZeroTensorAndBudget) {
  const Eigen::MatrixXd Z = gaussian(50, 3, 25);
  const Tensor3 T(3, 3, 50, true);
  const auto res = cpd::cpd_structured(T, Z, 2, 3);
  EXPECT_TRUE(res.W.coeffs.isZero(0.0));
  EXPECT_EQ(res.relative_error, 0.0);

  cpd::StructuredOptions tiny;
  tiny.mem_budget_bytes = 1024;
  const auto c = decoupled_case(100, 26);
  EXPECT_THROW(cpd::cpd_structured(c.T, c.Z, 2, 3, tiny), BudgetError);
}

TEST(CpdStructured, RequiresSymmetricTensorAndMatchingZ) {
  const auto c = decoupled_case(40, 27);
  Tensor3 asym(4, 4, 40);
  EXPECT_THROW(cpd::cpd_structured(asym, c.Z, 2, 3), DimensionError);
  EXPECT_THROW(cpd::cpd_structured(c.T, c.Z.topRows(10), 2, 3), DimensionError);
}

TEST(FactorAmbiguity, RotationIdentityRandom) {
  const Eigen::MatrixXd V = gaussian(4, 2, 28);
  const Eigen::MatrixXd W = gaussian(100, 2, 29);
  const double a = 0.7;
  Eigen::Matrix2d R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  const auto rot = cpd::jacobian_factor_ambiguity(V, W, R);
  EXPECT_LT(rot.reconstruction_error, 1e-10);
  EXPECT_GT(rot.factor_change, 0.1);

  const auto id = cpd::jacobian_factor_ambiguity(V, W, Eigen::Matrix2d::Identity());
  EXPECT_TRUE(id.V_alt == V);
  EXPECT_EQ(id.factor_change, 0.0);

  Eigen::MatrixXd T = gaussian(2, 2, 30);
  ASSERT_LT(linalg::condition_number(T), 1e3);
  const auto rnd = cpd::jacobian_factor_ambiguity(V, W, T);
  EXPECT_LT(rnd.reconstruction_error, 1e-9);
}
