#include <random>

#include <benchmark/benchmark.h>

#include "dnarx/cpd.hpp"
#include "dnarx/decoupler.hpp"
#include "dnarx/excitation.hpp"
#include "dnarx/narx.hpp"
#include "dnarx/poly.hpp"
#include "dnarx/systems.hpp"

using namespace dnarx;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd A(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) A(i, j) = nd(rng);
  }
  return A;
}

poly::CoupledPolynomial dense_cubic(int m) {
  const auto monos = poly::enumerate_monomials(m, 3);
  std::vector<poly::MonomialTerm> terms;
  const auto c = gaussian(static_cast<Eigen::Index>(monos.size()), 1, 3);
  for (std::size_t i = 0; i < monos.size(); ++i) terms.push_back({monos[i], c(static_cast<Eigen::Index>(i), 0)});
  return poly::CoupledPolynomial(m, 3, std::move(terms));
}

decouple::DecoupledModel random_decoupled(int m, int r, int M) {
  decouple::DecoupledModel d;
  d.cfg = narx::NarxConfig{m / 2, m - m / 2, 1, M};
  d.V = gaussian(m, r, 5);
  const auto c = gaussian(M, r, 6);
  for (int l = 0; l < r; ++l) {
    std::vector<double> coef(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) coef[static_cast<std::size_t>(j)] = c(j, l) / (1 << j);
    d.branches.emplace_back(coef);
  }
  d.normalize();
  return d;
}

narx::Dataset decoupled_record(const decouple::DecoupledModel& truth, std::size_t n) {
  narx::Dataset d;
  d.u = bench::gen_multisine(n, bench::harmonic_band(1, static_cast<int>(n / 8)), 0.5, false, 1);
  d.y = Eigen::VectorXd::Zero(d.u.size());
  const auto& cfg = truth.cfg;
  Eigen::VectorXd z(cfg.input_dim());
  for (Eigen::Index t = cfg.lag(); t < d.u.size(); ++t) {
    int k = 0;
    for (int i = 1; i <= cfg.n_y; ++i) z[k++] = d.y[t - i];
    for (int i = 0; i < cfg.n_u; ++i) z[k++] = d.u[t - cfg.n_k - i];
    d.y[t] = truth.evaluate(z);
  }
  return d;
}

}  // namespace

static void BM_PolyHessian(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto p = dense_cubic(m);
  const Eigen::VectorXd z = gaussian(m, 1, 2).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(p.hessian(z));
}
BENCHMARK(BM_PolyHessian)->Arg(6)->Arg(10);

static void BM_BuildHessianTensor(benchmark::State& state) {
  const int m = 10;
  const auto p = dense_cubic(m);
  const Eigen::MatrixXd Z = gaussian(state.range(0), m, 4);
  for (auto _ : state) benchmark::DoNotOptimize(decouple::build_hessian_tensor(p, Z));
}
BENCHMARK(BM_BuildHessianTensor)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_CpdAls(benchmark::State& state) {
  const cpd::CpdFactors f{gaussian(6, 4, 7), gaussian(512, 4, 8), std::nullopt};
  auto T = f.reconstruct();
  for (Eigen::Index k = 0; k < T.dim(2); ++k) {
    auto S = T.slice(k);
    const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
    S = sym;
  }
  T.mark_symmetric();
  cpd::AlsOptions o;
  o.restarts = 1;
  o.max_iter = 200;
  for (auto _ : state) benchmark::DoNotOptimize(cpd::cpd_als(T, 4, o));
}
BENCHMARK(BM_CpdAls)->Unit(benchmark::kMillisecond);

static void BM_CpdStructured(benchmark::State& state) {
  const auto truth = random_decoupled(6, 4, 3);
  const Eigen::MatrixXd Z = gaussian(512, 6, 9) * 0.5;
  const auto T = decouple::build_hessian_tensor(decouple::expand_decoupled(truth), Z);
  cpd::StructuredOptions o;
  o.als.restarts = 1;
  for (auto _ : state) benchmark::DoNotOptimize(cpd::cpd_structured(T, Z, 4, 3, o));
}
BENCHMARK(BM_CpdStructured)->Unit(benchmark::kMillisecond);

static void BM_Sls(benchmark::State& state) {
  const auto truth = random_decoupled(4, 2, 3);
  const auto d = decoupled_record(truth, 4000);
  const auto tab = narx::build_regressors(d, truth.cfg);
  const auto init = decouple::init_random(tab, truth.cfg, 2, 3, 1);
  decouple::SlsOptions o;
  o.max_iter = 50;
  for (auto _ : state) benchmark::DoNotOptimize(decouple::refine_sls(init.model, tab, o));
}
BENCHMARK(BM_Sls)->Unit(benchmark::kMillisecond);

static void BM_BoucWen(benchmark::State& state) {
  const auto u = bench::gen_multisine(8192, bench::harmonic_band(55, 1638), 50.0, false, 1);
  bench::NewmarkOptions o;
  o.substeps = 20;
  for (auto _ : state) benchmark::DoNotOptimize(bench::simulate_boucwen({}, u, 1.0 / 750.0, o));
}
BENCHMARK(BM_BoucWen)->Unit(benchmark::kMillisecond);

static void BM_Duffing(benchmark::State& state) {
  const auto u = bench::gen_multisine(8192, bench::harmonic_band(1, 2000), 1000.0, false, 1);
  bench::Rk4Options o;
  o.substeps = 20;
  for (auto _ : state) benchmark::DoNotOptimize(bench::simulate_duffing({}, u, 1.0 / 610.35, o));
}
BENCHMARK(BM_Duffing)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
