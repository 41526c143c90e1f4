#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "test_util.hpp"
#include "xsense/alignment.hpp"

using namespace xsense;
using xsense::testing::error_code_of;
using xsense::testing::gaussian_matrix;
using xsense::testing::random_orthogonal;

namespace {

double loss(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  return (x * w.transpose() - y).squaredNorm();
}

double orthogonality_error(const Eigen::MatrixXd& w) {
  return (w.transpose() * w - Eigen::MatrixXd::Identity(w.cols(), w.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("least squares: identity and scaling") {
  std::mt19937_64 gen(1);
  const Eigen::MatrixXd x = gaussian_matrix(8, 8, gen);
  CHECK((fit_least_squares(x, x).map.matrix - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() <= 1e-8);
  const auto twice = fit_least_squares(x, 2.0 * x);
  CHECK((twice.map.matrix - 2.0 * Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(twice.rank == 8);
  CHECK(twice.map.kind == MapKind::LeastSquares);
}

TEST_CASE("least squares recovers a planted linear map") {
  std::mt19937_64 gen(2);
  const Eigen::MatrixXd x = gaussian_matrix(50, 8, gen);
  const Eigen::MatrixXd a = gaussian_matrix(5, 8, gen);
  const auto fit = fit_least_squares(x, x * a.transpose());
  CHECK((fit.map.matrix - a).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(fit.residual <= 1e-12);
}

TEST_CASE("least squares tolerates rank deficiency") {
  std::mt19937_64 gen(3);
  Eigen::MatrixXd x = gaussian_matrix(20, 4, gen);
  x.col(3) = x.col(0) + x.col(1);
  const Eigen::MatrixXd y = gaussian_matrix(20, 3, gen);
  const auto fit = fit_least_squares(x, y);
  CHECK(fit.rank == 3);
  CHECK(fit.map.matrix.allFinite());
  // The minimum-norm solution still attains the least-squares residual.
  Eigen::MatrixXd x3 = x.leftCols(3);
  const auto reduced = fit_least_squares(x3, y);
  CHECK(fit.residual == doctest::Approx(reduced.residual).epsilon(1e-9));
}

TEST_CASE("procrustes: trivial cases") {
  std::mt19937_64 gen(4);
  const Eigen::MatrixXd x = gaussian_matrix(30, 6, gen);
  CHECK((fit_procrustes(x, x).matrix - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-9);

  Eigen::MatrixXd one(1, 1), minus_three(1, 1);
  one << 1.0;
  minus_three << -3.0;
  const auto w = fit_procrustes(one, minus_three);
  CHECK(w.matrix(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(w.kind == MapKind::Isometric);
}

TEST_CASE("procrustes recovers a planted rotation") {
  std::mt19937_64 gen(5);
  const Eigen::MatrixXd r = random_orthogonal(16, gen);
  const Eigen::MatrixXd x = gaussian_matrix(200, 16, gen);
  const auto w = fit_procrustes(x, x * r.transpose());
  CHECK((w.matrix - r).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(orthogonality_error(w.matrix) <= 1e-6);
}

TEST_CASE("procrustes output is orthogonal for arbitrary data") {
  std::mt19937_64 gen(6);
  for (int t = 0; t < 40; ++t) {
    const auto n = static_cast<Eigen::Index>(1 + gen() % 30);
    const auto d = static_cast<Eigen::Index>(1 + gen() % 12);
    Eigen::MatrixXd x = gaussian_matrix(n, d, gen);
    Eigen::MatrixXd y = gaussian_matrix(n, d, gen);
    if (t % 5 == 0) x.setZero();
    CHECK(orthogonality_error(fit_procrustes(x, y).matrix) <= 1e-6);
  }
}

TEST_CASE("procrustes beats random orthogonal matrices (brute force oracle)") {
  std::mt19937_64 gen(7);
  for (int t = 0; t < 20; ++t) {
    const auto n = static_cast<Eigen::Index>(2 + gen() % 19);
    const auto d = static_cast<Eigen::Index>(1 + gen() % 4);
    const Eigen::MatrixXd x = gaussian_matrix(n, d, gen);
    const Eigen::MatrixXd y = gaussian_matrix(n, d, gen);
    const double best = loss(fit_procrustes(x, y).matrix, x, y);
    double oracle = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 1000; ++s) oracle = std::min(oracle, loss(random_orthogonal(d, gen), x, y));
    CHECK(best <= oracle + 1e-9);
    // Unconstrained least squares can only do better.
    CHECK(fit_least_squares(x, y).residual <= best + 1e-9);
  }
}

TEST_CASE("procrustes errors") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 2);
  Eigen::MatrixXd y3 = Eigen::MatrixXd::Ones(3, 3);
  Eigen::MatrixXd y4 = Eigen::MatrixXd::Ones(4, 2);
  CHECK(error_code_of([&] { fit_procrustes(x, y3); }) == ErrorCode::DimensionMismatch);
  CHECK(error_code_of([&] { fit_procrustes(x, y4); }) == ErrorCode::DimensionMismatch);
  Eigen::MatrixXd bad = x;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(error_code_of([&] { fit_procrustes(bad, x); }) == ErrorCode::NonFinite);
}

TEST_CASE("apply_map") {
  Eigen::MatrixXd x(2, 2);
  x << 1, 2, 3, 4;
  CHECK(apply_map(LinearMap::identity(2), x) == x);

  LinearMap zero;
  zero.kind = MapKind::LeastSquares;
  zero.matrix = Eigen::MatrixXd::Zero(3, 2);
  CHECK(apply_map(zero, x).isZero(0.0));
  CHECK(apply_map(zero, x).cols() == 3);

  LinearMap perm;
  perm.kind = MapKind::Isometric;
  perm.matrix.resize(2, 2);
  perm.matrix << 0, 1, 1, 0;
  Eigen::VectorXd v(2);
  v << 1, 2;
  const Eigen::VectorXd out = apply_map(perm, v);
  CHECK(out[0] == 2.0);
  CHECK(out[1] == 1.0);

  CHECK(error_code_of([&] { apply_map(perm, Eigen::MatrixXd::Ones(1, 3).eval()); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("retrieval: orthonormal rows under the identity map") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Identity(5, 5);
  const auto r = eval_retrieval(LinearMap::identity(5), x, x);
  CHECK(r.accuracy_at_1 == 1.0);
  CHECK(r.n == 5);
  CHECK(r.ties == 0);
}

TEST_CASE("retrieval: reversed rows") {
  // By hand on 3 orthonormal rows: query 0 -> y-row 2, query 1 -> y-row 1,
  // query 2 -> y-row 0. Reversal keeps the middle row in place, so only the
  // middle query is correct.
  Eigen::MatrixXd x(3, 3);
  x << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  const Eigen::MatrixXd y = x.colwise().reverse();
  CHECK(eval_retrieval(LinearMap::identity(3), x, y).accuracy_at_1 == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("retrieval: reversed rows, even count") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, 0.8, 0.6, 0.6, 0.8, 0, 1;
  const Eigen::MatrixXd y = x.colwise().reverse();
  CHECK(eval_retrieval(LinearMap::identity(2), x, y).accuracy_at_1 == 0.0);
}

TEST_CASE("retrieval: ties resolve to the lowest index and are counted") {
  Eigen::MatrixXd x(2, 2), y(2, 2);
  x << 1, 0, 1, 0;
  y << 1, 0, 1, 0;
  const auto r = eval_retrieval(LinearMap::identity(2), x, y);
  CHECK(r.ties == 2);
  CHECK(r.accuracy_at_1 == 0.5);
  CHECK(error_code_of([] { eval_retrieval(LinearMap::identity(2), Eigen::MatrixXd(0, 2), Eigen::MatrixXd(0, 2)); }) ==
        ErrorCode::EmptyTestSet);
}

TEST_CASE("retrieval after procrustes on a rotated cloud") {
  std::mt19937_64 gen(8);
  const Eigen::MatrixXd r = random_orthogonal(16, gen);
  const Eigen::MatrixXd x = gaussian_matrix(100, 16, gen);
  const Eigen::MatrixXd y = x * r.transpose() + 0.01 * gaussian_matrix(100, 16, gen);
  const auto w = fit_procrustes(x, y);
  CHECK(eval_retrieval(w, x, y).accuracy_at_1 == 1.0);
}

TEST_CASE("retrieval is invariant under a common orthogonal transform") {
  std::mt19937_64 gen(9);
  for (int t = 0; t < 10; ++t) {
    const Eigen::MatrixXd x = gaussian_matrix(30, 6, gen);
    const Eigen::MatrixXd y = x + 0.8 * gaussian_matrix(30, 6, gen);
    const Eigen::MatrixXd q = random_orthogonal(6, gen);
    const auto a = eval_retrieval(LinearMap::identity(6), x, y);
    const auto b = eval_retrieval(LinearMap::identity(6), x * q.transpose(), y * q.transpose());
    CHECK(a.accuracy_at_1 == b.accuracy_at_1);
  }
}

TEST_CASE("rcsls gradient matches finite differences") {
  std::mt19937_64 gen(10);
  const Eigen::MatrixXd xu = normalize_rows(gaussian_matrix(40, 5, gen));
  const Eigen::MatrixXd yu = normalize_rows(gaussian_matrix(40, 4, gen));
  const Eigen::MatrixXd w = 0.1 * gaussian_matrix(4, 5, gen);
  LinearMap init;
  init.matrix = w;
  // One accepted step of size eta moves W by eta * G before projection; with
  // singular values well below 1 the projection is inactive, so we can read G
  // back and compare against central differences.
  RcslsOptions opt;
  opt.neighbors = 3;
  opt.steps = 1;
  opt.step_size = 1e-6;
  const auto fit = fit_rcsls(xu, yu, init, opt);
  const Eigen::MatrixXd g = (fit.map.matrix - w) / 1e-6;
  const double h = 1e-7;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      Eigen::MatrixXd wp = w, wm = w;
      wp(i, j) += h;
      wm(i, j) -= h;
      const double fd = (rcsls_objective(wp, xu, yu, 3) - rcsls_objective(wm, xu, yu, 3)) / (2 * h);
      worst = std::max(worst, std::abs(fd - g(i, j)));
    }
  CHECK(worst <= 1e-4);
}

TEST_CASE("rcsls: identity is a fixed point on perfectly matched data") {
  std::mt19937_64 gen(11);
  const Eigen::MatrixXd x = gaussian_matrix(60, 8, gen);
  const auto xu = normalize_rows(x);
  // The objective at I dominates small perturbations of I.
  const double at_identity = rcsls_objective(Eigen::MatrixXd::Identity(8, 8), xu, xu, 10);
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(8, 8) + 0.05 * gaussian_matrix(8, 8, gen);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(p, Eigen::ComputeThinU | Eigen::ComputeThinV);
    p = svd.matrixU() * svd.singularValues().cwiseMin(1.0).asDiagonal() * svd.matrixV().transpose();
    CHECK(rcsls_objective(p, xu, xu, 10) <= at_identity + 1e-12);
  }
  const auto fit = fit_rcsls(x, x, LinearMap::identity(8));
  CHECK((fit.map.matrix - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("rcsls: zero steps returns the initial map") {
  std::mt19937_64 gen(12);
  const Eigen::MatrixXd x = gaussian_matrix(20, 4, gen);
  LinearMap init;
  init.matrix = gaussian_matrix(4, 4, gen);
  RcslsOptions opt;
  opt.steps = 0;
  CHECK(fit_rcsls(x, x, init, opt).map.matrix == init.matrix);
}

TEST_CASE("rcsls: objective non-decreasing and retrieval no worse than its init") {
  std::mt19937_64 gen(13);
  const Eigen::MatrixXd r = random_orthogonal(10, gen);
  const Eigen::MatrixXd x = gaussian_matrix(100, 10, gen);
  const Eigen::MatrixXd y = x * r.transpose() + 0.7 * gaussian_matrix(100, 10, gen);
  LinearMap init;
  init.kind = MapKind::LeastSquares;
  init.matrix = Eigen::MatrixXd::Identity(10, 10);
  const auto fit = fit_rcsls(x, y, init);
  REQUIRE(fit.objective.size() >= 2);
  for (std::size_t i = 1; i < fit.objective.size(); ++i) CHECK(fit.objective[i] >= fit.objective[i - 1]);
  CHECK(eval_retrieval(fit.map, x, y).accuracy_at_1 >= eval_retrieval(init, x, y).accuracy_at_1);

  const auto from_procrustes = fit_rcsls(x, y, fit_procrustes(x, y));
  CHECK(eval_retrieval(from_procrustes.map, x, y).accuracy_at_1 >=
        eval_retrieval(fit_procrustes(x, y), x, y).accuracy_at_1);

  LinearMap wrong;
  wrong.matrix = Eigen::MatrixXd::Identity(3, 3);
  CHECK(error_code_of([&] { fit_rcsls(x, y, wrong); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE(".map round trip") {
  xsense::testing::TempDir tmp;
  std::mt19937_64 gen(14);
  LinearMap m;
  m.kind = MapKind::Rcsls;
  m.matrix = gaussian_matrix(3, 5, gen);
  write_map(m, tmp / "m.map");
  CHECK(std::filesystem::file_size(tmp / "m.map") == 4 + 1 + 4 + 4 + 8 * 15);
  const auto back = read_map(tmp / "m.map");
  CHECK(back.kind == MapKind::Rcsls);
  CHECK(back.matrix == m.matrix);

  write_map(LinearMap::identity(4), tmp / "i.map");
  CHECK(read_map(tmp / "i.map").kind == MapKind::Identity);

  CHECK(parse_map_kind("procrustes") == MapKind::Isometric);
  CHECK(error_code_of([] { parse_map_kind("nonlinear"); }) == ErrorCode::InvalidArgument);
}
