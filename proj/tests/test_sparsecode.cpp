#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lasso_oracles.hpp"
#include "test_util.hpp"
#include "xsense/sparsecode.hpp"

using namespace xsense;
using xsense::testing::error_code_of;
using xsense::testing::gaussian_matrix;

namespace {

Dictionary make_dict(Eigen::MatrixXd atoms, double lambda = 0.05) {
  Dictionary d;
  d.atoms = std::move(atoms);
  d.lambda = lambda;
  return d;
}

Eigen::MatrixXd unit_columns(Eigen::MatrixXd m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) m.col(j).normalize();
  return m;
}

// Random instance whose exact optimum lies inside the [0, 2]^k grid box.
struct Instance {
  Dictionary dict;
  Eigen::VectorXd y;
};

Instance random_instance(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> dim(1, 3);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  while (true) {
    const int d = dim(gen), k = dim(gen);
    Eigen::MatrixXd atoms = gaussian_matrix(d, k, gen);
    for (Eigen::Index j = 0; j < k; ++j) atoms.col(j) *= std::uniform_real_distribution<double>(0.3, 1.0)(gen) /
                                                         atoms.col(j).norm();
    Eigen::VectorXd y(d);
    for (auto& v : y) v = unif(gen);
    const auto exact = xsense::testing::support_enumeration(atoms, 0.05, y);
    if (exact.maxCoeff() < 1.9) return {make_dict(atoms), y};
  }
}

}  // namespace

TEST_CASE("lasso: single unit atom closed form") {
  Eigen::MatrixXd atoms(1, 1);
  atoms << 1.0;
  Eigen::VectorXd y(1);
  y << 0.5;
  const auto code = lasso_nn(y, make_dict(atoms));
  REQUIRE(code.nnz() == 1);
  CHECK(code.values[0] == doctest::Approx(0.45).epsilon(1e-12));
}

TEST_CASE("lasso: zero input gives the empty code") {
  const auto code = lasso_nn(Eigen::VectorXd::Zero(3), make_dict(Eigen::MatrixXd::Identity(3, 4)));
  CHECK(code.empty());
  CHECK(code.k == 4);
}

TEST_CASE("lasso: nonnegativity blocks the negative direction") {
  Eigen::VectorXd y(2);
  y << 0.3, -0.2;
  const auto a = lasso_nn(y, make_dict(Eigen::MatrixXd::Identity(2, 2))).dense();
  CHECK(a[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(a[1] == 0.0);
}

TEST_CASE("lasso: dimension mismatch") {
  CHECK(error_code_of([] { lasso_nn(Eigen::VectorXd::Ones(2), make_dict(Eigen::MatrixXd::Identity(3, 3))); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("lasso: KKT conditions and objective bound on random instances") {
  std::mt19937_64 gen(21);
  for (int t = 0; t < 300; ++t) {
    const auto d = static_cast<Eigen::Index>(2 + gen() % 10);
    const auto k = static_cast<Eigen::Index>(1 + gen() % 16);
    const auto dict = make_dict(unit_columns(gaussian_matrix(d, k, gen)), 0.05 + 0.1 * (gen() % 3));
    const Eigen::VectorXd y = gaussian_matrix(d, 1, gen).col(0);
    const Eigen::VectorXd a = lasso_nn(y, dict).dense();
    const Eigen::VectorXd corr = dict.atoms.transpose() * (y - dict.atoms * a);
    for (Eigen::Index j = 0; j < k; ++j) {
      if (a[j] > 0.0)
        CHECK(std::abs(corr[j] - dict.lambda) <= 1e-5);
      else
        CHECK(corr[j] <= dict.lambda + 1e-5);
    }
    CHECK(lasso_objective(y, dict, a) <= 0.5 * y.squaredNorm() + 1e-15);
  }
}

TEST_CASE("lasso: agrees with the grid-search and support-enumeration oracles") {
  std::mt19937_64 gen(22);
  for (int t = 0; t < 40; ++t) {
    const auto inst = random_instance(gen);
    const Eigen::VectorXd a = lasso_nn(inst.y, inst.dict).dense();
    const double obj = lasso_objective(inst.y, inst.dict, a);
    const double grid = xsense::testing::grid_search_minimum(inst.dict.atoms, inst.dict.lambda, inst.y);
    CHECK(std::abs(obj - grid) <= 1e-4);
    CHECK(obj <= grid + 1e-9);
    const auto exact = xsense::testing::support_enumeration(inst.dict.atoms, inst.dict.lambda, inst.y);
    CHECK(obj <= lasso_objective(inst.y, inst.dict, exact) + 1e-10);
  }
}

TEST_CASE("lasso: warm start converges to the same solution") {
  std::mt19937_64 gen(23);
  const auto dict = make_dict(unit_columns(gaussian_matrix(8, 12, gen)));
  const Eigen::VectorXd y = gaussian_matrix(8, 1, gen).col(0);
  const LassoSolver solver(dict);
  const Eigen::VectorXd cold = solver.solve(y);
  const Eigen::VectorXd warm = solver.solve(y, Eigen::VectorXd::Constant(12, 0.5));
  CHECK((cold - warm).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("dictionary: single direction is recovered") {
  Eigen::VectorXd v(4);
  v << 1, 2, -1, 0.5;
  v.normalize();
  Eigen::MatrixXd data(3, 4);
  for (int i = 0; i < 3; ++i) data.row(i) = v.transpose();
  DictionaryOptions opt;
  opt.k = 1;
  opt.epochs = 5;
  const auto dict = learn_dictionary(data, opt);
  const double cos = dict.atoms.col(0).dot(v) / dict.atoms.col(0).norm();
  CHECK(std::acos(std::min(1.0, cos)) <= 1e-3);
}

TEST_CASE("dictionary: zero epochs returns the seeded initialisation") {
  std::mt19937_64 gen(24);
  const Eigen::MatrixXd data = gaussian_matrix(30, 6, gen);
  DictionaryOptions opt;
  opt.k = 10;
  opt.epochs = 0;
  opt.seed = 5;
  const auto a = learn_dictionary(data, opt);
  const auto b = learn_dictionary(data, opt);
  CHECK(a.atoms == b.atoms);
  for (Eigen::Index j = 0; j < a.k(); ++j) CHECK(a.atoms.col(j).norm() <= 1.0 + 1e-12);
  // k larger than the sample count pads with random unit atoms
  opt.k = 40;
  const auto c = learn_dictionary(data, opt);
  CHECK(c.k() == 40);
  CHECK_NOTHROW(check_dictionary(c));
}

TEST_CASE("dictionary: hyperparameter validation") {
  const Eigen::MatrixXd data = Eigen::MatrixXd::Ones(4, 2);
  DictionaryOptions opt;
  opt.k = 0;
  CHECK(error_code_of([&] { learn_dictionary(data, opt); }) == ErrorCode::InvalidHyperparameter);
  opt.k = 2;
  opt.lambda = 0.0;
  CHECK(error_code_of([&] { learn_dictionary(data, opt); }) == ErrorCode::InvalidHyperparameter);
  opt.lambda = 0.05;
  opt.batch_rounds = 0;
  CHECK(error_code_of([&] { learn_dictionary(data, opt); }) == ErrorCode::InvalidHyperparameter);
}

TEST_CASE("dictionary: planted atoms, monotone objective, determinism") {
  std::mt19937_64 gen(25);
  const Eigen::Index d = 16, k = 8, n = 500;
  const Eigen::MatrixXd planted = unit_columns(gaussian_matrix(d, k, gen));
  Eigen::MatrixXd data(n, d);
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto a = static_cast<Eigen::Index>(gen() % k);
    auto b = static_cast<Eigen::Index>(gen() % (k - 1));
    if (b >= a) ++b;
    data.row(i) = (mag(gen) * planted.col(a) + mag(gen) * planted.col(b)).transpose();
  }
  DictionaryOptions opt;
  opt.k = 8;
  opt.epochs = 10;
  opt.seed = 3;
  DictionaryTrace trace;
  const auto dict = learn_dictionary(data, opt, &trace);
  REQUIRE(trace.objective.size() == 11);
  for (std::size_t e = 1; e < trace.objective.size(); ++e)
    CHECK(trace.objective[e] <= trace.objective[e - 1] + 1e-6 * n);
  CHECK_NOTHROW(check_dictionary(dict));

  int matched = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    double best = -1.0;
    for (Eigen::Index l = 0; l < dict.k(); ++l)
      best = std::max(best, planted.col(j).dot(dict.atoms.col(l)) / dict.atoms.col(l).norm());
    if (best >= 0.95) ++matched;
  }
  CHECK(matched >= 7);

  const auto again = learn_dictionary(data, opt);
  CHECK(again.atoms == dict.atoms);
}

TEST_CASE("dictionary: planted atoms across many instances") {
  for (std::uint64_t seed = 200; seed < 220; ++seed) {
    std::mt19937_64 gen(seed);
    const Eigen::Index d = 16, k = 8, n = 500;
    const Eigen::MatrixXd planted = unit_columns(gaussian_matrix(d, k, gen));
    Eigen::MatrixXd data(n, d);
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto a = static_cast<Eigen::Index>(gen() % k);
      auto b = static_cast<Eigen::Index>(gen() % (k - 1));
      if (b >= a) ++b;
      data.row(i) = (mag(gen) * planted.col(a) + mag(gen) * planted.col(b)).transpose();
    }
    DictionaryOptions opt;
    opt.k = 8;
    opt.epochs = 10;
    opt.seed = seed;
    DictionaryTrace trace;
    const auto dict = learn_dictionary(data, opt, &trace);
    for (std::size_t e = 1; e < trace.objective.size(); ++e)
      CHECK(trace.objective[e] <= trace.objective[e - 1] + 1e-6 * n);
    int matched = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
      double best = -1.0;
      for (Eigen::Index l = 0; l < dict.k(); ++l)
        best = std::max(best, planted.col(j).dot(dict.atoms.col(l)) / dict.atoms.col(l).norm());
      matched += best >= 0.95;
    }
    CHECK_MESSAGE(matched >= 7, "seed " << seed);
  }
}

TEST_CASE("encode_store") {
  EmbeddingStore zeros(3);
  for (std::uint64_t i = 0; i < 4; ++i) zeros.add({i, i, 0, "w", std::nullopt, -1, {0.f, 0.f, 0.f}});
  const auto dict3 = make_dict(Eigen::MatrixXd::Identity(3, 5));
  for (const auto& c : encode_store(zeros, dict3, LinearMap::identity(3))) CHECK(c.empty());

  Eigen::MatrixXd unit(1, 1);
  unit << 1.0;
  EmbeddingStore one(1);
  one.add({0, 0, 0, "w", std::nullopt, -1, {0.5f}});
  const auto codes = encode_store(one, make_dict(unit));
  REQUIRE(codes.size() == 1);
  CHECK(codes[0] == lasso_nn(Eigen::VectorXd::Constant(1, 0.5), make_dict(unit)));

  CHECK(error_code_of([&] { encode_store(one, dict3); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("encode_store: rotated twin store through the planted rotation") {
  std::mt19937_64 gen(26);
  const Eigen::Index d = 6;
  const Eigen::MatrixXd r = xsense::testing::random_orthogonal(d, gen);
  const auto dict = make_dict(unit_columns(gaussian_matrix(d, 10, gen)));
  EmbeddingStore source(static_cast<std::uint32_t>(d)), target(static_cast<std::uint32_t>(d));
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Eigen::VectorXd y = gaussian_matrix(d, 1, gen).col(0);
    const Eigen::VectorXd x = r.transpose() * y;  // R^{-1} y
    EmbeddingRecord rs{i, i, 0, "w", std::nullopt, -1, {}}, rt = rs;
    for (Eigen::Index j = 0; j < d; ++j) {
      rs.vector.push_back(static_cast<float>(y[j]));
      rt.vector.push_back(static_cast<float>(x[j]));
    }
    source.add(std::move(rs));
    target.add(std::move(rt));
  }
  LinearMap map;
  map.kind = MapKind::Isometric;
  map.matrix = r;
  const auto src_codes = encode_store(source, dict);
  const auto tgt_codes = encode_store(target, dict, map);
  for (std::size_t i = 0; i < src_codes.size(); ++i)
    CHECK((src_codes[i].dense() - tgt_codes[i].dense()).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("file round trips") {
  xsense::testing::TempDir tmp;
  std::mt19937_64 gen(27);
  const auto dict = make_dict(unit_columns(gaussian_matrix(5, 7, gen)), 0.05);
  write_dictionary(dict, tmp / "d.dict");
  CHECK(std::filesystem::file_size(tmp / "d.dict") == 4 + 4 + 4 + 8 + 8 * 35);
  const auto back = read_dictionary(tmp / "d.dict");
  CHECK(back.atoms == dict.atoms);
  CHECK(back.lambda == 0.05);

  const auto codes = encode_rows(gaussian_matrix(20, 5, gen), dict);
  write_codes(codes, 7, tmp / "c.spc");
  CHECK(read_codes(tmp / "c.spc") == codes);

  auto bad = make_dict(2.0 * Eigen::MatrixXd::Identity(2, 2));
  write_dictionary(bad, tmp / "bad.dict");
  CHECK(error_code_of([&] { read_dictionary(tmp / "bad.dict"); }) == ErrorCode::InvariantViolation);
}
