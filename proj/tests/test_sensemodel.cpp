#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "xsense/sensemodel.hpp"

using namespace xsense;
using xsense::testing::error_code_of;

namespace {

SenseInventory inventory_of(std::initializer_list<std::string> senses) {
  SenseInventory inv;
  inv.add("word", "n", senses);
  return inv;
}

SparseCode code_of(std::uint32_t k, std::initializer_list<std::pair<std::uint32_t, double>> entries) {
  SparseCode c;
  c.k = k;
  for (auto [i, v] : entries) {
    c.indices.push_back(i);
    c.values.push_back(v);
  }
  return c;
}

// Hand-built joint table for two senses over two coordinates: tokens of s1
// load c1 with 0.4 and c2 with 0.1; s2 the other way round.
struct TwoByTwo {
  std::vector<SparseCode> codes{code_of(2, {{0, 0.4}, {1, 0.1}}), code_of(2, {{0, 0.1}, {1, 0.4}})};
  SenseLabels labels{{"s1"}, {"s2"}};
  SenseInventory inv = inventory_of({"s1", "s2"});
};

}  // namespace

TEST_CASE("normalize_pos") {
  CHECK(normalize_pos("NOUN") == "n");
  CHECK(normalize_pos("verb") == "v");
  CHECK(normalize_pos("ADJ") == "a");
  CHECK(normalize_pos("r") == "r");
}

TEST_CASE("phi: 2x2 table by hand") {
  const TwoByTwo t;
  const auto pmi = build_phi(t.codes, t.labels, t.inv, {.normalized = false, .smoothing = 0.0});
  // p(s1,c1) = 0.4, p(s1) = p(c1) = 0.5
  CHECK(pmi.phi(0, 0) == doctest::Approx(std::log(0.4 / 0.25)).epsilon(1e-12));
  CHECK(pmi.phi(0, 0) == doctest::Approx(0.470).epsilon(1e-3));
  CHECK(pmi.phi(0, 1) == doctest::Approx(std::log(0.1 / 0.25)).epsilon(1e-12));
  const auto npmi = build_phi(t.codes, t.labels, t.inv, {.normalized = true, .smoothing = 0.0});
  CHECK(npmi.phi(0, 0) == doctest::Approx(std::log(1.6) / -std::log(0.4)).epsilon(1e-12));
  CHECK(npmi.phi(0, 0) == doctest::Approx(0.513).epsilon(1e-3));
  CHECK(npmi.phi(1, 1) == doctest::Approx(npmi.phi(0, 0)));
}

TEST_CASE("phi: single token gives the unique positive cell") {
  const auto inv = inventory_of({"s", "other"});
  const std::vector<SparseCode> codes{code_of(4, {{2, 0.7}})};
  const SenseLabels labels{{"s"}};
  for (bool normalized : {false, true}) {
    const auto phi = build_phi(codes, labels, inv, {.normalized = normalized, .smoothing = 1.0});
    int positive = 0;
    for (Eigen::Index i = 0; i < phi.phi.rows(); ++i)
      for (Eigen::Index j = 0; j < phi.phi.cols(); ++j) positive += phi.phi(i, j) > 0.0;
    CHECK(positive == 1);
    CHECK(phi.phi(0, 2) > 0.0);
  }
}

TEST_CASE("phi: uniform and factorizable tables give zero PMI") {
  const auto inv = inventory_of({"a", "b", "c"});
  SUBCASE("uniform") {
    std::vector<SparseCode> codes;
    SenseLabels labels;
    for (const char* s : {"a", "b", "c"}) {
      codes.push_back(code_of(3, {{0, 1.0}, {1, 1.0}, {2, 1.0}}));
      labels.push_back({s});
    }
    for (double eps : {0.0, 1.0}) {
      const auto phi = build_phi(codes, labels, inv, {.smoothing = eps});
      CHECK(phi.phi.cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SUBCASE("random factorizable") {
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
      // joint(s, j) = r_s * c_j via one token per sense with values r_s * c_j
      const std::vector<double> r{u(gen), u(gen), u(gen)};
      const std::vector<double> c{u(gen), u(gen), u(gen), u(gen)};
      std::vector<SparseCode> codes;
      SenseLabels labels;
      const char* names[] = {"a", "b", "c"};
      for (int s = 0; s < 3; ++s) {
        SparseCode code;
        code.k = 4;
        for (std::uint32_t j = 0; j < 4; ++j) {
          code.indices.push_back(j);
          code.values.push_back(r[static_cast<std::size_t>(s)] * c[j]);
        }
        codes.push_back(code);
        labels.push_back({names[s]});
      }
      const auto phi = build_phi(codes, labels, inv, {.smoothing = 0.0});
      CHECK(phi.phi.cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("phi: NPMI range on random data") {
  std::mt19937_64 gen(32);
  const auto inv = inventory_of({"a", "b", "c", "d"});
  const char* names[] = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<SparseCode> codes;
    SenseLabels labels;
    for (int t = 0; t < 25; ++t) {
      SparseCode code;
      code.k = 6;
      for (std::uint32_t j = 0; j < 6; ++j)
        if (gen() % 3 == 0) {
          code.indices.push_back(j);
          code.values.push_back(0.01 + static_cast<double>(gen() % 1000) / 500.0);
        }
      codes.push_back(code);
      labels.push_back({names[gen() % 4]});
      if (gen() % 5 == 0) labels.back().push_back(names[gen() % 4]);
    }
    for (double eps : {0.0, 1.0}) {
      const auto phi = build_phi(codes, labels, inv, {.normalized = true, .smoothing = eps});
      CHECK(phi.phi.minCoeff() >= -1.0 - 1e-9);
      CHECK(phi.phi.maxCoeff() <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("phi: binary co-occurrence and errors") {
  const TwoByTwo t;
  const auto bin = build_phi(t.codes, t.labels, t.inv, {.smoothing = 0.0, .binary_cooc = true});
  CHECK(bin.phi.cwiseAbs().maxCoeff() <= 1e-12);  // every cell counts 1 -> independent

  const SenseLabels short_labels{{"s1"}};
  CHECK(error_code_of([&] { build_phi(t.codes, short_labels, t.inv); }) == ErrorCode::LengthMismatch);
  const SenseLabels unknown{{"s1"}, {"zzz"}};
  CHECK(error_code_of([&] { build_phi(t.codes, unknown, t.inv); }) == ErrorCode::UnknownSense);
}

TEST_CASE("phi: multi-label tokens feed every gold sense") {
  const auto inv = inventory_of({"a", "b", "c"});
  const std::vector<SparseCode> codes{code_of(2, {{0, 1.0}}), code_of(2, {{1, 1.0}})};
  const SenseLabels labels{{"a", "b"}, {"c"}};
  const auto phi = build_phi(codes, labels, inv, {.smoothing = 0.0});
  CHECK(phi.phi(0, 0) == doctest::Approx(phi.phi(1, 0)));
  CHECK(phi.phi(0, 0) > 0.0);
}

TEST_CASE("infer_sparse") {
  SenseMatrix phi;
  phi.senses = {"x", "y", "z"};
  phi.phi.resize(3, 4);
  phi.phi << 0.5, -0.2, 0.1, 0.0,   //
      0.1, 0.3, 0.2, 0.9,          //
      -0.4, 0.8, 0.3, 0.1;
  phi.reindex();
  const std::vector<std::string> cands{"x", "y", "z"};

  CHECK(infer_sparse(code_of(4, {}), phi, cands) == "x");
  // alpha = (1, 0, 2, 0): x = 0.5 + 0.2 = 0.7, y = 0.1 + 0.4 = 0.5, z = -0.4 + 0.6 = 0.2
  const auto alpha = code_of(4, {{0, 1.0}, {2, 2.0}});
  CHECK(infer_sparse(alpha, phi, cands) == "x");
  const std::vector<std::string> yz{"y", "z"};
  CHECK(infer_sparse(alpha, phi, yz) == "y");
  const std::vector<std::string> unseen_first{"unseen", "z"};
  CHECK(infer_sparse(alpha, phi, unseen_first) == "z");
  const std::vector<std::string> unseen{"u1", "u2"};
  CHECK(infer_sparse(alpha, phi, unseen) == "u1");
  CHECK(error_code_of([&] { infer_sparse(alpha, phi, std::vector<std::string>{}); }) == ErrorCode::EmptyCandidates);

  SenseMatrix single;
  single.senses = {"p", "q"};
  single.phi = Eigen::MatrixXd::Zero(2, 3);
  single.phi(1, 2) = 0.8;
  single.reindex();
  const std::vector<std::string> pq{"p", "q"};
  CHECK(infer_sparse(code_of(3, {{2, 0.3}}), single, pq) == "q");
}

TEST_CASE("infer_sparse invariances") {
  std::mt19937_64 gen(33);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 200; ++trial) {
    SenseMatrix phi;
    phi.senses = {"a", "b", "c", "d"};
    phi.phi = xsense::testing::gaussian_matrix(4, 5, gen);
    phi.reindex();
    SparseCode alpha;
    alpha.k = 5;
    for (std::uint32_t j = 0; j < 5; ++j)
      if (gen() % 2) {
        alpha.indices.push_back(j);
        alpha.values.push_back(0.1 + std::abs(nd(gen)));
      }
    const std::vector<std::string> cands{"b", "d", "a"};
    const auto base = infer_sparse(alpha, phi, cands);

    SparseCode scaled = alpha;
    const double factor = 0.01 + std::abs(nd(gen)) * 10;
    for (auto& v : scaled.values) v *= factor;
    CHECK(infer_sparse(scaled, phi, cands) == base);

    SenseMatrix shifted = phi;
    const auto col = static_cast<Eigen::Index>(gen() % 5);
    const double c = nd(gen) * 3;
    for (const auto& s : cands) shifted.phi(static_cast<Eigen::Index>(*phi.row_of(s)), col) += c;
    CHECK(infer_sparse(alpha, shifted, cands) == base);
  }
}

TEST_CASE("dense bank") {
  const auto inv = inventory_of({"s", "t", "u"});
  SUBCASE("one token per sense") {
    Eigen::MatrixXd v(2, 2);
    v << 1, 2, 3, 4;
    const auto bank = build_dense_bank(v, {{"s"}, {"t"}}, inv);
    CHECK(bank.senses == std::vector<std::string>{"s", "t"});
    CHECK(bank.centroids.row(0) == v.row(0));
    CHECK(bank.counts == std::vector<std::uint64_t>{1, 1});
    CHECK_FALSE(bank.row_of("u").has_value());
  }
  SUBCASE("two tokens of one sense") {
    Eigen::MatrixXd v(2, 2);
    v << 1, 0, 0, 1;
    const auto bank = build_dense_bank(v, {{"s"}, {"s"}}, inv);
    CHECK(bank.centroids(0, 0) == 0.5);
    CHECK(bank.centroids(0, 1) == 0.5);
  }
  SUBCASE("100 random tokens") {
    std::mt19937_64 gen(34);
    const Eigen::MatrixXd v = xsense::testing::gaussian_matrix(100, 7, gen);
    const auto bank = build_dense_bank(v, SenseLabels(100, {"t"}), inv);
    for (Eigen::Index j = 0; j < 7; ++j) {
      double sum = 0.0;
      for (Eigen::Index i = 0; i < 100; ++i) sum += v(i, j);
      CHECK(std::abs(bank.centroids(0, j) - sum / 100.0) <= 1e-12);
    }
  }
  SUBCASE("errors") {
    CHECK(error_code_of([&] { build_dense_bank(Eigen::MatrixXd::Ones(2, 2), {{"s"}}, inv); }) ==
          ErrorCode::LengthMismatch);
    CHECK(error_code_of([&] { build_dense_bank(Eigen::MatrixXd::Ones(1, 2), {{"nope"}}, inv); }) ==
          ErrorCode::UnknownSense);
  }
}

TEST_CASE("infer_dense") {
  const auto inv = inventory_of({"east", "north", "other"});
  Eigen::MatrixXd v(2, 2);
  v << 1, 0, 0, 1;
  const auto bank = build_dense_bank(v, {{"east"}, {"north"}}, inv);
  const std::vector<std::string> cands{"north", "east"};

  Eigen::VectorXd x(2);
  x << 0.9, 0.1;
  CHECK(infer_dense(x, bank, std::nullopt, cands) == "east");
  CHECK(infer_dense(Eigen::VectorXd(v.row(1).transpose()), bank, std::nullopt, cands) == "north");
  CHECK(infer_dense(x * 250.0, bank, std::nullopt, cands) == "east");
  const std::vector<std::string> unseen{"other", "missing"};
  CHECK(infer_dense(x, bank, std::nullopt, unseen) == "other");
  const std::vector<std::string> partly{"other", "north"};
  CHECK(infer_dense(x, bank, std::nullopt, partly) == "north");

  LinearMap swap;
  swap.kind = MapKind::Isometric;
  swap.matrix.resize(2, 2);
  swap.matrix << 0, 1, 1, 0;
  CHECK(infer_dense(x, bank, swap, cands) == "north");
  CHECK(error_code_of([&] { infer_dense(x, bank, std::nullopt, std::vector<std::string>{}); }) ==
        ErrorCode::EmptyCandidates);
}

TEST_CASE("infer_dense is invariant under positive rescaling") {
  std::mt19937_64 gen(35);
  const auto inv = inventory_of({"a", "b", "c"});
  const Eigen::MatrixXd v = xsense::testing::gaussian_matrix(3, 5, gen);
  const auto bank = build_dense_bank(v, {{"a"}, {"b"}, {"c"}}, inv);
  const std::vector<std::string> cands{"c", "a", "b"};
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd x = xsense::testing::gaussian_matrix(5, 1, gen).col(0);
    const double scale = 1e-3 + static_cast<double>(gen() % 10000) / 100.0;
    CHECK(infer_dense(x, bank, std::nullopt, cands) == infer_dense(scale * x, bank, std::nullopt, cands));
  }
}

TEST_CASE("files") {
  xsense::testing::TempDir tmp;
  const TwoByTwo t;
  const auto phi = build_phi(t.codes, t.labels, t.inv, {.normalized = true});
  write_phi(phi, tmp / "p.phi");
  const auto phi_back = read_phi(tmp / "p.phi");
  CHECK(phi_back.phi == phi.phi);
  CHECK(phi_back.senses == phi.senses);
  CHECK(phi_back.normalized);
  CHECK(phi_back.row_of("s2") == std::optional<std::size_t>{1});

  Eigen::MatrixXd v(3, 2);
  v << 1, 2, 3, 4, 5, 6;
  const auto bank = build_dense_bank(v, {{"s1"}, {"s2"}, {"s1"}}, t.inv);
  write_bank(bank, tmp / "b.bank");
  const auto bank_back = read_bank(tmp / "b.bank");
  CHECK(bank_back.centroids == bank.centroids);
  CHECK(bank_back.counts == bank.counts);
  CHECK(bank_back.senses == bank.senses);

  xsense::testing::spit(tmp / "inv.txt", "bank#n\tbn:1n\tbn:2n\nrun#v bn:3v\n\nBank#NOUN\tbn:4n\n");
  const auto inv = read_inventory(tmp / "inv.txt");
  CHECK(inv.senses().size() == 4);
  REQUIRE(inv.candidates("bank", "NOUN") != nullptr);
  CHECK(*inv.candidates("bank", "NOUN") == std::vector<std::string>{"bn:1n", "bn:2n"});
  CHECK(*inv.candidates("Bank", "n") == std::vector<std::string>{"bn:4n"});
  CHECK(*inv.candidates("RUN", "VERB") == std::vector<std::string>{"bn:3v"});
  CHECK(inv.candidates("bank", "v") == nullptr);

  EmbeddingStore store(1);
  for (std::uint64_t id : {10, 20, 30}) store.add({id, 0, static_cast<std::uint32_t>(id), "w", std::nullopt, -1, {0.f}});
  xsense::testing::spit(tmp / "labels.tsv", "30\tbn:1n bn:2n\n10\tbn:3v\n");
  const auto labels = read_labels(tmp / "labels.tsv", store);
  CHECK(labels[0] == std::vector<std::string>{"bn:3v"});
  CHECK(labels[1].empty());
  CHECK(labels[2] == std::vector<std::string>{"bn:1n", "bn:2n"});
}
