#include "xsense/sparsecode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "binary_io.hpp"
#include "xsense/error.hpp"
#include "xsense/random.hpp"

namespace xsense {

namespace {

constexpr char kDictMagic[5] = "XDCT";
constexpr char kCodeMagic[5] = "XSPC";
constexpr double kUnitBallSlack = 1e-9;

// target += sign * code code^T, touching only the nonzero block.
void add_outer(Eigen::MatrixXd& target, const SparseCode& code, double sign) {
  for (std::size_t a = 0; a < code.nnz(); ++a)
    for (std::size_t b = 0; b < code.nnz(); ++b)
      target(code.indices[a], code.indices[b]) += sign * code.values[a] * code.values[b];
}

// target += sign * y code^T.
void add_cross(Eigen::MatrixXd& target, const Eigen::VectorXd& y, const SparseCode& code, double sign) {
  for (std::size_t a = 0; a < code.nnz(); ++a) target.col(code.indices[a]) += (sign * code.values[a]) * y;
}

double code_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& atoms, double lambda, const SparseCode& code) {
  Eigen::VectorXd r = y;
  double l1 = 0.0;
  for (std::size_t a = 0; a < code.nnz(); ++a) {
    r -= code.values[a] * atoms.col(code.indices[a]);
    l1 += code.values[a];
  }
  return 0.5 * r.squaredNorm() + lambda * l1;
}

double reconstruction_error(const Eigen::VectorXd& y, const Eigen::MatrixXd& atoms, const SparseCode& code) {
  Eigen::VectorXd r = y;
  for (std::size_t a = 0; a < code.nnz(); ++a) r -= code.values[a] * atoms.col(code.indices[a]);
  return r.squaredNorm();
}

Eigen::VectorXd random_unit(Eigen::Index d, Rng& rng) {
  Eigen::VectorXd v(d);
  do {
    for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.normal();
  } while (v.norm() == 0.0);
  return v / v.norm();
}

}  // namespace

void check_dictionary(const Dictionary& dict) {
  if (!dict.atoms.allFinite()) throw Error(ErrorCode::InvariantViolation, "dictionary has non-finite entries");
  for (Eigen::Index j = 0; j < dict.k(); ++j)
    if (dict.atoms.col(j).norm() > 1.0 + kUnitBallSlack)
      throw Error(ErrorCode::InvariantViolation, "atom " + std::to_string(j) + " leaves the unit ball");
}

Eigen::VectorXd SparseCode::dense() const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(k);
  for (std::size_t a = 0; a < indices.size(); ++a) out[indices[a]] = values[a];
  return out;
}

SparseCode SparseCode::from_dense(const Eigen::VectorXd& alpha) {
  SparseCode code;
  code.k = static_cast<std::uint32_t>(alpha.size());
  for (Eigen::Index j = 0; j < alpha.size(); ++j)
    if (alpha[j] > 0.0) {
      code.indices.push_back(static_cast<std::uint32_t>(j));
      code.values.push_back(alpha[j]);
    }
  return code;
}

LassoSolver::LassoSolver(const Dictionary& dict, LassoOptions options)
    : dict_(dict), options_(options), gram_(dict.atoms.transpose() * dict.atoms) {}

Eigen::VectorXd LassoSolver::solve(const Eigen::VectorXd& y) const {
  return solve(y, Eigen::VectorXd::Zero(dict_.k()));
}

Eigen::VectorXd LassoSolver::solve(const Eigen::VectorXd& y, Eigen::VectorXd alpha) const {
  if (y.size() != dict_.dim())
    throw Error(ErrorCode::DimensionMismatch, "vector of length " + std::to_string(y.size()) +
                                                  " against a dictionary of dimension " + std::to_string(dict_.dim()));
  if (alpha.size() != dict_.k()) throw Error(ErrorCode::DimensionMismatch, "warm start has the wrong width");
  if (!y.allFinite()) throw Error(ErrorCode::NonFinite, "input vector has NaN or Inf");

  const double lambda = dict_.lambda;
  const Eigen::Index k = dict_.k();
  // corr_j = d_j^T (y - D alpha)
  Eigen::VectorXd corr = dict_.atoms.transpose() * y - gram_ * alpha;

  auto update = [&](Eigen::Index j) {
    const double g = gram_(j, j);
    if (g <= 0.0) return 0.0;
    const double next = std::max(0.0, alpha[j] + (corr[j] - lambda) / g);
    const double delta = next - alpha[j];
    if (delta != 0.0) {
      corr.noalias() -= delta * gram_.col(j);
      alpha[j] = next;
    }
    return std::abs(delta);
  };

  int sweeps = 0;
  std::vector<Eigen::Index> active;
  while (sweeps < options_.max_sweeps) {
    double change = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) change = std::max(change, update(j));
    ++sweeps;
    if (change < options_.tolerance) break;

    // Iterate on the current support until it settles, then re-check all.
    active.clear();
    for (Eigen::Index j = 0; j < k; ++j)
      if (alpha[j] > 0.0) active.push_back(j);
    while (sweeps < options_.max_sweeps) {
      double inner = 0.0;
      for (auto j : active) inner = std::max(inner, update(j));
      ++sweeps;
      if (inner < options_.tolerance) break;
    }
  }
  last_sweeps_ = sweeps;
  return alpha;
}

SparseCode lasso_nn(const Eigen::VectorXd& y, const Dictionary& dict, LassoOptions options) {
  return LassoSolver(dict, options).encode(y);
}

double lasso_objective(const Eigen::VectorXd& y, const Dictionary& dict, const Eigen::VectorXd& alpha) {
  return 0.5 * (y - dict.atoms * alpha).squaredNorm() + dict.lambda * alpha.sum();
}

Dictionary learn_dictionary(const Eigen::MatrixXd& data, const DictionaryOptions& options, DictionaryTrace* trace) {
  if (options.k < 1) throw Error(ErrorCode::InvalidHyperparameter, "k must be at least 1");
  if (!(options.lambda > 0.0)) throw Error(ErrorCode::InvalidHyperparameter, "lambda must be positive");
  if (options.epochs < 0 || options.batch < 1 || options.batch_rounds < 1)
    throw Error(ErrorCode::InvalidHyperparameter, "epochs must be >= 0, batch and batch_rounds >= 1");
  if (data.rows() < 1) throw Error(ErrorCode::InvalidArgument, "no training vectors");
  if (!data.allFinite()) throw Error(ErrorCode::NonFinite, "training data has NaN or Inf");

  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  const Eigen::Index k = options.k;
  Rng rng(options.seed);

  // Initialise from k distinct samples, unit-normalised.
  Dictionary dict;
  dict.lambda = options.lambda;
  dict.atoms.resize(d, k);
  {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    rng.shuffle(std::span<Eigen::Index>(order));
    for (Eigen::Index j = 0; j < k; ++j) {
      Eigen::VectorXd col;
      if (j < n) col = data.row(order[static_cast<std::size_t>(j)]).transpose();
      dict.atoms.col(j) = (j < n && col.norm() > 0.0) ? Eigen::VectorXd(col / col.norm()) : random_unit(d, rng);
    }
  }
  if (options.epochs == 0) return dict;

  std::vector<SparseCode> codes(static_cast<std::size_t>(n));
  Eigen::MatrixXd stats_a(k, k);  // sum alpha alpha^T
  Eigen::MatrixXd stats_b(d, k);  // sum y alpha^T

  // Re-encodes every sample (warm-started from its stored code), resets the
  // sufficient statistics from those codes and returns the full objective.
  auto full_pass = [&]() {
    const LassoSolver solver(dict, options.lasso);
    stats_a.setZero();
    stats_b.setZero();
    double objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& code = codes[static_cast<std::size_t>(i)];
      const Eigen::VectorXd y = data.row(i).transpose();
      const Eigen::VectorXd warm = code.k == 0 ? Eigen::VectorXd::Zero(k) : code.dense();
      code = SparseCode::from_dense(solver.solve(y, warm));
      add_outer(stats_a, code, 1.0);
      add_cross(stats_b, y, code, 1.0);
      objective += code_objective(y, dict.atoms, dict.lambda, code);
    }
    return objective;
  };

  // Block coordinate descent on the surrogate, repeated until the columns
  // settle. Each column update is the exact minimiser over the unit ball.
  auto update_atoms = [&]() {
    for (int pass = 0; pass < options.dictionary_passes; ++pass) {
      double change = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        const double ajj = stats_a(j, j);
        if (ajj <= 0.0) continue;
        Eigen::VectorXd u = (stats_b.col(j) - dict.atoms * stats_a.col(j)) / ajj + dict.atoms.col(j);
        u /= std::max(u.norm(), 1.0);
        change = std::max(change, (u - dict.atoms.col(j)).cwiseAbs().maxCoeff());
        dict.atoms.col(j) = u;
      }
      if (change < options.dictionary_tolerance) break;
    }
  };

  // Atoms no code uses are moved onto the worst-reconstructed samples. No
  // stored code touches them, so the surrogate objective is unchanged.
  auto reseed_dead_atoms = [&]() {
    std::vector<char> used(static_cast<std::size_t>(k), 0);
    for (const auto& c : codes)
      for (auto j : c.indices) used[j] = 1;
    std::vector<Eigen::Index> dead;
    for (Eigen::Index j = 0; j < k; ++j)
      if (!used[static_cast<std::size_t>(j)]) dead.push_back(j);
    if (dead.empty()) return 0;

    std::vector<std::pair<double, Eigen::Index>> worst;
    worst.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      worst.emplace_back(reconstruction_error(data.row(i).transpose(), dict.atoms, codes[static_cast<std::size_t>(i)]),
                         i);
    std::sort(worst.begin(), worst.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    std::size_t next = 0;
    for (auto j : dead) {
      while (next < worst.size() && data.row(worst[next].second).norm() == 0.0) ++next;
      if (next < worst.size()) {
        const Eigen::VectorXd v = data.row(worst[next++].second).transpose();
        dict.atoms.col(j) = v / v.norm();
      } else {
        dict.atoms.col(j) = random_unit(d, rng);
      }
    }
    return static_cast<int>(dead.size());
  };

  double objective = full_pass();
  if (trace) trace->objective.push_back(objective);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const int reseeded = reseed_dead_atoms();
    if (trace) trace->reseeded.push_back(reseeded);

    rng.shuffle(std::span<Eigen::Index>(order));
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch));
      for (int round = 0; round < options.batch_rounds; ++round) {
        const LassoSolver solver(dict, options.lasso);
        for (std::size_t t = start; t < end; ++t) {
          const Eigen::Index i = order[t];
          auto& code = codes[static_cast<std::size_t>(i)];
          const Eigen::VectorXd y = data.row(i).transpose();
          SparseCode fresh = SparseCode::from_dense(solver.solve(y, code.dense()));
          add_outer(stats_a, code, -1.0);
          add_cross(stats_b, y, code, -1.0);
          add_outer(stats_a, fresh, 1.0);
          add_cross(stats_b, y, fresh, 1.0);
          code = std::move(fresh);
        }
        update_atoms();
        check_dictionary(dict);
      }
    }

    objective = full_pass();
    if (trace) trace->objective.push_back(objective);
  }
  return dict;
}

Dictionary learn_dictionary(const EmbeddingStore& store, const DictionaryOptions& options, DictionaryTrace* trace) {
  return learn_dictionary(store.to_matrix(), options, trace);
}

std::vector<SparseCode> encode_rows(const Eigen::MatrixXd& data, const Dictionary& dict,
                                    const std::optional<LinearMap>& map, LassoOptions options) {
  const Eigen::MatrixXd mapped = map ? apply_map(*map, data) : data;
  if (mapped.cols() != dict.dim())
    throw Error(ErrorCode::DimensionMismatch, "vectors of dimension " + std::to_string(mapped.cols()) +
                                                  " against a dictionary of dimension " + std::to_string(dict.dim()));
  const LassoSolver solver(dict, options);
  std::vector<SparseCode> out;
  out.reserve(static_cast<std::size_t>(mapped.rows()));
  for (Eigen::Index i = 0; i < mapped.rows(); ++i) out.push_back(solver.encode(mapped.row(i).transpose()));
  return out;
}

std::vector<SparseCode> encode_store(const EmbeddingStore& store, const Dictionary& dict,
                                     const std::optional<LinearMap>& map, LassoOptions options) {
  if (map ? map->target_dim() != store.dim() : dict.dim() != store.dim())
    throw Error(ErrorCode::DimensionMismatch, "store dimension does not match the map or dictionary");
  return encode_rows(store.to_matrix(), dict, map, options);
}

void write_dictionary(const Dictionary& dict, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  detail::BinaryWriter w(out);
  w.put_magic(kDictMagic);
  w.put(static_cast<std::uint32_t>(dict.dim()));
  w.put(static_cast<std::uint32_t>(dict.k()));
  w.put(dict.lambda);
  for (Eigen::Index j = 0; j < dict.k(); ++j)
    for (Eigen::Index i = 0; i < dict.dim(); ++i) w.put(dict.atoms(i, j));
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

Dictionary read_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  detail::BinaryReader r(in, path.string());
  r.expect_magic(kDictMagic);
  const auto d = r.get<std::uint32_t>();
  const auto k = r.get<std::uint32_t>();
  Dictionary dict;
  dict.lambda = r.get<double>();
  dict.atoms.resize(d, k);
  for (std::uint32_t j = 0; j < k; ++j)
    for (std::uint32_t i = 0; i < d; ++i) dict.atoms(i, j) = r.get<double>();
  if (!r.at_eof()) throw Error(ErrorCode::DimensionMismatch, path.string() + ": trailing bytes");
  check_dictionary(dict);
  return dict;
}

void write_codes(std::span<const SparseCode> codes, std::uint32_t k, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  detail::BinaryWriter w(out);
  w.put_magic(kCodeMagic);
  w.put(k);
  w.put(static_cast<std::uint64_t>(codes.size()));
  for (const auto& c : codes) {
    if (c.k != k) throw Error(ErrorCode::DimensionMismatch, "code width differs from the file width");
    w.put(static_cast<std::uint32_t>(c.nnz()));
    for (std::size_t a = 0; a < c.nnz(); ++a) {
      w.put(c.indices[a]);
      w.put(c.values[a]);
    }
  }
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::vector<SparseCode> read_codes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  detail::BinaryReader r(in, path.string());
  r.expect_magic(kCodeMagic);
  const auto k = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  std::vector<SparseCode> codes;
  for (std::uint64_t i = 0; i < count; ++i) {
    SparseCode c;
    c.k = k;
    const auto nnz = r.get<std::uint32_t>();
    if (nnz > k) throw Error(ErrorCode::InvariantViolation, path.string() + ": code wider than k");
    for (std::uint32_t a = 0; a < nnz; ++a) {
      const auto idx = r.get<std::uint32_t>();
      const auto val = r.get<double>();
      if (idx >= k || !(val > 0.0) || (!c.indices.empty() && idx <= c.indices.back()))
        throw Error(ErrorCode::InvariantViolation, path.string() + ": malformed sparse code " + std::to_string(i));
      c.indices.push_back(idx);
      c.values.push_back(val);
    }
    codes.push_back(std::move(c));
  }
  if (!r.at_eof()) throw Error(ErrorCode::DimensionMismatch, path.string() + ": trailing bytes");
  return codes;
}

}  // namespace xsense
