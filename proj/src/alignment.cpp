#include "xsense/alignment.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>

#include "binary_io.hpp"
#include "xsense/error.hpp"

namespace xsense {

namespace {

constexpr char kMagic[5] = "XMAP";
constexpr Eigen::Index kBlockRows = 512;

void require_finite(const Eigen::MatrixXd& m, const char* name) {
  if (!m.allFinite()) throw Error(ErrorCode::NonFinite, std::string(name) + " contains NaN or Inf");
}

void require_same_rows(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows())
    throw Error(ErrorCode::DimensionMismatch, "anchor matrices have " + std::to_string(x.rows()) + " and " +
                                                  std::to_string(y.rows()) + " rows");
  if (x.rows() < 1) throw Error(ErrorCode::InvalidArgument, "need at least one anchor pair");
}

// For every row q of `queries`, picks the k rows of `keys` with the best dot
// product; returns the sum of the matching rows of `payload` and of the scores.
struct NeighbourSums {
  Eigen::MatrixXd payload_sums;  // queries.rows() x payload.cols()
  double score_sum = 0.0;
};

NeighbourSums top_k_neighbours(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& keys,
                               const Eigen::MatrixXd& payload, int k) {
  const Eigen::Index n = queries.rows();
  const Eigen::Index m = keys.rows();
  const auto kk = std::min<Eigen::Index>(k, m);
  NeighbourSums out{Eigen::MatrixXd::Zero(n, payload.cols()), 0.0};

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
  for (Eigen::Index start = 0; start < n; start += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, n - start);
    const Eigen::MatrixXd scores = queries.middleRows(start, rows) * keys.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::iota(idx.begin(), idx.end(), Eigen::Index{0});
      // Higher score first, lower index on ties.
      std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(), [&](Eigen::Index a, Eigen::Index b) {
        const double sa = scores(r, a), sb = scores(r, b);
        return sa > sb || (sa == sb && a < b);
      });
      for (Eigen::Index t = 0; t < kk; ++t) {
        const auto j = idx[static_cast<std::size_t>(t)];
        out.payload_sums.row(start + r) += payload.row(j);
        out.score_sum += scores(r, j);
      }
    }
  }
  return out;
}

Eigen::MatrixXd project_spectral_ball(const Eigen::MatrixXd& w) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd s = svd.singularValues().cwiseMin(1.0);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

struct RcslsState {
  double objective = 0.0;
  Eigen::MatrixXd gradient;
};

RcslsState rcsls_state(const Eigen::MatrixXd& w, const Eigen::MatrixXd& xu, const Eigen::MatrixXd& yu, int k,
                       bool with_gradient) {
  const auto n = static_cast<double>(xu.rows());
  const auto kk = static_cast<double>(std::min<Eigen::Index>(k, xu.rows()));
  const Eigen::MatrixXd mapped = xu * w.transpose();  // n x d_s

  // Neighbours of each mapped query among the targets, and of each target
  // among the mapped queries.
  const auto to_targets = top_k_neighbours(mapped, yu, yu, k);
  const auto to_queries = top_k_neighbours(yu, mapped, xu, k);
  const double matched = (mapped.array() * yu.array()).sum();

  RcslsState st;
  st.objective = (2.0 * matched - to_targets.score_sum / kk - to_queries.score_sum / kk) / n;
  if (with_gradient) {
    st.gradient = (2.0 * yu.transpose() * xu - to_targets.payload_sums.transpose() * xu / kk -
                   yu.transpose() * to_queries.payload_sums / kk) /
                  n;
  }
  return st;
}

}  // namespace

std::string_view to_string(MapKind kind) {
  switch (kind) {
    case MapKind::LeastSquares: return "lstsq";
    case MapKind::Isometric: return "procrustes";
    case MapKind::Rcsls: return "rcsls";
    case MapKind::Identity: return "identity";
  }
  return "unknown";
}

MapKind parse_map_kind(std::string_view name) {
  if (name == "lstsq" || name == "least_squares") return MapKind::LeastSquares;
  if (name == "procrustes" || name == "isometric") return MapKind::Isometric;
  if (name == "rcsls") return MapKind::Rcsls;
  if (name == "identity") return MapKind::Identity;
  throw Error(ErrorCode::InvalidArgument, "unknown map kind '" + std::string(name) + "'");
}

LinearMap LinearMap::identity(Eigen::Index dim) {
  LinearMap m;
  m.matrix = Eigen::MatrixXd::Identity(dim, dim);
  m.kind = MapKind::Identity;
  return m;
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

LeastSquaresFit fit_least_squares(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  require_same_rows(x, y);
  require_finite(x, "X");
  require_finite(y, "Y");

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
  const Eigen::MatrixXd wt = cod.solve(y);  // d_t x d_s

  LeastSquaresFit fit;
  fit.map.matrix = wt.transpose();
  fit.map.kind = MapKind::LeastSquares;
  fit.residual = (x * wt - y).squaredNorm();
  fit.rank = cod.rank();
  return fit;
}

LinearMap fit_procrustes(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  require_same_rows(x, y);
  if (x.cols() != y.cols())
    throw Error(ErrorCode::DimensionMismatch, "Procrustes needs equal dimensions, got " + std::to_string(x.cols()) +
                                                  " and " + std::to_string(y.cols()));
  require_finite(x, "X");
  require_finite(y, "Y");

  const Eigen::MatrixXd m = y.transpose() * x;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  LinearMap map;
  map.matrix = svd.matrixU() * svd.matrixV().transpose();
  map.kind = MapKind::Isometric;
  return map;
}

double rcsls_objective(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x_unit, const Eigen::MatrixXd& y_unit,
                       int neighbors) {
  return rcsls_state(w, x_unit, y_unit, neighbors, false).objective;
}

RcslsFit fit_rcsls(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const LinearMap& init,
                   const RcslsOptions& options) {
  require_same_rows(x, y);
  if (init.matrix.rows() != y.cols() || init.matrix.cols() != x.cols())
    throw Error(ErrorCode::DimensionMismatch, "initial map is not d_s x d_t");
  if (options.neighbors < 1) throw Error(ErrorCode::InvalidArgument, "RCSLS needs at least one neighbour");
  require_finite(x, "X");
  require_finite(y, "Y");

  RcslsFit fit;
  fit.map = init;
  fit.map.kind = MapKind::Rcsls;
  if (options.steps <= 0) return fit;

  const Eigen::MatrixXd xu = normalize_rows(x);
  const Eigen::MatrixXd yu = normalize_rows(y);

  Eigen::MatrixXd w = init.matrix;
  auto state = rcsls_state(w, xu, yu, options.neighbors, true);
  fit.objective.push_back(state.objective);
  double eta = options.step_size;

  for (int step = 0; step < options.steps; ++step) {
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h) {
      const Eigen::MatrixXd candidate = project_spectral_ball(w + eta * state.gradient);
      const double value = rcsls_objective(candidate, xu, yu, options.neighbors);
      if (value >= state.objective) {
        w = candidate;
        state = rcsls_state(w, xu, yu, options.neighbors, true);
        fit.objective.push_back(state.objective);
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;
  }
  fit.map.matrix = w;
  return fit;
}

Eigen::MatrixXd apply_map(const LinearMap& map, const Eigen::MatrixXd& x) {
  if (x.cols() != map.target_dim())
    throw Error(ErrorCode::DimensionMismatch, "map expects " + std::to_string(map.target_dim()) +
                                                  " columns, got " + std::to_string(x.cols()));
  if (map.kind == MapKind::Identity) return x;
  return x * map.matrix.transpose();
}

Eigen::VectorXd apply_map(const LinearMap& map, const Eigen::VectorXd& x) {
  if (x.size() != map.target_dim())
    throw Error(ErrorCode::DimensionMismatch, "map expects a " + std::to_string(map.target_dim()) +
                                                  "-vector, got " + std::to_string(x.size()));
  if (map.kind == MapKind::Identity) return x;
  return map.matrix * x;
}

RetrievalResult eval_retrieval(const LinearMap& map, const Eigen::MatrixXd& x_test, const Eigen::MatrixXd& y_test) {
  if (x_test.rows() == 0) throw Error(ErrorCode::EmptyTestSet, "no test pairs");
  if (x_test.rows() != y_test.rows())
    throw Error(ErrorCode::DimensionMismatch, "test matrices are not row-aligned");
  if (y_test.cols() != map.source_dim())
    throw Error(ErrorCode::DimensionMismatch, "source dimension does not match the map");

  const Eigen::MatrixXd queries = normalize_rows(apply_map(map, x_test));
  const Eigen::MatrixXd keys = normalize_rows(y_test);
  const Eigen::Index n = queries.rows();

  RetrievalResult res;
  res.n = static_cast<std::size_t>(n);
  std::size_t correct = 0;
  for (Eigen::Index start = 0; start < n; start += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, n - start);
    const Eigen::MatrixXd scores = queries.middleRows(start, rows) * keys.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      Eigen::Index best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      int hits = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double s = scores(r, j);
        if (s > best_score) {
          best_score = s;
          best = j;
          hits = 1;
        } else if (s == best_score) {
          ++hits;
        }
      }
      if (hits > 1) ++res.ties;
      if (best == start + r) ++correct;
    }
  }
  res.accuracy_at_1 = static_cast<double>(correct) / static_cast<double>(n);
  return res;
}

void write_map(const LinearMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  detail::BinaryWriter w(out);
  w.put_magic(kMagic);
  w.put(static_cast<std::uint8_t>(map.kind));
  w.put(static_cast<std::uint32_t>(map.source_dim()));
  w.put(static_cast<std::uint32_t>(map.target_dim()));
  for (Eigen::Index i = 0; i < map.matrix.rows(); ++i)
    for (Eigen::Index j = 0; j < map.matrix.cols(); ++j) w.put(map.matrix(i, j));
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

LinearMap read_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  detail::BinaryReader r(in, path.string());
  r.expect_magic(kMagic);
  const auto kind = r.get<std::uint8_t>();
  if (kind > static_cast<std::uint8_t>(MapKind::Identity))
    throw Error(ErrorCode::MalformedHeader, path.string() + ": unknown map kind " + std::to_string(kind));
  const auto ds = r.get<std::uint32_t>();
  const auto dt = r.get<std::uint32_t>();
  LinearMap map;
  map.kind = static_cast<MapKind>(kind);
  map.matrix.resize(ds, dt);
  for (std::uint32_t i = 0; i < ds; ++i)
    for (std::uint32_t j = 0; j < dt; ++j) map.matrix(i, j) = r.get<double>();
  if (!r.at_eof()) throw Error(ErrorCode::DimensionMismatch, path.string() + ": trailing bytes");
  if (map.kind == MapKind::Identity && (ds != dt || !map.matrix.isIdentity(0.0)))
    throw Error(ErrorCode::InvariantViolation, path.string() + ": identity map is not the identity matrix");
  return map;
}

}  // namespace xsense
