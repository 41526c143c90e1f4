#pragma once

// Linear maps from the target-language space into the source-language space.
// Matrices hold one vector per row; a map W (d_s x d_t) sends a row x to
// (W x)^T, i.e. X -> X W^T.

#include <cstdint>
#include <filesystem>
#include <string_view>

#include <Eigen/Dense>

namespace xsense {

enum class MapKind : std::uint8_t { LeastSquares = 0, Isometric = 1, Rcsls = 2, Identity = 3 };

std::string_view to_string(MapKind kind);
// Accepts the CLI spellings: lstsq | procrustes | rcsls | identity.
MapKind parse_map_kind(std::string_view name);

struct LinearMap {
  Eigen::MatrixXd matrix;  // d_s x d_t
  MapKind kind = MapKind::Identity;
  int source_layer = -1;
  int target_layer = -1;

  Eigen::Index source_dim() const { return matrix.rows(); }
  Eigen::Index target_dim() const { return matrix.cols(); }

  static LinearMap identity(Eigen::Index dim);
};

struct LeastSquaresFit {
  LinearMap map;
  double residual = 0.0;  // sum of squared residuals
  Eigen::Index rank = 0;  // effective rank of X
};

// Unconstrained least squares via complete orthogonal decomposition, so
// rank-deficient X yields the minimum-norm solution rather than an error.
LeastSquaresFit fit_least_squares(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

// Orthogonal Procrustes: W = U V^T from the SVD of Y^T X.
LinearMap fit_procrustes(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

struct RcslsOptions {
  int neighbors = 10;
  int steps = 50;
  double step_size = 1.0;
  int max_halvings = 30;
};

struct RcslsFit {
  LinearMap map;
  std::vector<double> objective;  // value after init and after every accepted step
};

// Relaxed CSLS on row-normalised anchors, maximised by full-batch projected
// gradient ascent. The projection clips singular values at 1; a step is only
// accepted if it does not decrease the objective, otherwise the step size is
// halved.
RcslsFit fit_rcsls(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const LinearMap& init,
                   const RcslsOptions& options = {});

// The relaxed CSLS objective itself, for a given map on row-normalised data.
double rcsls_objective(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x_unit, const Eigen::MatrixXd& y_unit,
                       int neighbors);

Eigen::MatrixXd apply_map(const LinearMap& map, const Eigen::MatrixXd& x);
Eigen::VectorXd apply_map(const LinearMap& map, const Eigen::VectorXd& x);

struct RetrievalResult {
  double accuracy_at_1 = 0.0;
  std::size_t ties = 0;  // queries whose best score was attained more than once
  std::size_t n = 0;
};

// Row i of x_test translates row i of y_test; a query counts as correct when
// its best cosine match among all y rows is row i (lowest index wins ties).
RetrievalResult eval_retrieval(const LinearMap& map, const Eigen::MatrixXd& x_test, const Eigen::MatrixXd& y_test);

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m);

// .map: "XMAP" | kind u8 | d_s u32 | d_t u32 | row-major f64.
void write_map(const LinearMap& map, const std::filesystem::path& path);
LinearMap read_map(const std::filesystem::path& path);

}  // namespace xsense
