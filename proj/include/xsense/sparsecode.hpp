#pragma once

// Nonnegative sparse coding against a column-norm-capped dictionary, and
// online dictionary learning over an embedding store.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "xsense/alignment.hpp"
#include "xsense/embstore.hpp"

namespace xsense {

inline constexpr double kDefaultLambda = 0.05;
inline constexpr int kDefaultAtoms = 3000;

struct Dictionary {
  Eigen::MatrixXd atoms;  // d x k, every column norm <= 1
  double lambda = kDefaultLambda;

  Eigen::Index dim() const { return atoms.rows(); }
  Eigen::Index k() const { return atoms.cols(); }
};

// Throws InvariantViolation when a column leaves the unit ball or an entry is
// not finite.
void check_dictionary(const Dictionary& dict);

struct SparseCode {
  std::vector<std::uint32_t> indices;  // sorted, < k
  std::vector<double> values;          // strictly positive
  std::uint32_t k = 0;

  std::size_t nnz() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  Eigen::VectorXd dense() const;
  static SparseCode from_dense(const Eigen::VectorXd& alpha);

  bool operator==(const SparseCode&) const = default;
};

struct LassoOptions {
  double tolerance = 1e-7;  // max coordinate change per sweep
  int max_sweeps = 10000;
};

// argmin_{a >= 0} 0.5 ||y - D a||^2 + lambda ||a||_1 by cyclic coordinate
// descent. Holds the Gram matrix so repeated solves against one dictionary
// share it.
class LassoSolver {
 public:
  explicit LassoSolver(const Dictionary& dict, LassoOptions options = {});

  Eigen::VectorXd solve(const Eigen::VectorXd& y) const;
  // Warm-started solve; `alpha` must be feasible (>= 0).
  Eigen::VectorXd solve(const Eigen::VectorXd& y, Eigen::VectorXd alpha) const;
  SparseCode encode(const Eigen::VectorXd& y) const { return SparseCode::from_dense(solve(y)); }

  int last_sweeps() const { return last_sweeps_; }

 private:
  Dictionary dict_;
  LassoOptions options_;
  Eigen::MatrixXd gram_;
  mutable int last_sweeps_ = 0;
};

SparseCode lasso_nn(const Eigen::VectorXd& y, const Dictionary& dict, LassoOptions options = {});

double lasso_objective(const Eigen::VectorXd& y, const Dictionary& dict, const Eigen::VectorXd& alpha);

struct DictionaryOptions {
  int k = kDefaultAtoms;
  double lambda = kDefaultLambda;
  int epochs = 10;
  int batch = 256;
  std::uint64_t seed = 0;
  // Block-coordinate passes over the atoms after each minibatch.
  int dictionary_passes = 5;
  int batch_rounds = 5;  // code/atom alternations per minibatch
  double dictionary_tolerance = 1e-6;
  LassoOptions lasso;
};

struct DictionaryTrace {
  // Full-data objective sum_i 0.5||y_i - D a_i||^2 + lambda||a_i||_1 at the
  // initial dictionary and after every epoch.
  std::vector<double> objective;
  std::vector<int> reseeded;  // atoms reseeded after each epoch
};

Dictionary learn_dictionary(const Eigen::MatrixXd& data, const DictionaryOptions& options,
                            DictionaryTrace* trace = nullptr);
Dictionary learn_dictionary(const EmbeddingStore& store, const DictionaryOptions& options,
                            DictionaryTrace* trace = nullptr);

// Codes for every row of `data` (after applying `map` when given).
std::vector<SparseCode> encode_rows(const Eigen::MatrixXd& data, const Dictionary& dict,
                                    const std::optional<LinearMap>& map = std::nullopt, LassoOptions options = {});
std::vector<SparseCode> encode_store(const EmbeddingStore& store, const Dictionary& dict,
                                     const std::optional<LinearMap>& map = std::nullopt, LassoOptions options = {});

// .dict: "XDCT" | d u32 | k u32 | lambda f64 | column-major f64.
void write_dictionary(const Dictionary& dict, const std::filesystem::path& path);
Dictionary read_dictionary(const std::filesystem::path& path);

// .spc: "XSPC" | k u32 | count u64 | per code: nnz u32, (index u32, value f64)*.
void write_codes(std::span<const SparseCode> codes, std::uint32_t k, const std::filesystem::path& path);
std::vector<SparseCode> read_codes(const std::filesystem::path& path);

}  // namespace xsense
