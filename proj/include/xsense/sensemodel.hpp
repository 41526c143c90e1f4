#pragma once

// Sense representations: (N)PMI profiles over sparse coordinates and dense
// per-sense centroids, plus candidate-restricted inference for both.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "xsense/alignment.hpp"
#include "xsense/embstore.hpp"
#include "xsense/sparsecode.hpp"

namespace xsense {

// NOUN/VERB/ADJ/ADV (and their one-letter forms) -> n/v/a/r.
std::string normalize_pos(std::string_view pos);

class SenseInventory {
 public:
  // Appends candidates for (lemma, pos); new sense ids are registered in
  // first-seen order.
  void add(const std::string& lemma, std::string_view pos, const std::vector<std::string>& senses);
  // Registers a sense id without attaching it to a lemma.
  std::size_t add_sense(const std::string& sense);

  const std::vector<std::string>& senses() const { return senses_; }
  std::optional<std::size_t> index_of(std::string_view sense) const;
  // Candidate list for (lemma, pos); exact lemma first, then case-folded.
  const std::vector<std::string>* candidates(std::string_view lemma, std::string_view pos) const;
  std::size_t lemma_count() const { return lemma_index_.size(); }

 private:
  std::vector<std::string> senses_;
  std::unordered_map<std::string, std::size_t> sense_index_;
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> lemma_index_;
};

// Lines: `lemma#pos <TAB> sense <TAB> sense ...` (tabs or spaces).
SenseInventory read_inventory(const std::filesystem::path& path);

// Per-token gold senses; an empty list marks an unannotated token.
using SenseLabels = std::vector<std::vector<std::string>>;

// Lines: `record_id <TAB> sense [sense ...]`, aligned to the store's record
// order. Records without a line get an empty label list.
SenseLabels read_labels(const std::filesystem::path& path, const EmbeddingStore& store);

struct PmiOptions {
  bool normalized = false;
  double smoothing = 1.0;      // added to every cell of the senses x k table
  bool binary_cooc = false;    // count nonzero coordinates instead of their values
};

struct SenseMatrix {
  Eigen::MatrixXd phi;  // senses x k
  std::vector<std::string> senses;
  bool normalized = false;
  double smoothing = 0.0;

  std::optional<std::size_t> row_of(std::string_view sense) const;
  void reindex();

 private:
  std::unordered_map<std::string, std::size_t> rows_;
};

SenseMatrix build_phi(std::span<const SparseCode> codes, const SenseLabels& labels, const SenseInventory& inventory,
                      const PmiOptions& options = {});

// argmax over the candidates of (Phi alpha)_s; candidates absent from Phi
// score -inf, ties and the all-absent case go to the first-listed candidate.
std::string infer_sparse(const SparseCode& code, const SenseMatrix& phi, std::span<const std::string> candidates);

struct DenseSenseBank {
  Eigen::MatrixXd centroids;  // senses x d
  std::vector<std::string> senses;
  std::vector<std::uint64_t> counts;

  std::optional<std::size_t> row_of(std::string_view sense) const;
  void reindex();

 private:
  std::unordered_map<std::string, std::size_t> rows_;
};

DenseSenseBank build_dense_bank(const Eigen::MatrixXd& vectors, const SenseLabels& labels,
                                const SenseInventory& inventory);
DenseSenseBank build_dense_bank(const EmbeddingStore& store, const SenseLabels& labels,
                                const SenseInventory& inventory);

// Candidate whose centroid has the highest cosine to x (or Wx).
std::string infer_dense(const Eigen::VectorXd& x, const DenseSenseBank& bank, const std::optional<LinearMap>& map,
                        std::span<const std::string> candidates);

// .phi: "XPHI" | senses u32 | k u32 | normalized u8 | row-major f64 | sense ids.
void write_phi(const SenseMatrix& phi, const std::filesystem::path& path);
SenseMatrix read_phi(const std::filesystem::path& path);

// .bank: "XBNK" | senses u32 | d u32 | row-major f64 | counts u64 | sense ids.
void write_bank(const DenseSenseBank& bank, const std::filesystem::path& path);
DenseSenseBank read_bank(const std::filesystem::path& path);

}  // namespace xsense
