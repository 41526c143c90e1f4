#include "xsense/sensemodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "binary_io.hpp"
#include "xsense/anchors.hpp"
#include "xsense/error.hpp"

namespace xsense {

namespace {

constexpr char kPhiMagic[5] = "XPHI";
constexpr char kBankMagic[5] = "XBNK";

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

void require_candidates(std::span<const std::string> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidate senses");
}

}  // namespace

std::string normalize_pos(std::string_view pos) {
  std::string p;
  for (char c : pos) p.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (p == "NOUN" || p == "N") return "n";
  if (p == "VERB" || p == "V") return "v";
  if (p == "ADJ" || p == "A" || p == "S") return "a";
  if (p == "ADV" || p == "R") return "r";
  return fold_case(pos);
}

std::size_t SenseInventory::add_sense(const std::string& sense) {
  const auto [it, inserted] = sense_index_.emplace(sense, senses_.size());
  if (inserted) senses_.push_back(sense);
  return it->second;
}

void SenseInventory::add(const std::string& lemma, std::string_view pos, const std::vector<std::string>& senses) {
  if (senses.empty()) throw Error(ErrorCode::InvalidArgument, "empty candidate list for '" + lemma + "'");
  auto& list = lemma_index_[{lemma, normalize_pos(pos)}];
  for (const auto& s : senses) {
    add_sense(s);
    if (std::find(list.begin(), list.end(), s) == list.end()) list.push_back(s);
  }
}

std::optional<std::size_t> SenseInventory::index_of(std::string_view sense) const {
  const auto it = sense_index_.find(std::string(sense));
  if (it == sense_index_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::string>* SenseInventory::candidates(std::string_view lemma, std::string_view pos) const {
  const std::string p = normalize_pos(pos);
  auto it = lemma_index_.find({std::string(lemma), p});
  if (it == lemma_index_.end()) it = lemma_index_.find({fold_case(lemma), p});
  return it == lemma_index_.end() ? nullptr : &it->second;
}

SenseInventory read_inventory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  SenseInventory inv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    const auto hash = fields[0].rfind('#');
    if (hash == std::string::npos || hash == 0 || fields.size() < 2)
      throw Error(ErrorCode::InvalidArgument, where + ": expected `lemma#pos sense...`");
    inv.add(fields[0].substr(0, hash), fields[0].substr(hash + 1), {fields.begin() + 1, fields.end()});
  }
  return inv;
}

SenseLabels read_labels(const std::filesystem::path& path, const EmbeddingStore& store) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  SenseLabels labels(store.count());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() < 2) throw Error(ErrorCode::InvalidArgument, where + ": expected `record_id sense...`");
    std::uint64_t id = 0;
    try {
      id = std::stoull(fields[0]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, where + ": bad record id '" + fields[0] + "'");
    }
    auto& slot = labels[store.position_of(id)];
    slot.insert(slot.end(), fields.begin() + 1, fields.end());
  }
  return labels;
}

std::optional<std::size_t> SenseMatrix::row_of(std::string_view sense) const {
  const auto it = rows_.find(std::string(sense));
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

void SenseMatrix::reindex() {
  rows_.clear();
  for (std::size_t i = 0; i < senses.size(); ++i) rows_.emplace(senses[i], i);
}

std::optional<std::size_t> DenseSenseBank::row_of(std::string_view sense) const {
  const auto it = rows_.find(std::string(sense));
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

void DenseSenseBank::reindex() {
  rows_.clear();
  for (std::size_t i = 0; i < senses.size(); ++i) rows_.emplace(senses[i], i);
}

SenseMatrix build_phi(std::span<const SparseCode> codes, const SenseLabels& labels, const SenseInventory& inventory,
                      const PmiOptions& options) {
  if (codes.size() != labels.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(codes.size()) + " codes but " +
                                               std::to_string(labels.size()) + " label lists");
  if (options.smoothing < 0.0) throw Error(ErrorCode::InvalidHyperparameter, "smoothing must be >= 0");

  const auto n_senses = static_cast<Eigen::Index>(inventory.senses().size());
  Eigen::Index k = 0;
  for (const auto& c : codes) k = std::max<Eigen::Index>(k, c.k);

  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(n_senses, k);
  for (std::size_t t = 0; t < codes.size(); ++t) {
    for (const auto& sense : labels[t]) {
      const auto row = inventory.index_of(sense);
      if (!row) throw Error(ErrorCode::UnknownSense, "'" + sense + "' is not in the inventory");
      const auto& code = codes[t];
      for (std::size_t a = 0; a < code.nnz(); ++a)
        joint(static_cast<Eigen::Index>(*row), code.indices[a]) += options.binary_cooc ? 1.0 : code.values[a];
    }
  }

  SenseMatrix out;
  out.senses = inventory.senses();
  out.normalized = options.normalized;
  out.smoothing = options.smoothing;
  out.phi = Eigen::MatrixXd::Zero(n_senses, k);
  out.reindex();

  // Additive smoothing over the whole senses x k table. Cells that never saw
  // mass still stay at 0 in the output.
  const Eigen::MatrixXd smoothed = joint.array() + options.smoothing;
  const double total = smoothed.sum();
  if (!(total > 0.0)) return out;

  const Eigen::VectorXd row_mass = smoothed.rowwise().sum();
  const Eigen::RowVectorXd col_mass = smoothed.colwise().sum();
  for (Eigen::Index s = 0; s < n_senses; ++s)
    for (Eigen::Index j = 0; j < k; ++j) {
      if (joint(s, j) <= 0.0) continue;
      const double pmi = std::log(smoothed(s, j) * total / (row_mass[s] * col_mass[j]));
      if (!options.normalized) {
        out.phi(s, j) = pmi;
        continue;
      }
      const double p_joint = smoothed(s, j) / total;
      out.phi(s, j) = p_joint >= 1.0 ? 1.0 : pmi / -std::log(p_joint);
    }
  return out;
}

std::string infer_sparse(const SparseCode& code, const SenseMatrix& phi, std::span<const std::string> candidates) {
  require_candidates(candidates);
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto row = phi.row_of(candidates[c]);
    if (!row) continue;
    double score = 0.0;
    for (std::size_t a = 0; a < code.nnz(); ++a)
      if (code.indices[a] < phi.phi.cols())
        score += phi.phi(static_cast<Eigen::Index>(*row), code.indices[a]) * code.values[a];
    if (score > best_score) {
      best_score = score;
      best = c;
    }
  }
  return candidates[best];
}

DenseSenseBank build_dense_bank(const Eigen::MatrixXd& vectors, const SenseLabels& labels,
                                const SenseInventory& inventory) {
  if (static_cast<std::size_t>(vectors.rows()) != labels.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(vectors.rows()) + " vectors but " +
                                               std::to_string(labels.size()) + " label lists");
  const auto n_senses = inventory.senses().size();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_senses), vectors.cols());
  std::vector<std::uint64_t> counts(n_senses, 0);
  for (std::size_t t = 0; t < labels.size(); ++t)
    for (const auto& sense : labels[t]) {
      const auto row = inventory.index_of(sense);
      if (!row) throw Error(ErrorCode::UnknownSense, "'" + sense + "' is not in the inventory");
      sums.row(static_cast<Eigen::Index>(*row)) += vectors.row(static_cast<Eigen::Index>(t));
      ++counts[*row];
    }

  DenseSenseBank bank;
  std::vector<Eigen::Index> present;
  for (std::size_t s = 0; s < n_senses; ++s)
    if (counts[s] > 0) present.push_back(static_cast<Eigen::Index>(s));
  bank.centroids.resize(static_cast<Eigen::Index>(present.size()), vectors.cols());
  for (std::size_t r = 0; r < present.size(); ++r) {
    const auto s = present[r];
    const auto n = counts[static_cast<std::size_t>(s)];
    bank.centroids.row(static_cast<Eigen::Index>(r)) = sums.row(s) / static_cast<double>(n);
    bank.senses.push_back(inventory.senses()[static_cast<std::size_t>(s)]);
    bank.counts.push_back(n);
  }
  bank.reindex();
  return bank;
}

DenseSenseBank build_dense_bank(const EmbeddingStore& store, const SenseLabels& labels,
                                const SenseInventory& inventory) {
  return build_dense_bank(store.to_matrix(), labels, inventory);
}

std::string infer_dense(const Eigen::VectorXd& x, const DenseSenseBank& bank, const std::optional<LinearMap>& map,
                        std::span<const std::string> candidates) {
  require_candidates(candidates);
  const Eigen::VectorXd query = map ? apply_map(*map, x) : x;
  if (bank.centroids.rows() > 0 && query.size() != bank.centroids.cols())
    throw Error(ErrorCode::DimensionMismatch, "query dimension does not match the sense bank");
  const double qnorm = query.norm();

  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto row = bank.row_of(candidates[c]);
    if (!row) continue;
    const auto centroid = bank.centroids.row(static_cast<Eigen::Index>(*row));
    const double denom = qnorm * centroid.norm();
    const double score = denom > 0.0 ? centroid.dot(query) / denom : 0.0;
    if (score > best_score) {
      best_score = score;
      best = c;
    }
  }
  return candidates[best];
}

void write_phi(const SenseMatrix& phi, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  detail::BinaryWriter w(out);
  w.put_magic(kPhiMagic);
  w.put(static_cast<std::uint32_t>(phi.phi.rows()));
  w.put(static_cast<std::uint32_t>(phi.phi.cols()));
  w.put(static_cast<std::uint8_t>(phi.normalized ? 1 : 0));
  for (Eigen::Index i = 0; i < phi.phi.rows(); ++i)
    for (Eigen::Index j = 0; j < phi.phi.cols(); ++j) w.put(phi.phi(i, j));
  for (const auto& s : phi.senses) w.put_string(s);
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

SenseMatrix read_phi(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  detail::BinaryReader r(in, path.string());
  r.expect_magic(kPhiMagic);
  const auto n = r.get<std::uint32_t>();
  const auto k = r.get<std::uint32_t>();
  SenseMatrix phi;
  phi.normalized = r.get<std::uint8_t>() != 0;
  phi.phi.resize(n, k);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < k; ++j) phi.phi(i, j) = r.get<double>();
  for (std::uint32_t i = 0; i < n; ++i) phi.senses.push_back(r.get_string());
  if (!r.at_eof()) throw Error(ErrorCode::DimensionMismatch, path.string() + ": trailing bytes");
  phi.reindex();
  return phi;
}

void write_bank(const DenseSenseBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  detail::BinaryWriter w(out);
  w.put_magic(kBankMagic);
  w.put(static_cast<std::uint32_t>(bank.centroids.rows()));
  w.put(static_cast<std::uint32_t>(bank.centroids.cols()));
  for (Eigen::Index i = 0; i < bank.centroids.rows(); ++i)
    for (Eigen::Index j = 0; j < bank.centroids.cols(); ++j) w.put(bank.centroids(i, j));
  for (auto c : bank.counts) w.put(c);
  for (const auto& s : bank.senses) w.put_string(s);
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

DenseSenseBank read_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  detail::BinaryReader r(in, path.string());
  r.expect_magic(kBankMagic);
  const auto n = r.get<std::uint32_t>();
  const auto d = r.get<std::uint32_t>();
  DenseSenseBank bank;
  bank.centroids.resize(n, d);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < d; ++j) bank.centroids(i, j) = r.get<double>();
  for (std::uint32_t i = 0; i < n; ++i) bank.counts.push_back(r.get<std::uint64_t>());
  for (std::uint32_t i = 0; i < n; ++i) bank.senses.push_back(r.get_string());
  if (!r.at_eof()) throw Error(ErrorCode::DimensionMismatch, path.string() + ": trailing bytes");
  bank.reindex();
  return bank;
}

}  // namespace xsense
