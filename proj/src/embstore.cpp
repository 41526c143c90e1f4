#include "xsense/embstore.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "xsense/error.hpp"

namespace xsense {

namespace {

constexpr char kMagic[5] = "CEMB";
constexpr std::uint32_t kAbsentLemma = 0xFFFFFFFFu;

void put_short_string(detail::BinaryWriter& w, const std::string& s) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max())
    throw Error(ErrorCode::IoFailure, "header string longer than 65535 bytes");
  w.put(static_cast<std::uint16_t>(s.size()));
  w.put_bytes(s.data(), s.size());
}

std::string get_short_string(detail::BinaryReader& r) {
  const auto len = r.get<std::uint16_t>();
  std::string s(len, '\0');
  if (len > 0) r.read_exact(s.data(), len);
  return s;
}

}  // namespace

void EmbeddingStore::add(EmbeddingRecord record) {
  if (record.vector.size() != dim_)
    throw Error(ErrorCode::DimensionMismatch, "record " + std::to_string(record.record_id) + " has length " +
                                                  std::to_string(record.vector.size()) + ", store dim is " +
                                                  std::to_string(dim_));
  for (float v : record.vector)
    if (!std::isfinite(v))
      throw Error(ErrorCode::NonFinite, "record " + std::to_string(record.record_id) + " has a non-finite entry");
  if (by_id_.contains(record.record_id))
    throw Error(ErrorCode::InvariantViolation, "duplicate record_id " + std::to_string(record.record_id));
  if (!records_.empty() && records_.front().layer != record.layer)
    throw Error(ErrorCode::InvariantViolation, "layer must be constant within a store");

  const std::size_t pos = records_.size();
  by_id_.emplace(record.record_id, pos);
  by_token_.emplace(std::pair{record.sentence_id, record.token_index}, pos);
  records_.push_back(std::move(record));
}

std::size_t EmbeddingStore::position_of(std::uint64_t record_id) const {
  const auto it = by_id_.find(record_id);
  if (it == by_id_.end()) throw Error(ErrorCode::UnknownId, "record_id " + std::to_string(record_id));
  return it->second;
}

std::optional<std::size_t> EmbeddingStore::find_token(std::uint64_t sentence_id, std::uint32_t token_index) const {
  const auto it = by_token_.find({sentence_id, token_index});
  if (it == by_token_.end()) return std::nullopt;
  return it->second;
}

Eigen::MatrixXd EmbeddingStore::to_matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(records_.size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < records_.size(); ++i)
    for (std::uint32_t j = 0; j < dim_; ++j) m(static_cast<Eigen::Index>(i), j) = records_[i].vector[j];
  return m;
}

Eigen::VectorXd EmbeddingStore::vector_at(std::size_t i) const {
  const auto& v = records_.at(i).vector;
  Eigen::VectorXd out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[static_cast<Eigen::Index>(j)] = v[j];
  return out;
}

void write_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");

  detail::BinaryWriter w(out);
  w.put_magic(kMagic);
  w.put(kCembVersion);
  w.put(store.dim());
  w.put(static_cast<std::uint64_t>(store.count()));
  put_short_string(w, store.language());
  put_short_string(w, store.encoder_tag());

  for (const auto& rec : store.records()) {
    w.put(rec.record_id);
    w.put(rec.sentence_id);
    w.put(rec.token_index);
    w.put(rec.layer);
    w.put_string(rec.surface);
    if (rec.lemma) {
      if (rec.lemma->size() >= kAbsentLemma) throw Error(ErrorCode::IoFailure, "lemma too long");
      w.put_string(*rec.lemma);
    } else {
      w.put(kAbsentLemma);
    }
    w.put_bytes(reinterpret_cast<const char*>(rec.vector.data()), rec.vector.size() * sizeof(float));
  }
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

EmbeddingStore read_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());

  detail::BinaryReader r(in, path.string());
  r.expect_magic(kMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kCembVersion)
    throw Error(ErrorCode::MalformedHeader, path.string() + ": unsupported version " + std::to_string(version));
  const auto dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  std::string language = get_short_string(r);
  std::string encoder_tag = get_short_string(r);
  if (dim == 0 && count > 0)
    throw Error(ErrorCode::DimensionMismatch, path.string() + ": zero dimension with non-empty record list");

  EmbeddingStore store(dim, std::move(language), std::move(encoder_tag));
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    rec.record_id = r.get<std::uint64_t>();
    rec.sentence_id = r.get<std::uint64_t>();
    rec.token_index = r.get<std::uint32_t>();
    rec.layer = r.get<std::int8_t>();
    rec.surface = r.get_string();
    const auto lemma_len = r.get<std::uint32_t>();
    if (lemma_len != kAbsentLemma) {
      std::string lemma(lemma_len, '\0');
      if (lemma_len > 0) r.read_exact(lemma.data(), lemma_len);
      rec.lemma = std::move(lemma);
    }
    rec.vector.resize(dim);
    r.read_exact(reinterpret_cast<char*>(rec.vector.data()), std::size_t{dim} * sizeof(float));
    store.add(std::move(rec));
  }
  if (!r.at_eof())
    throw Error(ErrorCode::DimensionMismatch, path.string() + ": trailing bytes after the declared records");
  return store;
}

std::uintmax_t encoded_size(const EmbeddingStore& store) {
  std::uintmax_t size = 4 + 4 + 4 + 8 + 2 + store.language().size() + 2 + store.encoder_tag().size();
  for (const auto& rec : store.records()) {
    size += kCembFixedRecordBytes + rec.surface.size() + (rec.lemma ? rec.lemma->size() : 0);
    size += std::uintmax_t{store.dim()} * sizeof(float);
  }
  return size;
}

EmbeddingStore subset(const EmbeddingStore& store, std::span<const std::uint64_t> ids) {
  EmbeddingStore out(store.dim(), store.language(), store.encoder_tag());
  for (const auto id : ids) out.add(store[store.position_of(id)]);
  return out;
}

}  // namespace xsense
