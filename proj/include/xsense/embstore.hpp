#pragma once

// Binary storage of contextual embedding records (.cemb).
//
// Layout (all little-endian):
//   header   "CEMB" | version u32 | dim u32 | count u64
//            | language (u16 len + bytes) | encoder_tag (u16 len + bytes)
//   record   record_id u64 | sentence_id u64 | token_index u32 | layer i8
//            | surface (u32 len + bytes) | lemma (u32 len + bytes, 0xFFFFFFFF = absent)
//            | dim x f32
//
// An empty store with empty language/encoder tags is exactly 24 bytes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace xsense {

inline constexpr std::uint32_t kCembVersion = 1;
inline constexpr std::size_t kCembFixedHeaderBytes = 24;
// record_id + sentence_id + token_index + layer + two u32 length prefixes
inline constexpr std::size_t kCembFixedRecordBytes = 8 + 8 + 4 + 1 + 4 + 4;

struct EmbeddingRecord {
  std::uint64_t record_id = 0;
  std::uint64_t sentence_id = 0;
  std::uint32_t token_index = 0;
  std::string surface;
  std::optional<std::string> lemma;
  std::int8_t layer = -1;
  std::vector<float> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::uint32_t dim, std::string language = {}, std::string encoder_tag = {})
      : dim_(dim), language_(std::move(language)), encoder_tag_(std::move(encoder_tag)) {}

  std::uint32_t dim() const { return dim_; }
  std::size_t count() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::string& language() const { return language_; }
  const std::string& encoder_tag() const { return encoder_tag_; }
  std::span<const EmbeddingRecord> records() const { return records_; }
  const EmbeddingRecord& operator[](std::size_t i) const { return records_[i]; }

  // Validates dimension, finiteness, id uniqueness and layer consistency.
  void add(EmbeddingRecord record);

  bool contains(std::uint64_t record_id) const { return by_id_.contains(record_id); }
  // Row position of a record id; throws UnknownId.
  std::size_t position_of(std::uint64_t record_id) const;
  // Row position of the record at (sentence_id, token_index), if any.
  std::optional<std::size_t> find_token(std::uint64_t sentence_id, std::uint32_t token_index) const;

  // count x dim matrix in double precision; row i is record i.
  Eigen::MatrixXd to_matrix() const;
  Eigen::VectorXd vector_at(std::size_t i) const;

  bool operator==(const EmbeddingStore& other) const {
    return dim_ == other.dim_ && language_ == other.language_ &&
           encoder_tag_ == other.encoder_tag_ && records_ == other.records_;
  }

 private:
  std::uint32_t dim_ = 0;
  std::string language_;
  std::string encoder_tag_;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> by_id_;
  std::map<std::pair<std::uint64_t, std::uint32_t>, std::size_t> by_token_;
};

EmbeddingStore read_store(const std::filesystem::path& path);
void write_store(const EmbeddingStore& store, const std::filesystem::path& path);

// Exact number of bytes write_store produces for this store.
std::uintmax_t encoded_size(const EmbeddingStore& store);

// Records in the order of `ids`; throws UnknownId.
EmbeddingStore subset(const EmbeddingStore& store, std::span<const std::uint64_t> ids);

}  // namespace xsense
