#pragma once

// Mining of contextual anchor pairs from parallel sentences with a
// bilingual lexicon, and deterministic train/test splitting.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "xsense/embstore.hpp"

namespace xsense {

// Whitespace split, then punctuation stripped at both word boundaries.
// Tokens that are pure punctuation are dropped.
std::vector<std::string> tokenize(std::string_view text);

// ASCII case folding; non-ASCII bytes are left untouched.
std::string fold_case(std::string_view word);

struct ParallelSentence {
  std::uint64_t pair_id = 0;
  std::vector<std::string> source_tokens;
  std::vector<std::string> target_tokens;
};

// Lookups try the exact form first and fall back to the case-folded form.
class BilingualLexicon {
 public:
  void add_forward(const std::string& source_word, const std::string& target_word);
  void add_backward(const std::string& target_word, const std::string& source_word);
  // Adds the pair to both directions.
  void add_pair(const std::string& source_word, const std::string& target_word);

  bool forward_contains(std::string_view source_word, std::string_view target_word) const;
  bool backward_contains(std::string_view target_word, std::string_view source_word) const;
  // Both directions agree: target ∈ fwd(source) and source ∈ bwd(target).
  bool mutual(std::string_view source_word, std::string_view target_word) const;

  BilingualLexicon transposed() const;
  bool empty() const { return fwd_.empty() && bwd_.empty(); }

 private:
  using Table = std::unordered_map<std::string, std::unordered_set<std::string>>;
  static bool contains(const Table& table, std::string_view key, std::string_view value);

  Table fwd_;
  Table bwd_;
};

struct MinedAnchor {
  std::uint64_t pair_id = 0;
  std::uint32_t source_index = 0;
  std::uint32_t target_index = 0;

  bool operator==(const MinedAnchor&) const = default;
};

std::vector<MinedAnchor> mine_anchors(std::span<const ParallelSentence> sentences, const BilingualLexicon& lexicon);

enum class Split : std::uint8_t { Train, Test };

struct AnchorPair {
  MinedAnchor token;
  Split split = Split::Train;

  bool operator==(const AnchorPair&) const = default;
};

struct AnchorSplit {
  std::vector<AnchorPair> train;
  std::vector<AnchorPair> test;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t test = 0;
};

// Test size is ceil(n * test_fraction), capped at the test share implied by
// train_cap (5,000 for a cap of 20,000 at 0.2); train takes the remainder up
// to train_cap.
SplitSizes split_sizes(std::size_t n, std::size_t train_cap, double test_fraction);

AnchorSplit split_anchors(std::span<const MinedAnchor> anchors, std::size_t train_cap, double test_fraction,
                          std::uint64_t seed);

// Rows of the anchor tokens in the respective stores, matched on
// (sentence_id = pair_id, token_index).
struct ResolvedAnchors {
  std::vector<std::size_t> target_rows;
  std::vector<std::size_t> source_rows;
  std::size_t unresolved = 0;
};

ResolvedAnchors resolve_anchors(std::span<const AnchorPair> anchors, const EmbeddingStore& target_store,
                                const EmbeddingStore& source_store);

// I/O: corpus `pair_id \t source \t target`, lexicon `source \t target`,
// anchors `pair_id \t src_idx \t tgt_idx \t split`.
std::vector<ParallelSentence> read_parallel_corpus(const std::filesystem::path& path);
BilingualLexicon read_lexicon(const std::filesystem::path& forward,
                              const std::optional<std::filesystem::path>& backward = std::nullopt);
void write_anchors(const AnchorSplit& split, const std::filesystem::path& path);
std::vector<AnchorPair> read_anchors(const std::filesystem::path& path);

}  // namespace xsense
