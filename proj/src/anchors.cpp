#include "xsense/anchors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "xsense/error.hpp"
#include "xsense/random.hpp"

namespace xsense {

namespace {

// Multi-byte punctuation commonly found at word edges in Tatoeba-style text.
constexpr std::array<std::string_view, 18> kWidePunctuation = {
    "\xC2\xAB", "\xC2\xBB", "\xC2\xBF", "\xC2\xA1",          // « » ¿ ¡
    "\xE2\x80\x9E", "\xE2\x80\x9C", "\xE2\x80\x9D",          // „ “ ”
    "\xE2\x80\x98", "\xE2\x80\x99", "\xE2\x80\x9A",          // ‘ ’ ‚
    "\xE2\x80\xA6", "\xE2\x80\x93", "\xE2\x80\x94",          // ellipsis, en dash, em dash
    "\xE3\x80\x82", "\xE3\x80\x81",                          // 。 、
    "\xEF\xBC\x81", "\xEF\xBC\x9F", "\xEF\xBC\x8C",          // ！ ？ ，
};

bool strip_front(std::string_view& w) {
  if (w.empty()) return false;
  const auto c = static_cast<unsigned char>(w.front());
  if (c < 0x80 && std::ispunct(c)) {
    w.remove_prefix(1);
    return true;
  }
  for (auto p : kWidePunctuation)
    if (w.starts_with(p)) {
      w.remove_prefix(p.size());
      return true;
    }
  return false;
}

bool strip_back(std::string_view& w) {
  if (w.empty()) return false;
  const auto c = static_cast<unsigned char>(w.back());
  if (c < 0x80 && std::ispunct(c)) {
    w.remove_suffix(1);
    return true;
  }
  for (auto p : kWidePunctuation)
    if (w.ends_with(p)) {
      w.remove_suffix(p.size());
      return true;
    }
  return false;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

void chomp(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::uint64_t parse_u64(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, where + ": expected an unsigned integer, got '" + s + "'");
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view word = text.substr(i, j - i);
    while (strip_front(word)) {}
    while (strip_back(word)) {}
    if (!word.empty()) tokens.emplace_back(word);
    i = j;
  }
  return tokens;
}

std::string fold_case(std::string_view word) {
  std::string out(word);
  for (auto& ch : out) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80) ch = static_cast<char>(std::tolower(c));
  }
  return out;
}

void BilingualLexicon::add_forward(const std::string& source_word, const std::string& target_word) {
  fwd_[source_word].insert(target_word);
}

void BilingualLexicon::add_backward(const std::string& target_word, const std::string& source_word) {
  bwd_[target_word].insert(source_word);
}

void BilingualLexicon::add_pair(const std::string& source_word, const std::string& target_word) {
  add_forward(source_word, target_word);
  add_backward(target_word, source_word);
}

bool BilingualLexicon::contains(const Table& table, std::string_view key, std::string_view value) {
  const std::string folded_value = fold_case(value);
  auto hit = [&](const std::string& k) {
    const auto it = table.find(k);
    if (it == table.end()) return false;
    return it->second.contains(std::string(value)) || it->second.contains(folded_value);
  };
  const std::string exact(key);
  if (hit(exact)) return true;
  const std::string folded = fold_case(key);
  return folded != exact && hit(folded);
}

bool BilingualLexicon::forward_contains(std::string_view source_word, std::string_view target_word) const {
  return contains(fwd_, source_word, target_word);
}

bool BilingualLexicon::backward_contains(std::string_view target_word, std::string_view source_word) const {
  return contains(bwd_, target_word, source_word);
}

bool BilingualLexicon::mutual(std::string_view source_word, std::string_view target_word) const {
  return forward_contains(source_word, target_word) && backward_contains(target_word, source_word);
}

BilingualLexicon BilingualLexicon::transposed() const {
  BilingualLexicon t;
  t.fwd_ = bwd_;
  t.bwd_ = fwd_;
  return t;
}

std::vector<MinedAnchor> mine_anchors(std::span<const ParallelSentence> sentences, const BilingualLexicon& lexicon) {
  std::vector<MinedAnchor> out;
  if (lexicon.empty()) return out;

  for (const auto& sent : sentences) {
    const auto& src = sent.source_tokens;
    const auto& tgt = sent.target_tokens;

    std::map<std::string, int> src_types;
    std::map<std::string, int> tgt_types;
    for (const auto& w : src) ++src_types[fold_case(w)];
    for (const auto& w : tgt) ++tgt_types[fold_case(w)];

    std::vector<int> src_matches(src.size(), 0);
    std::vector<int> tgt_matches(tgt.size(), 0);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> candidates;
    for (std::size_t i = 0; i < src.size(); ++i)
      for (std::size_t j = 0; j < tgt.size(); ++j)
        if (lexicon.mutual(src[i], tgt[j])) {
          ++src_matches[i];
          ++tgt_matches[j];
          candidates.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        }

    // Only unambiguous one-to-one matches survive.
    for (const auto& [i, j] : candidates) {
      if (src_matches[i] != 1 || tgt_matches[j] != 1) continue;
      if (src_types[fold_case(src[i])] != 1 || tgt_types[fold_case(tgt[j])] != 1) continue;
      out.push_back({sent.pair_id, i, j});
    }
  }
  return out;
}

SplitSizes split_sizes(std::size_t n, std::size_t train_cap, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "test_fraction must lie in (0, 1)");
  if (train_cap == 0) throw Error(ErrorCode::InvalidArgument, "train_cap must be positive");
  if (n < 2) throw Error(ErrorCode::InsufficientAnchors, "need at least 2 anchors, got " + std::to_string(n));

  const auto test_cap = static_cast<std::size_t>(
      std::llround(static_cast<double>(train_cap) * test_fraction / (1.0 - test_fraction)));
  auto test = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * test_fraction - 1e-9));
  test = std::clamp<std::size_t>(test, 1, n - 1);
  test = std::max<std::size_t>(1, std::min(test, test_cap));
  const std::size_t train = std::min(n - test, train_cap);
  return {train, test};
}

AnchorSplit split_anchors(std::span<const MinedAnchor> anchors, std::size_t train_cap, double test_fraction,
                          std::uint64_t seed) {
  const auto sizes = split_sizes(anchors.size(), train_cap, test_fraction);

  std::vector<std::size_t> order(anchors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sizes.test));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(sizes.test),
                                     order.begin() + static_cast<std::ptrdiff_t>(sizes.test + sizes.train));
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  AnchorSplit split;
  for (auto i : train_idx) split.train.push_back({anchors[i], Split::Train});
  for (auto i : test_idx) split.test.push_back({anchors[i], Split::Test});
  return split;
}

ResolvedAnchors resolve_anchors(std::span<const AnchorPair> anchors, const EmbeddingStore& target_store,
                                const EmbeddingStore& source_store) {
  ResolvedAnchors out;
  for (const auto& a : anchors) {
    const auto t = target_store.find_token(a.token.pair_id, a.token.target_index);
    const auto s = source_store.find_token(a.token.pair_id, a.token.source_index);
    if (!t || !s) {
      ++out.unresolved;
      continue;
    }
    out.target_rows.push_back(*t);
    out.source_rows.push_back(*s);
  }
  return out;
}

std::vector<ParallelSentence> read_parallel_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());

  std::vector<ParallelSentence> out;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    const auto fields = split_tabs(line);
    if (fields.size() != 3) throw Error(ErrorCode::InvalidArgument, where + ": expected 3 tab-separated fields");
    ParallelSentence s;
    s.pair_id = parse_u64(fields[0], where);
    s.source_tokens = tokenize(fields[1]);
    s.target_tokens = tokenize(fields[2]);
    if (s.source_tokens.empty() || s.target_tokens.empty())
      throw Error(ErrorCode::InvalidArgument, where + ": empty sentence side");
    if (!seen.insert(s.pair_id).second)
      throw Error(ErrorCode::InvalidArgument, where + ": duplicate pair_id " + fields[0]);
    out.push_back(std::move(s));
  }
  return out;
}

BilingualLexicon read_lexicon(const std::filesystem::path& forward,
                              const std::optional<std::filesystem::path>& backward) {
  BilingualLexicon lex;
  auto load = [](const std::filesystem::path& p, auto&& sink) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + p.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      chomp(line);
      if (line.empty()) continue;
      const auto fields = split_tabs(line);
      if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
        throw Error(ErrorCode::InvalidArgument, p.string() + ":" + std::to_string(line_no) + ": expected 2 fields");
      sink(fields[0], fields[1]);
    }
  };

  if (backward) {
    load(forward, [&](const std::string& s, const std::string& t) { lex.add_forward(s, t); });
    load(*backward, [&](const std::string& t, const std::string& s) { lex.add_backward(t, s); });
  } else {
    load(forward, [&](const std::string& s, const std::string& t) { lex.add_pair(s, t); });
  }
  return lex;
}

void write_anchors(const AnchorSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  auto emit = [&](const std::vector<AnchorPair>& pairs) {
    for (const auto& a : pairs)
      out << a.token.pair_id << '\t' << a.token.source_index << '\t' << a.token.target_index << '\t'
          << (a.split == Split::Train ? "train" : "test") << '\n';
  };
  emit(split.train);
  emit(split.test);
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::vector<AnchorPair> read_anchors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<AnchorPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    const auto f = split_tabs(line);
    if (f.size() != 4) throw Error(ErrorCode::InvalidArgument, where + ": expected 4 tab-separated fields");
    AnchorPair a;
    a.token.pair_id = parse_u64(f[0], where);
    a.token.source_index = static_cast<std::uint32_t>(parse_u64(f[1], where));
    a.token.target_index = static_cast<std::uint32_t>(parse_u64(f[2], where));
    if (f[3] == "train")
      a.split = Split::Train;
    else if (f[3] == "test")
      a.split = Split::Test;
    else
      throw Error(ErrorCode::InvalidArgument, where + ": split must be 'train' or 'test'");
    out.push_back(a);
  }
  return out;
}

}  // namespace xsense
