#pragma once

// XL-WSD corpora, F-score, significance tests and dev-set model selection.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xsense/alignment.hpp"

namespace xsense {

struct WsdInstance {
  std::string instance_id;
  std::string lemma;
  std::string pos;               // coarse n/v/a/r, or the raw tag when unknown
  std::string sentence_key;      // id attribute of the <sentence>
  std::uint64_t sentence_index;  // document-order ordinal of the sentence
  std::uint32_t token_index;     // position among the sentence's <wf>/<instance> children
  std::string surface;
};

using GoldKeys = std::map<std::string, std::vector<std::string>>;
using Predictions = std::map<std::string, std::string>;

struct WsdCorpus {
  std::vector<WsdInstance> instances;
  GoldKeys gold;
  std::vector<std::string> dangling_gold;  // gold ids with no instance
};

// Reads the gold file `instance_id key [key ...]`.
GoldKeys read_gold(const std::filesystem::path& path);

// Throws MalformedXml and MissingGold.
WsdCorpus parse_xlwsd(const std::filesystem::path& xml_path, const std::filesystem::path& gold_path);

// Lines `instance_id sense`.
Predictions read_predictions(const std::filesystem::path& path);
void write_predictions(const Predictions& predictions, const std::filesystem::path& path);

struct FScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t correct = 0;
  std::size_t attempted = 0;
  std::size_t total = 0;
};

// Predictions for ids outside the gold set are ignored.
FScore f_score(const Predictions& predictions, const GoldKeys& gold);

// Micro pools the counts; macro averages P, R and F1.
struct Aggregate {
  FScore micro;
  FScore macro;
};
Aggregate aggregate(std::span<const FScore> scores);

struct ContingencyPair {
  std::size_t b = 0;  // A correct, B wrong
  std::size_t c = 0;  // A wrong, B correct
  std::size_t both_correct = 0;
  std::size_t both_wrong = 0;
};

ContingencyPair contingency(const Predictions& a, const Predictions& b, const GoldKeys& gold);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double dof = 0.0;
};

// Continuity-corrected unless `continuity` is false. Throws DegenerateTable.
TestResult mcnemar(const ContingencyPair& pair, bool continuity = true);

// Welch's t-test, two-sided. Throws InsufficientSample and ZeroVariance.
TestResult unpaired_t_test(std::span<const double> a, std::span<const double> b);

struct GridKey {
  int source_layer = -1;
  int target_layer = -1;
  MapKind map_kind = MapKind::Isometric;
  bool normalized = false;

  bool operator==(const GridKey&) const = default;
};

// Layer pair ascending, then kind name alphabetical, then false before true.
bool tie_order_less(const GridKey& a, const GridKey& b);

struct GridKeyLess {
  bool operator()(const GridKey& a, const GridKey& b) const { return tie_order_less(a, b); }
};

using DevScores = std::map<GridKey, double, GridKeyLess>;

// Highest dev F1; ties go to the earliest key in tie order. Throws EmptyGrid.
GridKey select_hyperparams(const DevScores& dev_scores);

std::string to_string(const GridKey& key);

}  // namespace xsense
