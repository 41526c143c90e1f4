#pragma once

// End-to-end runs: map fitting, retrieval check, sense model, inference on
// target-language corpora and scoring, plus the layer x map-kind grid.

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xsense/alignment.hpp"
#include "xsense/config.hpp"
#include "xsense/evaluation.hpp"
#include "xsense/sensemodel.hpp"

namespace xsense {

struct SplitResult {
  Predictions predictions;
  FScore score;
  std::size_t missing_embeddings = 0;  // instances with no token in the store
  std::size_t unknown_lemmas = 0;      // instances with no inventory entry
};

struct RunResult {
  GridKey key;
  LinearMap map;
  std::optional<RetrievalResult> retrieval;
  std::size_t unresolved_anchors = 0;
  std::optional<SplitResult> dev;
  std::optional<SplitResult> test;
  std::optional<SenseMatrix> phi;      // sparse track
  std::optional<DenseSenseBank> bank;  // dense track
};

// Memoises stores, maps and dictionaries across runs that share them.
class RunCache {
 public:
  RunCache();
  ~RunCache();
  RunCache(const RunCache&) = delete;
  RunCache& operator=(const RunCache&) = delete;

  struct Impl;
  Impl& impl() { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

// Deterministic given the config. Throws ConfigContradiction and whatever
// the stages raise.
RunResult run(const RunConfig& config, RunCache* cache = nullptr);

// Every layer pair in {-4..-1}^2 times {procrustes, rcsls}, times
// normalization on the sparse track (32 / 64 configs). The multi regime
// keeps source = target layer with the identity map.
std::vector<RunConfig> enumerate_grid(const RunConfig& base);

struct GridEntry {
  RunConfig config;
  GridKey key;
  std::optional<RetrievalResult> retrieval;
  FScore dev;
  std::optional<FScore> test;
};

struct GridReport {
  Regime regime = Regime::MonoMono;
  Track track = Track::Dense;
  std::vector<GridEntry> entries;  // in tie order
  std::size_t selected = 0;        // index into entries
};

// Configs must share regime and track and all carry a dev corpus.
GridReport run_grid(std::span<const RunConfig> configs);

std::string to_json(const RunResult& result);
std::string to_json(const GridReport& report);

}  // namespace xsense
