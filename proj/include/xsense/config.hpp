#pragma once

// Run configuration: a flat `key = value` text format.
//
//   # comment
//   regime = mono_mono
//   source_store = "data/src.L{source_layer}.cemb"
//
// Values may be quoted. Relative paths resolve against the config file's
// directory; `{source_layer}` and `{target_layer}` expand to the layer ints.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "xsense/alignment.hpp"

namespace xsense {

enum class Regime { Multi, MultiMulti, MultiMono, MonoMulti, MonoMono };
enum class Track { Dense, Sparse };

std::string_view to_string(Regime regime);
std::string_view to_string(Track track);
Regime parse_regime(std::string_view name);
Track parse_track(std::string_view name);

struct RunConfig {
  Regime regime = Regime::MonoMono;
  Track track = Track::Dense;
  MapKind map_kind = MapKind::Isometric;
  int source_layer = -1;
  int target_layer = -1;
  std::optional<bool> normalized_pmi;  // sparse track only

  // sparse coding
  std::uint32_t k = 3000;
  double lambda = 0.05;
  int epochs = 10;
  int batch = 256;
  int batch_rounds = 5;
  double smoothing = 1.0;
  bool binary_cooc = false;
  std::uint64_t seed = 0;

  int rcsls_neighbors = 10;
  int rcsls_steps = 50;

  // Path templates, kept verbatim; resolve with path().
  std::string source_store;      // annotated source-language embeddings
  std::string source_labels;
  std::string dictionary_store;  // empty: learn on source_store
  std::string anchors;
  std::string anchor_source_store;
  std::string anchor_target_store;
  std::string map_file;          // load instead of fitting
  std::string inventory;
  std::string dev_xml, dev_gold, dev_store;
  std::string test_xml, test_gold, test_store;
  std::string predictions_out;
  std::string dev_predictions_out;

  std::filesystem::path base_dir;

  // Empty template -> nullopt.
  std::optional<std::filesystem::path> path(const std::string& value) const;
  bool normalized() const { return normalized_pmi.value_or(false); }
};

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig read_config(const std::filesystem::path& path);
// Round-trips through parse_config (base_dir is not written).
std::string format_config(const RunConfig& config);

// Throws ConfigContradiction or InvalidHyperparameter.
void validate(const RunConfig& config);

}  // namespace xsense
