#include "xsense/pipeline.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xsense/anchors.hpp"
#include "xsense/error.hpp"
#include "xsense/sparsecode.hpp"

namespace xsense {

struct RunCache::Impl {
  std::map<std::filesystem::path, std::shared_ptr<const EmbeddingStore>> stores;
  std::map<std::string, LinearMap> maps;
  std::map<std::string, Dictionary> dictionaries;
};

RunCache::RunCache() : impl_(std::make_unique<Impl>()) {}
RunCache::~RunCache() = default;

namespace {

std::filesystem::path required(const RunConfig& c, const std::string& value, const char* key) {
  auto p = c.path(value);
  if (!p) throw Error(ErrorCode::MalformedConfig, std::string("missing required key '") + key + "'");
  return *p;
}

std::shared_ptr<const EmbeddingStore> load_store(RunCache::Impl& cache, const std::filesystem::path& path) {
  auto& slot = cache.stores[path];
  if (!slot) slot = std::make_shared<const EmbeddingStore>(read_store(path));
  return slot;
}

Eigen::MatrixXd gather(const EmbeddingStore& store, std::span<const std::size_t> rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), store.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = store.vector_at(rows[i]);
  return m;
}

std::vector<AnchorPair> anchors_of(const std::vector<AnchorPair>& all, Split split) {
  std::vector<AnchorPair> out;
  for (const auto& a : all)
    if (a.split == split) out.push_back(a);
  return out;
}

struct MapStage {
  LinearMap map;
  std::optional<RetrievalResult> retrieval;
  std::size_t unresolved = 0;
};

MapStage fit_map(const RunConfig& c, RunCache::Impl& cache, std::uint32_t source_dim) {
  MapStage stage;
  if (auto file = c.path(c.map_file)) {
    stage.map = read_map(*file);
    if (c.regime == Regime::Multi && stage.map.kind != MapKind::Identity)
      throw Error(ErrorCode::ConfigContradiction, "regime multi cannot use the non-identity map " + file->string());
    if (stage.map.kind != c.map_kind)
      throw Error(ErrorCode::ConfigContradiction, file->string() + " holds a " +
                                                      std::string(to_string(stage.map.kind)) + " map, config says " +
                                                      std::string(to_string(c.map_kind)));
  } else if (c.regime == Regime::Multi) {
    stage.map = LinearMap::identity(source_dim);
  }

  const auto anchors_path = c.path(c.anchors);
  if (!anchors_path) {
    if (c.regime != Regime::Multi && c.map_file.empty())
      throw Error(ErrorCode::MalformedConfig, "need either 'anchors' or 'map_file'");
    stage.map.source_layer = c.source_layer;
    stage.map.target_layer = c.target_layer;
    return stage;
  }
  const auto all = read_anchors(*anchors_path);
  const auto src = load_store(cache, required(c, c.anchor_source_store, "anchor_source_store"));
  const auto tgt = load_store(cache, required(c, c.anchor_target_store, "anchor_target_store"));

  if (c.regime != Regime::Multi && c.map_file.empty()) {
    std::ostringstream key;
    key << anchors_path->string() << '|' << to_string(c.map_kind) << '|' << c.source_layer << '|' << c.target_layer
        << '|' << c.rcsls_neighbors << '|' << c.rcsls_steps << '|' << c.path(c.anchor_source_store)->string() << '|'
        << c.path(c.anchor_target_store)->string();
    auto it = cache.maps.find(key.str());
    if (it == cache.maps.end()) {
      const auto train = anchors_of(all, Split::Train);
      const auto resolved = resolve_anchors(train, *tgt, *src);
      if (resolved.target_rows.size() < 2)
        throw Error(ErrorCode::InsufficientAnchors,
                    "only " + std::to_string(resolved.target_rows.size()) + " training anchors resolved");
      const Eigen::MatrixXd x = gather(*tgt, resolved.target_rows);
      const Eigen::MatrixXd y = gather(*src, resolved.source_rows);
      LinearMap map;
      switch (c.map_kind) {
        case MapKind::LeastSquares: map = fit_least_squares(x, y).map; break;
        case MapKind::Isometric: map = fit_procrustes(x, y); break;
        case MapKind::Rcsls: {
          RcslsOptions opt;
          opt.neighbors = c.rcsls_neighbors;
          opt.steps = c.rcsls_steps;
          map = fit_rcsls(x, y, fit_procrustes(x, y), opt).map;
          break;
        }
        case MapKind::Identity: break;
      }
      it = cache.maps.emplace(key.str(), std::move(map)).first;
    }
    stage.map = it->second;
  }

  const auto test = anchors_of(all, Split::Test);
  const auto resolved = resolve_anchors(test, *tgt, *src);
  stage.unresolved = resolved.unresolved;
  if (!resolved.target_rows.empty())
    stage.retrieval = eval_retrieval(stage.map, gather(*tgt, resolved.target_rows), gather(*src, resolved.source_rows));
  stage.map.source_layer = c.source_layer;
  stage.map.target_layer = c.target_layer;
  return stage;
}

struct SenseStage {
  std::optional<DenseSenseBank> bank;
  std::optional<SenseMatrix> phi;
  std::optional<Dictionary> dictionary;
};

SenseStage build_senses(const RunConfig& c, RunCache::Impl& cache, const EmbeddingStore& source,
                        const SenseInventory& inventory) {
  const auto labels = read_labels(required(c, c.source_labels, "source_labels"), source);
  SenseStage stage;
  if (c.track == Track::Dense) {
    stage.bank = build_dense_bank(source, labels, inventory);
    return stage;
  }

  const auto dict_path = c.path(c.dictionary_store).value_or(*c.path(c.source_store));
  std::ostringstream key;
  key << dict_path.string() << '|' << c.k << '|' << c.lambda << '|' << c.epochs << '|' << c.batch << '|'
      << c.batch_rounds << '|' << c.seed;
  auto it = cache.dictionaries.find(key.str());
  if (it == cache.dictionaries.end()) {
    DictionaryOptions opt;
    opt.k = c.k;
    opt.lambda = c.lambda;
    opt.epochs = c.epochs;
    opt.batch = c.batch;
    opt.batch_rounds = c.batch_rounds;
    opt.seed = c.seed;
    it = cache.dictionaries.emplace(key.str(), learn_dictionary(*load_store(cache, dict_path), opt)).first;
  }
  stage.dictionary = it->second;

  std::vector<std::size_t> rows;
  SenseLabels annotated;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (!labels[i].empty()) {
      rows.push_back(i);
      annotated.push_back(labels[i]);
    }
  const auto codes = encode_rows(gather(source, rows), *stage.dictionary);
  PmiOptions pmi;
  pmi.normalized = c.normalized();
  pmi.smoothing = c.smoothing;
  pmi.binary_cooc = c.binary_cooc;
  stage.phi = build_phi(codes, annotated, inventory, pmi);
  return stage;
}

SplitResult infer_split(const RunConfig& c, RunCache::Impl& cache, const std::string& xml, const std::string& gold,
                        const std::string& store_key, const char* label, const SenseInventory& inventory,
                        const LinearMap& map, const SenseStage& senses) {
  const auto corpus = parse_xlwsd(required(c, xml, label), required(c, gold, label));
  const auto store = load_store(cache, required(c, store_key, label));

  SplitResult out;
  struct Pending {
    const WsdInstance* instance;
    const std::vector<std::string>* candidates;
    std::size_t row;
  };
  std::vector<Pending> pending;
  for (const auto& inst : corpus.instances) {
    const auto* candidates = inventory.candidates(inst.lemma, inst.pos);
    if (!candidates) {
      ++out.unknown_lemmas;
      continue;
    }
    const auto row = store->find_token(inst.sentence_index, inst.token_index);
    if (!row) {
      ++out.missing_embeddings;
      continue;
    }
    pending.push_back({&inst, candidates, *row});
  }

  std::vector<std::size_t> rows;
  for (const auto& p : pending) rows.push_back(p.row);
  const Eigen::MatrixXd x = gather(*store, rows);
  if (senses.bank) {
    for (std::size_t i = 0; i < pending.size(); ++i)
      out.predictions[pending[i].instance->instance_id] =
          infer_dense(x.row(static_cast<Eigen::Index>(i)).transpose(), *senses.bank, map, *pending[i].candidates);
  } else {
    const auto codes = encode_rows(x, *senses.dictionary, map);
    for (std::size_t i = 0; i < pending.size(); ++i)
      out.predictions[pending[i].instance->instance_id] = infer_sparse(codes[i], *senses.phi, *pending[i].candidates);
  }
  out.score = f_score(out.predictions, corpus.gold);
  return out;
}

GridKey key_of(const RunConfig& c) { return {c.source_layer, c.target_layer, c.map_kind, c.normalized()}; }

nlohmann::json score_json(const FScore& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
          {"correct", s.correct},     {"attempted", s.attempted}, {"total", s.total}};
}

nlohmann::json key_json(const GridKey& k) {
  return {{"source_layer", k.source_layer},
          {"target_layer", k.target_layer},
          {"map_kind", std::string(to_string(k.map_kind))},
          {"normalized", k.normalized}};
}

nlohmann::json retrieval_json(const std::optional<RetrievalResult>& r) {
  if (!r) return nullptr;
  return {{"accuracy_at_1", r->accuracy_at_1}, {"n", r->n}, {"ties", r->ties}};
}

}  // namespace

RunResult run(const RunConfig& config, RunCache* cache) {
  validate(config);
  RunCache local;
  auto& c = cache ? cache->impl() : local.impl();

  const auto source = load_store(c, required(config, config.source_store, "source_store"));
  const auto inventory = read_inventory(required(config, config.inventory, "inventory"));

  RunResult result;
  result.key = key_of(config);
  auto stage = fit_map(config, c, source->dim());
  result.map = std::move(stage.map);
  result.retrieval = stage.retrieval;
  result.unresolved_anchors = stage.unresolved;

  const auto senses = build_senses(config, c, *source, inventory);
  result.bank = senses.bank;
  result.phi = senses.phi;

  if (!config.dev_xml.empty()) {
    result.dev = infer_split(config, c, config.dev_xml, config.dev_gold, config.dev_store, "dev corpus", inventory,
                             result.map, senses);
    if (auto out = config.path(config.dev_predictions_out)) write_predictions(result.dev->predictions, *out);
  }
  if (!config.test_xml.empty()) {
    result.test = infer_split(config, c, config.test_xml, config.test_gold, config.test_store, "test corpus",
                              inventory, result.map, senses);
    if (auto out = config.path(config.predictions_out)) write_predictions(result.test->predictions, *out);
  }
  return result;
}

std::vector<RunConfig> enumerate_grid(const RunConfig& base) {
  std::vector<RunConfig> out;
  std::vector<std::optional<bool>> norms{std::nullopt};
  if (base.track == Track::Sparse) norms = {false, true};
  for (int s = -4; s <= -1; ++s)
    for (int t = -4; t <= -1; ++t) {
      if (base.regime == Regime::Multi && s != t) continue;
      std::vector<MapKind> kinds{MapKind::Isometric, MapKind::Rcsls};
      if (base.regime == Regime::Multi) kinds = {MapKind::Identity};
      for (MapKind kind : kinds)
        for (auto norm : norms) {
          RunConfig c = base;
          c.source_layer = s;
          c.target_layer = t;
          c.map_kind = kind;
          c.normalized_pmi = norm;
          out.push_back(std::move(c));
        }
    }
  std::stable_sort(out.begin(), out.end(),
                   [](const RunConfig& a, const RunConfig& b) { return tie_order_less(key_of(a), key_of(b)); });
  return out;
}

GridReport run_grid(std::span<const RunConfig> configs) {
  if (configs.empty()) throw Error(ErrorCode::EmptyGrid, "no configurations");
  GridReport report;
  report.regime = configs.front().regime;
  report.track = configs.front().track;
  std::vector<const RunConfig*> ordered;
  std::set<GridKey, GridKeyLess> keys;
  for (const auto& c : configs) {
    if (c.regime != report.regime || c.track != report.track)
      throw Error(ErrorCode::ConfigContradiction, "grid configs must share regime and track");
    if (c.dev_xml.empty()) throw Error(ErrorCode::MalformedConfig, "grid runs need a dev corpus");
    if (!keys.insert(key_of(c)).second)
      throw Error(ErrorCode::ConfigContradiction, "duplicate grid point " + to_string(key_of(c)));
    ordered.push_back(&c);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const RunConfig* a, const RunConfig* b) { return tie_order_less(key_of(*a), key_of(*b)); });

  RunCache cache;
  DevScores dev;
  for (const auto* c : ordered) {
    const auto r = run(*c, &cache);
    GridEntry e;
    e.config = *c;
    e.key = r.key;
    e.retrieval = r.retrieval;
    e.dev = r.dev->score;
    if (r.test) e.test = r.test->score;
    dev[e.key] = e.dev.f1;
    report.entries.push_back(std::move(e));
  }
  const auto best = select_hyperparams(dev);
  for (std::size_t i = 0; i < report.entries.size(); ++i)
    if (report.entries[i].key == best) report.selected = i;
  return report;
}

std::string to_json(const RunResult& r) {
  nlohmann::json j = key_json(r.key);
  j["retrieval"] = retrieval_json(r.retrieval);
  j["unresolved_anchors"] = r.unresolved_anchors;
  for (const auto& [name, split] : {std::pair{"dev", &r.dev}, std::pair{"test", &r.test}}) {
    if (!*split) continue;
    auto s = score_json((*split)->score);
    s["missing_embeddings"] = (*split)->missing_embeddings;
    s["unknown_lemmas"] = (*split)->unknown_lemmas;
    j[name] = s;
  }
  return j.dump(2);
}

std::string to_json(const GridReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : report.entries) {
    auto row = key_json(e.key);
    row["retrieval"] = retrieval_json(e.retrieval);
    row["dev"] = score_json(e.dev);
    row["test"] = e.test ? score_json(*e.test) : nlohmann::json(nullptr);
    rows.push_back(row);
  }
  const auto& sel = report.entries.at(report.selected);
  nlohmann::json j;
  j["regime"] = std::string(to_string(report.regime));
  j["track"] = std::string(to_string(report.track));
  j["runs"] = report.entries.size();
  j["selected"] = key_json(sel.key);
  j["selected"]["dev_f1"] = sel.dev.f1;
  j["selected"]["test_f1"] = sel.test ? nlohmann::json(sel.test->f1) : nlohmann::json(nullptr);
  j["configs"] = rows;
  return j.dump(2);
}

}  // namespace xsense
