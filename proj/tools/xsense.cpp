// xsense command line: thin wrappers over the library, one subcommand per stage.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>

#include "xsense/alignment.hpp"
#include "xsense/anchors.hpp"
#include "xsense/config.hpp"
#include "xsense/embstore.hpp"
#include "xsense/error.hpp"
#include "xsense/evaluation.hpp"
#include "xsense/pipeline.hpp"
#include "xsense/sensemodel.hpp"
#include "xsense/sparsecode.hpp"
#include "xsense/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace xsense;

namespace {

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text << '\n';
    return;
  }
  std::ofstream f(out);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + out);
  f << text << '\n';
}

json score_json(const FScore& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
          {"correct", s.correct},     {"attempted", s.attempted}, {"total", s.total}};
}

std::vector<double> read_samples(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, path.string() + ": not a number '" + tok + "'");
    }
  }
  return out;
}

std::vector<RunConfig> load_grid_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".toml") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<RunConfig> configs;
  for (const auto& f : files) configs.push_back(read_config(f));
  return configs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual sense disambiguation via aligned contextual embeddings"};
  app.require_subcommand(1);
  std::string out;

  // store inspect
  auto* store_cmd = app.add_subcommand("store", "Embedding store utilities")->require_subcommand(1);
  std::string store_path;
  auto* inspect = store_cmd->add_subcommand("inspect", "Print a .cemb header summary as JSON");
  inspect->add_option("file", store_path)->required();

  // anchors mine
  auto* anchors_cmd = app.add_subcommand("anchors", "Anchor mining")->require_subcommand(1);
  auto* mine = anchors_cmd->add_subcommand("mine", "Mine anchors from a parallel corpus and split them");
  std::string corpus, lexicon, backward;
  std::size_t train_cap = 20000;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  mine->add_option("--corpus", corpus, "pair_id<TAB>source<TAB>target")->required();
  mine->add_option("--lexicon", lexicon, "source<TAB>target forward lexicon")->required();
  mine->add_option("--backward", backward, "target<TAB>source lexicon; forward is transposed if absent");
  mine->add_option("--train-cap", train_cap);
  mine->add_option("--test-fraction", test_fraction);
  mine->add_option("--seed", seed);
  mine->add_option("--out", out)->required();

  // map fit / eval
  auto* map_cmd = app.add_subcommand("map", "Cross-lingual maps")->require_subcommand(1);
  std::string anchors_path, source_store, target_store, kind_name = "procrustes", map_path;
  RcslsOptions rcsls;
  auto* fit = map_cmd->add_subcommand("fit", "Fit a target->source map on train anchors");
  auto* map_eval = map_cmd->add_subcommand("eval", "accuracy@1 on test anchors");
  for (auto* c : {fit, map_eval}) {
    c->add_option("--anchors", anchors_path)->required();
    c->add_option("--source-store", source_store)->required();
    c->add_option("--target-store", target_store)->required();
  }
  fit->add_option("--kind", kind_name, "lstsq | procrustes | rcsls");
  fit->add_option("--neighbors", rcsls.neighbors);
  fit->add_option("--steps", rcsls.steps);
  fit->add_option("--out", out)->required();
  map_eval->add_option("--map", map_path, "omit for the identity map");

  // dict learn / encode
  auto* dict_cmd = app.add_subcommand("dict", "Dictionary learning and sparse coding")->require_subcommand(1);
  DictionaryOptions dict_opt;
  std::string dict_path;
  auto* learn = dict_cmd->add_subcommand("learn", "Learn a nonnegative sparse dictionary");
  learn->add_option("--store", store_path)->required();
  learn->add_option("--k", dict_opt.k);
  learn->add_option("--lambda", dict_opt.lambda);
  learn->add_option("--epochs", dict_opt.epochs);
  learn->add_option("--batch", dict_opt.batch);
  learn->add_option("--batch-rounds", dict_opt.batch_rounds, "code/atom alternations per minibatch");
  learn->add_option("--seed", dict_opt.seed);
  learn->add_option("--out", out)->required();
  auto* encode = dict_cmd->add_subcommand("encode", "Sparse codes for every record of a store");
  encode->add_option("--dict", dict_path)->required();
  encode->add_option("--store", store_path)->required();
  encode->add_option("--map", map_path, "map applied before coding");
  encode->add_option("--out", out)->required();

  // phi build / bank build
  std::string labels_path, inventory_path, codes_path;
  PmiOptions pmi;
  auto* phi_cmd = app.add_subcommand("phi", "PMI sense matrix")->require_subcommand(1);
  auto* phi_build = phi_cmd->add_subcommand("build", "Build (N)PMI from codes and labels");
  phi_build->add_option("--codes", codes_path)->required();
  phi_build->add_option("--store", store_path, "store the codes and labels were made from")->required();
  phi_build->add_option("--labels", labels_path)->required();
  phi_build->add_option("--inventory", inventory_path)->required();
  phi_build->add_flag("--normalized", pmi.normalized);
  phi_build->add_option("--smoothing", pmi.smoothing);
  phi_build->add_flag("--binary-cooc", pmi.binary_cooc);
  phi_build->add_option("--out", out)->required();
  auto* bank_cmd = app.add_subcommand("bank", "Dense sense centroids")->require_subcommand(1);
  auto* bank_build = bank_cmd->add_subcommand("build", "Per-sense centroids");
  bank_build->add_option("--store", store_path)->required();
  bank_build->add_option("--labels", labels_path)->required();
  bank_build->add_option("--inventory", inventory_path)->required();
  bank_build->add_option("--out", out)->required();

  // score
  std::vector<std::string> preds, golds;
  auto* score = app.add_subcommand("score", "F-score; repeat --pred/--gold for micro and macro averages");
  score->add_option("--pred", preds)->required();
  score->add_option("--gold", golds)->required();
  score->add_option("--out", out);

  // stats
  auto* stats = app.add_subcommand("stats", "Significance tests")->require_subcommand(1);
  std::string a_path, b_path, gold_path;
  bool no_correction = false;
  auto* mcn = stats->add_subcommand("mcnemar", "McNemar test on two prediction files");
  mcn->add_option("--a", a_path)->required();
  mcn->add_option("--b", b_path)->required();
  mcn->add_option("--gold", gold_path)->required();
  mcn->add_flag("--no-correction", no_correction);
  auto* ttest = stats->add_subcommand("ttest", "Welch t-test on two files of numbers");
  ttest->add_option("--a", a_path)->required();
  ttest->add_option("--b", b_path)->required();

  // run / grid
  std::string config_path, configs_dir;
  bool enumerate = false;
  auto* run_cmd = app.add_subcommand("run", "One end-to-end run");
  run_cmd->add_option("--config", config_path)->required();
  run_cmd->add_option("--out", out, "JSON result file");
  auto* grid_cmd = app.add_subcommand("grid", "Grid of runs with dev-set selection");
  auto* grid_dir = grid_cmd->add_option("--configs", configs_dir, "directory of *.toml configs");
  auto* grid_base = grid_cmd->add_option("--config", config_path, "base config to expand");
  grid_cmd->add_flag("--enumerate", enumerate, "expand --config over layer pairs, map kinds and normalization");
  grid_dir->excludes(grid_base);
  grid_cmd->add_option("--out", out, "JSON report file");

  // synth
  SyntheticOptions synth_opt;
  auto* synth = app.add_subcommand("synth", "Write a planted synthetic fixture");
  synth->add_option("--out", out)->required();
  synth->add_option("--seed", synth_opt.seed);
  synth->add_option("--layers", synth_opt.layers);
  synth->add_option("--noise", synth_opt.noise_sigma);
  synth->add_option("--layer-noise-step", synth_opt.layer_noise_step);
  synth->add_option("--spread", synth_opt.within_sigma);

  CLI11_PARSE(app, argc, argv);

  try {
    if (inspect->parsed()) {
      const auto store = read_store(store_path);
      json j{{"dim", store.dim()},
             {"count", store.count()},
             {"language", store.language()},
             {"encoder", store.encoder_tag()},
             {"bytes", encoded_size(store)}};
      j["layer"] = store.empty() ? json(nullptr) : json(static_cast<int>(store[0].layer));
      emit(j.dump(2), "");
    } else if (mine->parsed()) {
      const auto sentences = read_parallel_corpus(corpus);
      const auto lex = read_lexicon(lexicon, backward.empty() ? std::nullopt : std::optional<fs::path>(backward));
      const auto mined = mine_anchors(sentences, lex);
      const auto split = split_anchors(mined, train_cap, test_fraction, seed);
      write_anchors(split, out);
      emit(json{{"mined", mined.size()}, {"train", split.train.size()}, {"test", split.test.size()}}.dump(), "");
    } else if (fit->parsed() || map_eval->parsed()) {
      const auto all = read_anchors(anchors_path);
      const auto src = read_store(source_store);
      const auto tgt = read_store(target_store);
      std::vector<AnchorPair> chosen;
      for (const auto& a : all)
        if (a.split == (fit->parsed() ? Split::Train : Split::Test)) chosen.push_back(a);
      const auto resolved = resolve_anchors(chosen, tgt, src);
      Eigen::MatrixXd x(static_cast<Eigen::Index>(resolved.target_rows.size()), tgt.dim());
      Eigen::MatrixXd y(static_cast<Eigen::Index>(resolved.source_rows.size()), src.dim());
      for (std::size_t i = 0; i < resolved.target_rows.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = tgt.vector_at(resolved.target_rows[i]);
        y.row(static_cast<Eigen::Index>(i)) = src.vector_at(resolved.source_rows[i]);
      }
      if (fit->parsed()) {
        if (x.rows() < 2) throw Error(ErrorCode::InsufficientAnchors, "fewer than 2 training anchors resolved");
        const auto kind = parse_map_kind(kind_name);
        LinearMap map;
        if (kind == MapKind::LeastSquares)
          map = fit_least_squares(x, y).map;
        else if (kind == MapKind::Isometric)
          map = fit_procrustes(x, y);
        else if (kind == MapKind::Rcsls)
          map = fit_rcsls(x, y, fit_procrustes(x, y), rcsls).map;
        else
          map = LinearMap::identity(src.dim());
        write_map(map, out);
        emit(json{{"kind", std::string(to_string(map.kind))}, {"anchors", x.rows()},
                  {"unresolved", resolved.unresolved}}.dump(), "");
      } else {
        const auto map = map_path.empty() ? LinearMap::identity(src.dim()) : read_map(map_path);
        const auto r = eval_retrieval(map, x, y);
        emit(json{{"accuracy_at_1", r.accuracy_at_1}, {"n", r.n}, {"ties", r.ties},
                  {"unresolved", resolved.unresolved}}.dump(2), "");
      }
    } else if (learn->parsed()) {
      DictionaryTrace trace;
      const auto dict = learn_dictionary(read_store(store_path), dict_opt, &trace);
      write_dictionary(dict, out);
      emit(json{{"objective", trace.objective}, {"reseeded", trace.reseeded}}.dump(), "");
    } else if (encode->parsed()) {
      const auto dict = read_dictionary(dict_path);
      const std::optional<LinearMap> map = map_path.empty() ? std::nullopt : std::optional(read_map(map_path));
      const auto codes = encode_store(read_store(store_path), dict, map);
      write_codes(codes, static_cast<std::uint32_t>(dict.atoms.cols()), out);
    } else if (phi_build->parsed()) {
      const auto store = read_store(store_path);
      const auto codes = read_codes(codes_path);
      const auto labels = read_labels(labels_path, store);
      write_phi(build_phi(codes, labels, read_inventory(inventory_path), pmi), out);
    } else if (bank_build->parsed()) {
      const auto store = read_store(store_path);
      write_bank(build_dense_bank(store, read_labels(labels_path, store), read_inventory(inventory_path)), out);
    } else if (score->parsed()) {
      if (preds.size() != golds.size())
        throw Error(ErrorCode::LengthMismatch, "need one --gold per --pred");
      std::vector<FScore> scores;
      json per = json::array();
      for (std::size_t i = 0; i < preds.size(); ++i) {
        scores.push_back(f_score(read_predictions(preds[i]), read_gold(golds[i])));
        auto row = score_json(scores.back());
        row["predictions"] = preds[i];
        per.push_back(row);
      }
      const auto agg = aggregate(scores);
      emit(json{{"files", per}, {"micro", score_json(agg.micro)}, {"macro", score_json(agg.macro)}}.dump(2), out);
    } else if (mcn->parsed()) {
      const auto pair = contingency(read_predictions(a_path), read_predictions(b_path), read_gold(gold_path));
      const auto r = mcnemar(pair, !no_correction);
      emit(json{{"b", pair.b},
                {"c", pair.c},
                {"both_correct", pair.both_correct},
                {"both_wrong", pair.both_wrong},
                {"statistic", r.statistic},
                {"p_value", r.p_value}}
               .dump(2),
           "");
    } else if (ttest->parsed()) {
      const auto r = unpaired_t_test(read_samples(a_path), read_samples(b_path));
      emit(json{{"t", r.statistic}, {"dof", r.dof}, {"p_value", r.p_value}}.dump(2), "");
    } else if (run_cmd->parsed()) {
      emit(to_json(run(read_config(config_path))), out);
    } else if (grid_cmd->parsed()) {
      std::vector<RunConfig> configs;
      if (!configs_dir.empty())
        configs = load_grid_dir(configs_dir);
      else if (!config_path.empty())
        configs = enumerate ? enumerate_grid(read_config(config_path)) : std::vector{read_config(config_path)};
      else
        throw Error(ErrorCode::InvalidArgument, "grid needs --configs or --config");
      emit(to_json(run_grid(configs)), out);
    } else if (synth->parsed()) {
      write_synthetic(out, synth_opt);
    }
  } catch (const Error& e) {
    std::cerr << "xsense: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "xsense: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
