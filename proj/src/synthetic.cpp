#include "xsense/synthetic.hpp"

#include <fstream>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "xsense/anchors.hpp"
#include "xsense/embstore.hpp"
#include "xsense/error.hpp"
#include "xsense/random.hpp"

namespace xsense {

namespace {

Eigen::VectorXd gaussian(Rng& rng, Eigen::Index d, double sigma = 1.0) {
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = sigma * rng.normal();
  return v;
}

Eigen::MatrixXd orthogonal(Rng& rng, Eigen::Index d) {
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index j = 0; j < d; ++j) a.col(j) = gaussian(rng, d);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  for (Eigen::Index j = 0; j < d; ++j)
    if (qr.matrixQR()(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

std::vector<float> to_float(const Eigen::VectorXd& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
  return out;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  return out;
}

std::string layer_file(const std::string& stem, int layer) { return stem + ".L" + std::to_string(layer) + ".cemb"; }

std::string sense_id(std::size_t s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "bn:%08zun", s + 1);
  return buf;
}

struct Views {
  std::map<int, Eigen::MatrixXd> source;  // latent -> source space
  std::map<int, Eigen::MatrixXd> target;  // latent -> target space
  std::map<int, double> noise;
};

// One latent token rendered in every layer of one language.
void add_everywhere(std::map<int, EmbeddingStore>& stores, const std::map<int, Eigen::MatrixXd>& frames,
                    const std::map<int, double>* noise, Rng& rng, const Eigen::VectorXd& z, EmbeddingRecord record) {
  for (const auto& [layer, frame] : frames) {
    Eigen::VectorXd v = frame * z;
    if (noise) v += gaussian(rng, v.size(), noise->at(layer));
    record.layer = static_cast<std::int8_t>(layer);
    record.vector = to_float(v);
    stores.at(layer).add(record);
  }
}

std::map<int, EmbeddingStore> make_stores(const std::vector<int>& layers, std::uint32_t dim,
                                          const std::string& language) {
  std::map<int, EmbeddingStore> out;
  for (int layer : layers) out.emplace(layer, EmbeddingStore(dim, language, "synthetic"));
  return out;
}

void write_stores(const std::filesystem::path& dir, const std::string& stem,
                  const std::map<int, EmbeddingStore>& stores) {
  for (const auto& [layer, store] : stores) write_store(store, dir / layer_file(stem, layer));
}

void write_config(const std::filesystem::path& path, const std::string& track, int layer) {
  auto out = open_output(path);
  out << "regime = mono_mono\n"
      << "track = " << track << "\n"
      << "map_kind = procrustes\n"
      << "source_layer = " << layer << "\n"
      << "target_layer = " << layer << "\n";
  if (track == "sparse") out << "normalized_pmi = false\nk = 10\nlambda = 0.05\nepochs = 10\nbatch = 32\n";
  out << "seed = 1\n"
      << "source_store = \"src_train.L{source_layer}.cemb\"\n"
      << "source_labels = \"src_train.labels\"\n"
      << "anchors = \"anchors.tsv\"\n"
      << "anchor_source_store = \"anchors_src.L{source_layer}.cemb\"\n"
      << "anchor_target_store = \"anchors_tgt.L{target_layer}.cemb\"\n"
      << "inventory = \"inventory.txt\"\n"
      << "dev_xml = \"dev.xml\"\n"
      << "dev_gold = \"dev.gold.txt\"\n"
      << "dev_store = \"tgt_dev.L{target_layer}.cemb\"\n"
      << "test_xml = \"test.xml\"\n"
      << "test_gold = \"test.gold.txt\"\n"
      << "test_store = \"tgt_test.L{target_layer}.cemb\"\n";
}

}  // namespace

void write_synthetic(const std::filesystem::path& dir, const SyntheticOptions& opt) {
  if (opt.dim == 0 || opt.senses == 0 || opt.layers.empty())
    throw Error(ErrorCode::InvalidArgument, "synthetic fixture needs dim, senses and layers");
  for (int layer : opt.layers)
    if (layer < -4 || layer > -1) throw Error(ErrorCode::InvalidArgument, "layers must be in {-4,...,-1}");
  std::filesystem::create_directories(dir);
  Rng rng(opt.seed);
  const auto d = static_cast<Eigen::Index>(opt.dim);

  std::vector<Eigen::VectorXd> centers;
  for (std::size_t s = 0; s < opt.senses; ++s) centers.push_back(opt.center_norm * gaussian(rng, d).normalized());

  Views views;
  for (int layer : opt.layers) {
    views.source[layer] = opt.rotate ? orthogonal(rng, d) : Eigen::MatrixXd::Identity(d, d);
    views.target[layer] = opt.rotate ? orthogonal(rng, d) : Eigen::MatrixXd::Identity(d, d);
    views.noise[layer] = opt.noise_sigma + opt.layer_noise_step * (-1 - layer);
  }
  auto token = [&](std::size_t s) { return Eigen::VectorXd(centers[s] + gaussian(rng, d, opt.within_sigma)); };

  // Annotated source tokens, one sentence each.
  auto source = make_stores(opt.layers, opt.dim, "src");
  {
    auto labels = open_output(dir / "src_train.labels");
    std::uint64_t id = 0;
    for (std::size_t s = 0; s < opt.senses; ++s)
      for (std::size_t i = 0; i < opt.train_per_sense; ++i, ++id) {
        add_everywhere(source, views.source, nullptr, rng, token(s), {id, id, 0, "word", "word", -1, {}});
        labels << id << '\t' << sense_id(s) << '\n';
      }
  }
  write_stores(dir, "src_train", source);

  {
    auto inv = open_output(dir / "inventory.txt");
    inv << "word#n";
    for (std::size_t s = 0; s < opt.senses; ++s) inv << '\t' << sense_id(s);
    inv << '\n';
  }

  // Anchors: generic latent points seen by both languages.
  auto anchor_src = make_stores(opt.layers, opt.dim, "src");
  auto anchor_tgt = make_stores(opt.layers, opt.dim, "tgt");
  std::vector<MinedAnchor> mined;
  for (std::uint64_t p = 0; p < opt.anchors; ++p) {
    const Eigen::VectorXd z = gaussian(rng, d);
    add_everywhere(anchor_src, views.source, nullptr, rng, z, {p, p, 0, "a", std::nullopt, -1, {}});
    add_everywhere(anchor_tgt, views.target, &views.noise, rng, z, {p, p, 0, "a", std::nullopt, -1, {}});
    mined.push_back({p, 0, 0});
  }
  write_stores(dir, "anchors_src", anchor_src);
  write_stores(dir, "anchors_tgt", anchor_tgt);
  write_anchors(split_anchors(mined, 20000, 0.2, opt.seed), dir / "anchors.tsv");

  // Target evaluation corpora: "the word" sentences, instance at token 1.
  for (const std::string split : {"dev", "test"}) {
    auto stores = make_stores(opt.layers, opt.dim, "tgt");
    auto xml = open_output(dir / (split + ".xml"));
    auto gold = open_output(dir / (split + ".gold.txt"));
    xml << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<corpus lang=\"tgt\" source=\"synthetic\">\n"
        << "<text id=\"" << split << "\">\n";
    std::uint64_t sentence = 0;
    for (std::size_t i = 0; i < opt.eval_per_sense; ++i)
      for (std::size_t s = 0; s < opt.senses; ++s, ++sentence) {
        const std::string key = split + ".s" + std::to_string(sentence);
        const std::string inst = key + ".t001";
        xml << "<sentence id=\"" << key << "\">\n"
            << "<wf lemma=\"the\" pos=\"DET\">the</wf>\n"
            << "<instance id=\"" << inst << "\" lemma=\"word\" pos=\"NOUN\">word</instance>\n"
            << "</sentence>\n";
        gold << inst << ' ' << sense_id(s) << '\n';
        add_everywhere(stores, views.target, &views.noise, rng, gaussian(rng, d),
                       {2 * sentence, sentence, 0, "the", "the", -1, {}});
        add_everywhere(stores, views.target, &views.noise, rng, token(s),
                       {2 * sentence + 1, sentence, 1, "word", "word", -1, {}});
      }
    xml << "</text>\n</corpus>\n";
    write_stores(dir, "tgt_" + split, stores);
  }

  write_config(dir / "run_dense.toml", "dense", opt.layers.back());
  write_config(dir / "run_sparse.toml", "sparse", opt.layers.back());
}

}  // namespace xsense
