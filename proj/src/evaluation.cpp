#include "xsense/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "xsense/error.hpp"
#include "xsense/sensemodel.hpp"
#include "xsense/special_functions.hpp"

namespace xsense {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string attribute(const pt::ptree& node, const std::string& name) {
  return node.get<std::string>("<xmlattr>." + name, "");
}

struct XmlWalker {
  std::vector<WsdInstance>& out;
  std::set<std::string> seen;
  std::uint64_t sentence_ordinal = 0;

  void sentence(const pt::ptree& node) {
    const std::string key = attribute(node, "id");
    std::uint32_t token = 0;
    for (const auto& [tag, child] : node) {
      if (tag == "wf") {
        ++token;
      } else if (tag == "instance") {
        WsdInstance inst;
        inst.instance_id = attribute(child, "id");
        if (inst.instance_id.empty())
          throw Error(ErrorCode::MalformedXml, "instance without id in sentence '" + key + "'");
        if (!seen.insert(inst.instance_id).second)
          throw Error(ErrorCode::MalformedXml, "duplicate instance id '" + inst.instance_id + "'");
        inst.lemma = attribute(child, "lemma");
        inst.pos = normalize_pos(attribute(child, "pos"));
        inst.sentence_key = key;
        inst.sentence_index = sentence_ordinal;
        inst.token_index = token++;
        inst.surface = trim(child.data());
        out.push_back(std::move(inst));
      }
    }
    ++sentence_ordinal;
  }

  void walk(const pt::ptree& node) {
    for (const auto& [tag, child] : node) {
      if (tag == "sentence")
        sentence(child);
      else if (tag != "<xmlattr>" && tag != "<xmlcomment>")
        walk(child);
    }
  }
};

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  return in;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

bool is_correct(const Predictions& preds, const std::string& id, const std::vector<std::string>& keys) {
  const auto it = preds.find(id);
  return it != preds.end() && std::find(keys.begin(), keys.end(), it->second) != keys.end();
}

}  // namespace

GoldKeys read_gold(const std::filesystem::path& path) {
  auto in = open_input(path);
  GoldKeys gold;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() < 2) throw Error(ErrorCode::InvalidArgument, where + ": gold line without keys");
    auto& keys = gold[fields[0]];
    if (!keys.empty()) throw Error(ErrorCode::InvalidArgument, where + ": duplicate gold id '" + fields[0] + "'");
    keys.assign(fields.begin() + 1, fields.end());
  }
  return gold;
}

WsdCorpus parse_xlwsd(const std::filesystem::path& xml_path, const std::filesystem::path& gold_path) {
  auto in = open_input(xml_path);
  pt::ptree tree;
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::MalformedXml, xml_path.string() + ": " + e.message() + " at line " +
                                             std::to_string(e.line()));
  }
  WsdCorpus corpus;
  XmlWalker walker{corpus.instances, {}, 0};
  walker.walk(tree);

  corpus.gold = read_gold(gold_path);
  for (const auto& inst : corpus.instances)
    if (!corpus.gold.contains(inst.instance_id))
      throw Error(ErrorCode::MissingGold, "instance '" + inst.instance_id + "' has no gold key");
  for (const auto& [id, keys] : corpus.gold)
    if (!walker.seen.contains(id)) corpus.dangling_gold.push_back(id);
  return corpus;
}

Predictions read_predictions(const std::filesystem::path& path) {
  auto in = open_input(path);
  Predictions preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() != 2)
      throw Error(ErrorCode::InvalidArgument,
                  path.string() + ":" + std::to_string(line_no) + ": expected `instance_id sense`");
    preds[fields[0]] = fields[1];
  }
  return preds;
}

void write_predictions(const Predictions& predictions, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  for (const auto& [id, sense] : predictions) out << id << ' ' << sense << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

FScore f_score(const Predictions& predictions, const GoldKeys& gold) {
  FScore s;
  s.total = gold.size();
  for (const auto& [id, keys] : gold) {
    if (!predictions.contains(id)) continue;
    ++s.attempted;
    if (is_correct(predictions, id, keys)) ++s.correct;
  }
  s.precision = ratio(s.correct, s.attempted);
  s.recall = ratio(s.correct, s.total);
  // 2PR/(P+R) simplifies to 2c/(a+g); this form is exact in binary.
  s.f1 = ratio(2 * s.correct, s.attempted + s.total);
  return s;
}

Aggregate aggregate(std::span<const FScore> scores) {
  Aggregate agg;
  if (scores.empty()) return agg;
  for (const auto& s : scores) {
    agg.micro.correct += s.correct;
    agg.micro.attempted += s.attempted;
    agg.micro.total += s.total;
    agg.macro.precision += s.precision;
    agg.macro.recall += s.recall;
    agg.macro.f1 += s.f1;
  }
  agg.micro.precision = ratio(agg.micro.correct, agg.micro.attempted);
  agg.micro.recall = ratio(agg.micro.correct, agg.micro.total);
  agg.micro.f1 = ratio(2 * agg.micro.correct, agg.micro.attempted + agg.micro.total);
  const auto n = static_cast<double>(scores.size());
  agg.macro.precision /= n;
  agg.macro.recall /= n;
  agg.macro.f1 /= n;
  agg.macro.correct = agg.micro.correct;
  agg.macro.attempted = agg.micro.attempted;
  agg.macro.total = agg.micro.total;
  return agg;
}

ContingencyPair contingency(const Predictions& a, const Predictions& b, const GoldKeys& gold) {
  ContingencyPair pair;
  for (const auto& [id, keys] : gold) {
    const bool ra = is_correct(a, id, keys);
    const bool rb = is_correct(b, id, keys);
    if (ra && rb)
      ++pair.both_correct;
    else if (ra)
      ++pair.b;
    else if (rb)
      ++pair.c;
    else
      ++pair.both_wrong;
  }
  return pair;
}

TestResult mcnemar(const ContingencyPair& pair, bool continuity) {
  const std::size_t discordant = pair.b + pair.c;
  if (discordant == 0) throw Error(ErrorCode::DegenerateTable, "McNemar needs b + c >= 1");
  double diff = std::abs(static_cast<double>(pair.b) - static_cast<double>(pair.c));
  if (continuity) diff -= 1.0;
  TestResult r;
  r.dof = 1.0;
  r.statistic = diff * diff / static_cast<double>(discordant);
  r.p_value = chi2_sf(r.statistic, 1.0);
  return r;
}

TestResult unpaired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw Error(ErrorCode::InsufficientSample, "t-test needs at least 2 values per sample");
  auto moments = [](std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double qa = va / na;
  const double qb = vb / nb;
  const double se2 = qa + qb;
  if (!(se2 > 0.0)) throw Error(ErrorCode::ZeroVariance, "both samples have zero variance");
  TestResult r;
  r.statistic = (ma - mb) / std::sqrt(se2);
  r.dof = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  r.p_value = student_t_two_sided(r.statistic, r.dof);
  return r;
}

bool tie_order_less(const GridKey& a, const GridKey& b) {
  return std::tuple(a.source_layer, a.target_layer, to_string(a.map_kind), a.normalized) <
         std::tuple(b.source_layer, b.target_layer, to_string(b.map_kind), b.normalized);
}

GridKey select_hyperparams(const DevScores& dev_scores) {
  if (dev_scores.empty()) throw Error(ErrorCode::EmptyGrid, "no configurations to select from");
  auto best = dev_scores.begin();
  for (auto it = std::next(best); it != dev_scores.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

std::string to_string(const GridKey& key) {
  return "src" + std::to_string(key.source_layer) + "_tgt" + std::to_string(key.target_layer) + "_" +
         std::string(to_string(key.map_kind)) + (key.normalized ? "_npmi" : "_pmi");
}

}  // namespace xsense
