#include "xsense/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "xsense/error.hpp"

namespace xsense {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Strips a trailing comment that is not inside quotes.
std::string_view strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

[[noreturn]] void bad(const std::string& where, const std::string& msg) {
  throw Error(ErrorCode::MalformedConfig, where + ": " + msg);
}

template <class T>
T parse_number(std::string_view v, const std::string& where) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) bad(where, "not a number: '" + std::string(v) + "'");
  return out;
}

bool parse_bool(std::string_view v, const std::string& where) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad(where, "expected true or false, got '" + std::string(v) + "'");
}

using Setter = std::function<void(RunConfig&, std::string_view, const std::string&)>;

template <class T>
Setter number(T RunConfig::*field) {
  return [field](RunConfig& c, std::string_view v, const std::string& w) { c.*field = parse_number<T>(v, w); };
}

Setter text(std::string RunConfig::*field) {
  return [field](RunConfig& c, std::string_view v, const std::string&) { c.*field = std::string(v); };
}

Setter flag(bool RunConfig::*field) {
  return [field](RunConfig& c, std::string_view v, const std::string& w) { c.*field = parse_bool(v, w); };
}

template <class F>
Setter enumerated(F parse) {
  return [parse](RunConfig& c, std::string_view v, const std::string& w) {
    try {
      parse(c, v);
    } catch (const Error& e) {
      bad(w, e.what());
    }
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table{
      {"regime", enumerated([](RunConfig& c, std::string_view v) { c.regime = parse_regime(v); })},
      {"track", enumerated([](RunConfig& c, std::string_view v) { c.track = parse_track(v); })},
      {"map_kind", enumerated([](RunConfig& c, std::string_view v) { c.map_kind = parse_map_kind(v); })},
      {"source_layer", number(&RunConfig::source_layer)},
      {"target_layer", number(&RunConfig::target_layer)},
      {"normalized_pmi",
       [](RunConfig& c, std::string_view v, const std::string& w) { c.normalized_pmi = parse_bool(v, w); }},
      {"k", number(&RunConfig::k)},
      {"lambda", number(&RunConfig::lambda)},
      {"epochs", number(&RunConfig::epochs)},
      {"batch", number(&RunConfig::batch)},
      {"batch_rounds", number(&RunConfig::batch_rounds)},
      {"smoothing", number(&RunConfig::smoothing)},
      {"binary_cooc", flag(&RunConfig::binary_cooc)},
      {"seed", number(&RunConfig::seed)},
      {"rcsls_neighbors", number(&RunConfig::rcsls_neighbors)},
      {"rcsls_steps", number(&RunConfig::rcsls_steps)},
      {"source_store", text(&RunConfig::source_store)},
      {"source_labels", text(&RunConfig::source_labels)},
      {"dictionary_store", text(&RunConfig::dictionary_store)},
      {"anchors", text(&RunConfig::anchors)},
      {"anchor_source_store", text(&RunConfig::anchor_source_store)},
      {"anchor_target_store", text(&RunConfig::anchor_target_store)},
      {"map_file", text(&RunConfig::map_file)},
      {"inventory", text(&RunConfig::inventory)},
      {"dev_xml", text(&RunConfig::dev_xml)},
      {"dev_gold", text(&RunConfig::dev_gold)},
      {"dev_store", text(&RunConfig::dev_store)},
      {"test_xml", text(&RunConfig::test_xml)},
      {"test_gold", text(&RunConfig::test_gold)},
      {"test_store", text(&RunConfig::test_store)},
      {"predictions_out", text(&RunConfig::predictions_out)},
      {"dev_predictions_out", text(&RunConfig::dev_predictions_out)},
  };
  return table;
}

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::Multi: return "multi";
    case Regime::MultiMulti: return "multi_multi";
    case Regime::MultiMono: return "multi_mono";
    case Regime::MonoMulti: return "mono_multi";
    case Regime::MonoMono: return "mono_mono";
  }
  return "?";
}

std::string_view to_string(Track track) { return track == Track::Dense ? "dense" : "sparse"; }

Regime parse_regime(std::string_view name) {
  for (Regime r : {Regime::Multi, Regime::MultiMulti, Regime::MultiMono, Regime::MonoMulti, Regime::MonoMono})
    if (to_string(r) == name) return r;
  throw Error(ErrorCode::InvalidArgument, "unknown regime '" + std::string(name) + "'");
}

Track parse_track(std::string_view name) {
  if (name == "dense") return Track::Dense;
  if (name == "sparse") return Track::Sparse;
  throw Error(ErrorCode::InvalidArgument, "unknown track '" + std::string(name) + "'");
}

std::optional<std::filesystem::path> RunConfig::path(const std::string& value) const {
  if (value.empty()) return std::nullopt;
  std::string s = value;
  replace_all(s, "{source_layer}", std::to_string(source_layer));
  replace_all(s, "{target_layer}", std::to_string(target_layer));
  std::filesystem::path p(s);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return p;
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig config;
  config.base_dir = base_dir;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto where = "line " + std::to_string(line_no);
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) bad(where, "expected `key = value`");
    const auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'')) {
      if (value.back() != value.front()) bad(where, "unterminated quote");
      value = value.substr(1, value.size() - 2);
    }
    const auto it = setters().find(key);
    if (it == setters().end()) bad(where, "unknown key '" + std::string(key) + "'");
    if (!seen.emplace(key).second) bad(where, "duplicate key '" + std::string(key) + "'");
    it->second(config, value, where);
  }
  return config;
}

RunConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str(), path.parent_path());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedConfig) throw Error(e.code(), path.string() + " " + e.what());
    throw;
  }
}

std::string format_config(const RunConfig& c) {
  std::ostringstream out;
  out << "regime = " << to_string(c.regime) << '\n'
      << "track = " << to_string(c.track) << '\n'
      << "map_kind = " << to_string(c.map_kind) << '\n'
      << "source_layer = " << c.source_layer << '\n'
      << "target_layer = " << c.target_layer << '\n';
  if (c.normalized_pmi) out << "normalized_pmi = " << (*c.normalized_pmi ? "true" : "false") << '\n';
  out << "k = " << c.k << '\n'
      << "lambda = " << format_double(c.lambda) << '\n'
      << "epochs = " << c.epochs << '\n'
      << "batch = " << c.batch << '\n'
      << "batch_rounds = " << c.batch_rounds << '\n'
      << "smoothing = " << format_double(c.smoothing) << '\n'
      << "binary_cooc = " << (c.binary_cooc ? "true" : "false") << '\n'
      << "seed = " << c.seed << '\n'
      << "rcsls_neighbors = " << c.rcsls_neighbors << '\n'
      << "rcsls_steps = " << c.rcsls_steps << '\n';
  const std::pair<const char*, const std::string*> paths[] = {
      {"source_store", &c.source_store},
      {"source_labels", &c.source_labels},
      {"dictionary_store", &c.dictionary_store},
      {"anchors", &c.anchors},
      {"anchor_source_store", &c.anchor_source_store},
      {"anchor_target_store", &c.anchor_target_store},
      {"map_file", &c.map_file},
      {"inventory", &c.inventory},
      {"dev_xml", &c.dev_xml},
      {"dev_gold", &c.dev_gold},
      {"dev_store", &c.dev_store},
      {"test_xml", &c.test_xml},
      {"test_gold", &c.test_gold},
      {"test_store", &c.test_store},
      {"predictions_out", &c.predictions_out},
      {"dev_predictions_out", &c.dev_predictions_out},
  };
  for (const auto& [key, value] : paths)
    if (!value->empty()) out << key << " = \"" << *value << "\"\n";
  return out.str();
}

void validate(const RunConfig& c) {
  auto contradiction = [](const std::string& msg) { throw Error(ErrorCode::ConfigContradiction, msg); };
  if (c.regime == Regime::Multi) {
    if (c.map_kind != MapKind::Identity) contradiction("regime multi requires map_kind = identity");
    if (c.source_layer != c.target_layer) contradiction("regime multi requires source_layer = target_layer");
  } else if (c.map_kind == MapKind::Identity) {
    contradiction("map_kind identity is only meaningful in regime multi");
  }
  if (c.track == Track::Dense && c.normalized_pmi) contradiction("normalized_pmi must be unset on the dense track");

  auto hyper = [](bool ok, const std::string& msg) {
    if (!ok) throw Error(ErrorCode::InvalidHyperparameter, msg);
  };
  for (int layer : {c.source_layer, c.target_layer})
    hyper(layer >= -4 && layer <= -1, "layers are relative indices in {-4,-3,-2,-1}");
  hyper(c.k >= 1, "k must be >= 1");
  hyper(c.lambda >= 0.0, "lambda must be >= 0");
  hyper(c.epochs >= 1 && c.batch >= 1 && c.batch_rounds >= 1, "epochs, batch and batch_rounds must be >= 1");
  hyper(c.smoothing >= 0.0, "smoothing must be >= 0");
  hyper(c.rcsls_neighbors >= 1 && c.rcsls_steps >= 0, "bad RCSLS settings");
}

}  // namespace xsense
