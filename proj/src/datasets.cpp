#include "hypersage/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hypersage/error.hpp"
#include "hypersage/random.hpp"

namespace hypersage {

namespace fs = std::filesystem;

void DatasetBundle::validate() const {
  if (features.rows() != hypergraph.num_nodes()) {
    throw DatasetError(name + ": " + std::to_string(features.rows()) + " feature rows for " +
                       std::to_string(hypergraph.num_nodes()) + " nodes");
  }
  if (labels.size() != hypergraph.num_nodes()) {
    throw DatasetError(name + ": " + std::to_string(labels.size()) + " labels for " +
                       std::to_string(hypergraph.num_nodes()) + " nodes");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw DatasetError(name + ": label " + std::to_string(labels[i]) + " of node " + std::to_string(i) +
                         " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  for (double v : features.data()) {
    if (!std::isfinite(v) || v < 0.0) throw DatasetError(name + ": features must be finite and non-negative");
  }
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("missing file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits text into lines (LF, tolerating a trailing CR), keeping empty lines
// so that line numbers stay meaningful.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

bool is_sep(char c, bool allow_comma) { return c == ' ' || c == '\t' || (allow_comma && c == ','); }

std::vector<std::string_view> tokens(std::string_view line, bool allow_comma) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i], allow_comma)) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_sep(line[j], allow_comma)) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::string where(const fs::path& file, std::size_t line) {
  return file.filename().string() + ":" + std::to_string(line + 1);
}

template <typename T>
T parse_int(std::string_view tok, const fs::path& file, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw DatasetError(where(file, line) + ": expected an integer, got '" + std::string(tok) + "'");
  }
  return v;
}

double parse_double(std::string_view tok, const fs::path& file, std::size_t line) {
  double v{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw DatasetError(where(file, line) + ": non-numeric feature value '" + std::string(tok) + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Matrix parse_dense_features(std::string_view text, const fs::path& file, bool allow_comma) {
  const auto lines = split_lines(text);
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) {
      if (i + 1 == lines.size()) break;
      throw DatasetError(where(file, i) + ": empty feature line");
    }
    const auto toks = tokens(lines[i], allow_comma);
    if (rows == 0) cols = toks.size();
    if (toks.size() != cols) {
      throw DatasetError(where(file, i) + ": " + std::to_string(toks.size()) + " values, expected " +
                         std::to_string(cols));
    }
    for (auto t : toks) data.push_back(parse_double(t, file, i));
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

}  // namespace

DatasetBundle load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
  const fs::path edges_path = dir / "hyperedges.txt";
  const fs::path features_path = dir / "features.tsv";
  const fs::path labels_path = dir / "labels.tsv";
  const std::string edges_text = read_file(edges_path);
  const std::string features_text = read_file(features_path);
  const std::string labels_text = read_file(labels_path);

  DatasetBundle b;
  b.name = dir.filename().string();
  if (b.name.empty()) b.name = dir.parent_path().filename().string();
  b.features = parse_dense_features(features_text, features_path, false);
  const std::size_t n = b.features.rows();

  const auto label_lines = split_lines(labels_text);
  int max_label = -1;
  for (std::size_t i = 0; i < label_lines.size(); ++i) {
    if (is_blank(label_lines[i]) && i + 1 == label_lines.size()) break;
    const auto toks = tokens(label_lines[i], false);
    if (toks.size() != 1) throw DatasetError(where(labels_path, i) + ": expected one class id");
    const int label = parse_int<int>(toks[0], labels_path, i);
    if (label < 0) throw DatasetError(where(labels_path, i) + ": negative class id");
    b.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  if (b.labels.size() != n) {
    throw DatasetError(labels_path.string() + ": " + std::to_string(b.labels.size()) + " labels for " +
                       std::to_string(n) + " feature rows");
  }
  b.num_classes = static_cast<std::size_t>(max_label + 1);

  const fs::path meta_path = dir / "meta.json";
  if (fs::exists(meta_path)) {
    try {
      const auto meta = nlohmann::json::parse(read_file(meta_path));
      if (meta.contains("name")) b.name = meta.at("name").get<std::string>();
      if (meta.contains("num_classes")) {
        const auto c = meta.at("num_classes").get<std::size_t>();
        if (c < b.num_classes) throw DatasetError(meta_path.string() + ": num_classes smaller than the largest label");
        b.num_classes = c;
      }
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(meta_path.string() + ": " + e.what());
    }
  }

  std::vector<std::vector<NodeId>> edges;
  const auto edge_lines = split_lines(edges_text);
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    const auto toks = tokens(edge_lines[i], false);
    if (toks.empty()) {
      if (i + 1 == edge_lines.size()) break;
      throw DatasetError(where(edges_path, i) + ": empty hyperedge");
    }
    std::vector<NodeId> e;
    for (auto t : toks) {
      const auto v = parse_int<NodeId>(t, edges_path, i);
      if (v >= n) throw DatasetError(where(edges_path, i) + ": node " + std::to_string(v) + " >= N=" + std::to_string(n));
      e.push_back(v);
    }
    edges.push_back(std::move(e));
  }
  b.hypergraph = Hypergraph(n, std::move(edges));
  b.validate();
  return b;
}

void write_dataset(const DatasetBundle& bundle, const fs::path& dir) {
  bundle.validate();
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "hyperedges.txt", std::ios::binary);
    for (const auto& e : bundle.hypergraph.edges()) {
      for (std::size_t i = 0; i < e.size(); ++i) out << (i ? " " : "") << e[i];
      out << '\n';
    }
    if (!out) throw DatasetError("failed writing hyperedges.txt in " + dir.string());
  }
  {
    std::ofstream out(dir / "features.tsv", std::ios::binary);
    std::string line;
    for (std::size_t r = 0; r < bundle.features.rows(); ++r) {
      line.clear();
      const auto row = bundle.features.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) line += '\t';
        line += format_double(row[c]);
      }
      line += '\n';
      out << line;
    }
    if (!out) throw DatasetError("failed writing features.tsv in " + dir.string());
  }
  {
    std::ofstream out(dir / "labels.tsv", std::ios::binary);
    for (int l : bundle.labels) out << l << '\n';
    if (!out) throw DatasetError("failed writing labels.tsv in " + dir.string());
  }
  {
    std::ofstream out(dir / "meta.json", std::ios::binary);
    nlohmann::json meta{{"name", bundle.name}, {"num_classes", bundle.num_classes}};
    out << meta.dump(2) << '\n';
  }
}

DatasetStats dataset_stats(const DatasetBundle& bundle) {
  DatasetStats s;
  s.num_nodes = bundle.num_nodes();
  s.num_edges = bundle.hypergraph.num_edges();
  s.num_features = bundle.features.cols();
  s.num_classes = bundle.num_classes;
  if (s.num_edges > 0) {
    double sum = 0.0;
    for (const auto& e : bundle.hypergraph.edges()) sum += static_cast<double>(e.size());
    s.mean_cardinality = sum / static_cast<double>(s.num_edges);
    double sq = 0.0;
    for (const auto& e : bundle.hypergraph.edges()) {
      const double d = static_cast<double>(e.size()) - s.mean_cardinality;
      sq += d * d;
    }
    s.std_cardinality = std::sqrt(sq / static_cast<double>(s.num_edges));
  }
  return s;
}

SplitSpec make_transductive_split(const DatasetBundle& bundle, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1), got " + std::to_string(train_fraction));
  }
  const std::size_t n = bundle.num_nodes();
  std::vector<std::vector<NodeId>> by_class(bundle.num_classes);
  for (NodeId v = 0; v < n; ++v) by_class[static_cast<std::size_t>(bundle.labels[v])].push_back(v);

  // Largest-remainder allocation of round(fraction * N) training slots.
  const auto target = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> quota(by_class.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const double exact = train_fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i) {
    const std::size_t c = remainders[i].second;
    if (quota[c] < by_class[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  SplitSpec split;
  split.kind = SplitKind::kTransductive;
  split.seed = seed;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (quota[c] == 0) {
      throw InvalidArgument("class " + std::to_string(c) + " would have no training nodes at fraction " +
                            std::to_string(train_fraction));
    }
    Rng rng(derive_seed(seed, {c}));
    rng.shuffle(members.begin(), members.end());
    split.train_ids.insert(split.train_ids.end(), members.begin(), members.begin() + static_cast<long>(quota[c]));
    split.test_ids.insert(split.test_ids.end(), members.begin() + static_cast<long>(quota[c]), members.end());
  }
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

Hypergraph remove_nodes(const Hypergraph& h, const std::vector<NodeId>& removed) {
  std::vector<bool> drop(h.num_nodes(), false);
  for (NodeId v : removed) {
    if (v >= h.num_nodes()) throw InvalidArgument("node " + std::to_string(v) + " out of range");
    drop[v] = true;
  }
  std::vector<std::vector<NodeId>> edges;
  for (const auto& e : h.edges()) {
    std::vector<NodeId> kept;
    for (NodeId v : e)
      if (!drop[v]) kept.push_back(v);
    if (!kept.empty()) edges.push_back(std::move(kept));
  }
  return Hypergraph(h.num_nodes(), std::move(edges));
}

InductiveSplit make_inductive_split(const DatasetBundle& bundle, std::uint64_t seed) {
  if (bundle.num_nodes() < 5) throw InvalidArgument("dataset too small for an inductive split");
  SplitSpec split;
  try {
    split = make_transductive_split(bundle, 0.2, seed);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("dataset too small for an inductive split: ") + e.what());
  }
  split.kind = SplitKind::kInductive;
  std::vector<NodeId> test = split.test_ids;
  Rng rng(derive_seed(seed, {0x756e7365656eULL}));
  rng.shuffle(test.begin(), test.end());
  const std::size_t unseen = test.size() / 2;
  split.unseen_test_ids.assign(test.begin(), test.begin() + static_cast<long>(unseen));
  split.seen_test_ids.assign(test.begin() + static_cast<long>(unseen), test.end());
  if (split.train_ids.empty() || split.seen_test_ids.empty() || split.unseen_test_ids.empty()) {
    throw InvalidArgument("dataset too small to populate train, seen and unseen sets");
  }
  std::sort(split.seen_test_ids.begin(), split.seen_test_ids.end());
  std::sort(split.unseen_test_ids.begin(), split.unseen_test_ids.end());
  Hypergraph train_h = remove_nodes(bundle.hypergraph, split.unseen_test_ids);
  return InductiveSplit{std::move(split), std::move(train_h)};
}

ConvertReport convert_external(const fs::path& edges_path, const fs::path& features_path, const fs::path& labels_path,
                               const RawFormat& format, const fs::path& out_dir) {
  ConvertReport report;
  DatasetBundle& b = report.bundle;
  b.name = format.name;
  const long offset = format.one_indexed ? 1 : 0;

  auto node_id = [&](std::string_view tok, const fs::path& file, std::size_t line) -> long {
    const long v = parse_int<long>(tok, file, line) - offset;
    if (v < 0) throw DatasetError(where(file, line) + ": node id below the index base");
    return v;
  };

  // Labels: a single class id per line, or "node label" pairs.
  std::map<long, int> pair_labels;
  const std::string label_text = read_file(labels_path);
  const auto label_lines = split_lines(label_text);
  for (std::size_t i = 0; i < label_lines.size(); ++i) {
    if (is_blank(label_lines[i])) continue;
    const auto toks = tokens(label_lines[i], true);
    if (toks.size() == 1) {
      b.labels.push_back(parse_int<int>(toks[0], labels_path, i));
    } else if (toks.size() == 2) {
      pair_labels[node_id(toks[0], labels_path, i)] = parse_int<int>(toks[1], labels_path, i);
    } else {
      throw DatasetError(where(labels_path, i) + ": expected 'label' or 'node label'");
    }
  }
  if (!pair_labels.empty()) {
    if (!b.labels.empty()) throw DatasetError(labels_path.string() + ": mixes single labels and node/label pairs");
    const long n = pair_labels.rbegin()->first + 1;
    if (static_cast<long>(pair_labels.size()) != n) throw DatasetError(labels_path.string() + ": missing labels for some nodes");
    for (const auto& [v, l] : pair_labels) b.labels.push_back(l);
  }
  const std::size_t n = b.labels.size();

  const std::string feature_text = read_file(features_path);
  if (format.features == RawFormat::Features::kDense) {
    b.features = parse_dense_features(feature_text, features_path, true);
    if (b.features.rows() != n) {
      throw DatasetError("inconsistent node counts: " + std::to_string(b.features.rows()) + " feature rows, " +
                         std::to_string(n) + " labels");
    }
  } else {
    if (!format.num_features) throw InvalidArgument("sparse features need the feature dimension");
    b.features = Matrix(n, *format.num_features);
    const auto lines = split_lines(feature_text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (is_blank(lines[i])) continue;
      const auto toks = tokens(lines[i], true);
      if (toks.size() != 3) throw DatasetError(where(features_path, i) + ": expected 'node column value'");
      const long v = node_id(toks[0], features_path, i);
      const long c = parse_int<long>(toks[1], features_path, i) - offset;
      if (v >= static_cast<long>(n)) {
        throw DatasetError("inconsistent node counts: feature triple for node " + std::to_string(v) + " but only " +
                           std::to_string(n) + " labels");
      }
      if (c < 0 || c >= static_cast<long>(*format.num_features)) {
        throw DatasetError(where(features_path, i) + ": feature column out of range");
      }
      b.features(static_cast<std::size_t>(v), static_cast<std::size_t>(c)) = parse_double(toks[2], features_path, i);
    }
  }

  std::vector<std::vector<NodeId>> edges;
  const std::string edge_text = read_file(edges_path);
  const auto edge_lines = split_lines(edge_text);
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    const auto toks = tokens(edge_lines[i], true);
    if (toks.empty()) continue;
    std::vector<NodeId> e;
    for (auto t : toks) {
      const long v = node_id(t, edges_path, i);
      if (v >= static_cast<long>(n)) {
        throw DatasetError("inconsistent node counts: " + where(edges_path, i) + " references node " +
                           std::to_string(v) + " but only " + std::to_string(n) + " nodes have labels");
      }
      e.push_back(static_cast<NodeId>(v));
    }
    std::vector<NodeId> sorted = e;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      report.warnings.push_back(where(edges_path, i) + ": duplicate node ids in hyperedge removed");
    }
    edges.push_back(std::move(e));
  }
  b.hypergraph = Hypergraph(n, std::move(edges));
  int max_label = -1;
  for (int l : b.labels) max_label = std::max(max_label, l);
  b.num_classes = static_cast<std::size_t>(max_label + 1);
  b.validate();
  write_dataset(b, out_dir);
  return report;
}

}  // namespace hypersage
