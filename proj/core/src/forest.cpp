#include "coronal/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"

#include "coronal/error.hpp"
#include "coronal/fileio.hpp"

namespace coronal::forest {

void Dataset::add(std::span<const double> row, int label) {
  CORONAL_EXPECTS(row.size() == d_, "row width does not match dataset feature count");
  CORONAL_EXPECTS(label == 0 || label == 1, "labels must be 0 or 1");
  x_.insert(x_.end(), row.begin(), row.end());
  labels_.push_back(label);
}

void ForestConfig::validate() const {
  CORONAL_EXPECTS(n_trees >= 1, "n_trees must be >= 1");
  CORONAL_EXPECTS(max_depth >= 1, "max_depth must be >= 1");
  CORONAL_EXPECTS(min_leaf >= 1, "min_leaf must be >= 1");
  CORONAL_EXPECTS(n_feature_sub >= 0, "n_feature_sub must be >= 0");
  CORONAL_EXPECTS(max_splits >= 0, "max_splits must be >= 0");
  CORONAL_EXPECTS(threads >= 1, "threads must be >= 1");
}

const Node& Tree::leaf_for(std::span<const double> x) const {
  const Node* n = &nodes.front();
  while (n->feature >= 0) {
    n = &nodes[x[n->feature] <= n->threshold ? n->left : n->right];
  }
  return *n;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[nodes[i].left] = d[i] + 1;
      d[nodes[i].right] = d[i] + 1;
    }
  }
  return best;
}

int Tree::split_count() const {
  return static_cast<int>(
      std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature >= 0; }));
}

bool TrainedForest::operator==(const TrainedForest& o) const {
  if (n_features != o.n_features || trees.size() != o.trees.size() ||
      oob_error != o.oob_error || oob_samples != o.oob_samples || importances != o.importances)
    return false;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto& a = trees[t].nodes;
    const auto& b = o.trees[t].nodes;
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].feature != b[i].feature || a[i].threshold != b[i].threshold ||
          a[i].left != b[i].left || a[i].right != b[i].right || a[i].p1 != b[i].p1 ||
          a[i].samples != b[i].samples)
        return false;
    }
  }
  return true;
}

namespace {

double gini(double ones, double total) {
  if (total <= 0.0) return 0.0;
  const double p = ones / total;
  return 2.0 * p * (1.0 - p);
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = -1.0;
};

struct TreeBuild {
  Tree tree;
  std::vector<int> inbag;            // bootstrap multiplicity per row
  std::vector<double> importance;    // unnormalised impurity decrease
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const ForestConfig& cfg, int n_sub, std::uint64_t tree_index)
      : data_(data), cfg_(cfg), n_sub_(n_sub) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(tree_index)};
    rng_.seed(seq);
  }

  TreeBuild build() {
    const std::size_t n = data_.rows();
    TreeBuild out;
    out.inbag.assign(n, 0);
    out.importance.assign(data_.features(), 0.0);
    std::vector<std::size_t> sample;
    sample.reserve(n);
    if (cfg_.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t i = 0; i < n; ++i) {
        const auto j = pick(rng_);
        sample.push_back(j);
        ++out.inbag[j];
      }
      std::sort(sample.begin(), sample.end());
    } else {
      sample.resize(n);
      std::iota(sample.begin(), sample.end(), std::size_t{0});
      std::fill(out.inbag.begin(), out.inbag.end(), 1);
    }

    struct Pending {
      int node;
      std::vector<std::size_t> rows;
      int depth;
    };
    auto& nodes = out.tree.nodes;
    nodes.push_back(make_node(sample));
    std::deque<Pending> queue;
    queue.push_back({0, std::move(sample), 0});
    int splits = 0;
    const double root_n = static_cast<double>(n);
    while (!queue.empty()) {
      Pending cur = std::move(queue.front());
      queue.pop_front();
      const Node& node = nodes[cur.node];
      const bool pure = node.p1 == 0.0 || node.p1 == 1.0;
      const bool budget = cfg_.max_splits > 0 && splits >= cfg_.max_splits;
      if (pure || budget || cur.depth >= cfg_.max_depth ||
          static_cast<int>(cur.rows.size()) < 2 * cfg_.min_leaf)
        continue;
      const Split s = best_split(cur.rows, node);
      if (s.feature < 0) continue;
      std::vector<std::size_t> left, right;
      for (auto r : cur.rows) (data_.at(r, s.feature) <= s.threshold ? left : right).push_back(r);
      out.importance[s.feature] += static_cast<double>(cur.rows.size()) / root_n * s.gain;
      const int li = static_cast<int>(nodes.size());
      nodes.push_back(make_node(left));
      nodes.push_back(make_node(right));
      nodes[cur.node].feature = s.feature;
      nodes[cur.node].threshold = s.threshold;
      nodes[cur.node].left = li;
      nodes[cur.node].right = li + 1;
      ++splits;
      queue.push_back({li, std::move(left), cur.depth + 1});
      queue.push_back({li + 1, std::move(right), cur.depth + 1});
    }
    return out;
  }

 private:
  Node make_node(const std::vector<std::size_t>& rows) const {
    Node n;
    n.samples = static_cast<int>(rows.size());
    std::size_t ones = 0;
    for (auto r : rows) ones += static_cast<std::size_t>(data_.label(r));
    n.p1 = rows.empty() ? 0.0 : static_cast<double>(ones) / static_cast<double>(rows.size());
    return n;
  }

  std::vector<int> sample_features() {
    std::vector<int> f(data_.features());
    std::iota(f.begin(), f.end(), 0);
    const int k = std::min<int>(n_sub_, static_cast<int>(f.size()));
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(f.size()) - 1);
      std::swap(f[i], f[pick(rng_)]);
    }
    f.resize(k);
    return f;
  }

  Split best_split(const std::vector<std::size_t>& rows, const Node& node) {
    const double total = static_cast<double>(rows.size());
    const double total_ones = node.p1 * total;
    const double parent = gini(total_ones, total);
    Split best;
    std::vector<std::pair<double, int>> column(rows.size());
    for (int f : sample_features()) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        column[i] = {data_.at(rows[i], f), data_.label(rows[i])};
      }
      std::sort(column.begin(), column.end());
      double left_ones = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_ones += column[i].second;
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = total - nl;
        if (nl < cfg_.min_leaf || nr < cfg_.min_leaf) continue;
        const double child =
            (nl * gini(left_ones, nl) + nr * gini(total_ones - left_ones, nr)) / total;
        const double gain = parent - child;
        if (gain > best.gain) {
          double mid = 0.5 * (column[i].first + column[i + 1].first);
          if (!(mid < column[i + 1].first)) mid = column[i].first;
          best = {f, mid, gain};
        }
      }
    }
    if (best.feature >= 0) best.gain = std::max(best.gain, 0.0);
    return best;
  }

  const Dataset& data_;
  const ForestConfig& cfg_;
  int n_sub_;
  std::mt19937_64 rng_;
};

}  // namespace

int tree_vote(const Tree& tree, std::span<const double> x, TiePolicy tie) {
  const double p1 = tree.leaf_for(x).p1;
  if (p1 > 0.5) return 1;
  if (p1 < 0.5) return 0;
  return tie == TiePolicy::Positive ? 1 : 0;
}

Prediction predict(const TrainedForest& forest, std::span<const double> x, TiePolicy tie) {
  if (x.size() != forest.n_features) {
    throw ContractViolation("feature vector has " + std::to_string(x.size()) +
                            " values, forest expects " + std::to_string(forest.n_features));
  }
  CORONAL_EXPECTS(!forest.trees.empty(), "forest has no trees");
  int ones = 0;
  for (const auto& t : forest.trees) ones += tree_vote(t, x, tie);
  const int zeros = static_cast<int>(forest.trees.size()) - ones;
  const double n = static_cast<double>(forest.trees.size());
  if (ones > zeros) return {1, ones / n};
  if (zeros > ones) return {0, zeros / n};
  return {tie == TiePolicy::Positive ? 1 : 0, 0.5};
}

TrainedForest train(const Dataset& data, const ForestConfig& cfg) {
  cfg.validate();
  if (data.rows() < 2) throw TrainingError("training needs at least two rows");
  if (data.features() < 1) throw TrainingError("training needs at least one feature");
  const auto ones = std::count(data.labels().begin(), data.labels().end(), 1);
  if (ones == 0 || ones == static_cast<long>(data.rows())) {
    throw TrainingError("training labels contain a single class");
  }
  const int d = static_cast<int>(data.features());
  const int n_sub = cfg.n_feature_sub > 0
                        ? std::min(cfg.n_feature_sub, d)
                        : std::max(1, static_cast<int>(std::lround(std::sqrt(d))));

  std::vector<TreeBuild> builds(cfg.n_trees);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < cfg.n_trees; t = next++) {
      builds[t] = TreeBuilder(data, cfg, n_sub, static_cast<std::uint64_t>(t)).build();
    }
  };
  if (cfg.threads > 1) {
    std::vector<std::jthread> pool;
    for (int i = 0; i < std::min(cfg.threads, cfg.n_trees); ++i) pool.emplace_back(worker);
  } else {
    worker();
  }

  TrainedForest forest;
  forest.n_features = data.features();
  forest.importances.assign(data.features(), 0.0);
  std::vector<int> oob_ones(data.rows(), 0), oob_votes(data.rows(), 0);
  for (auto& b : builds) {
    const double sum = std::accumulate(b.importance.begin(), b.importance.end(), 0.0);
    if (sum > 0.0) {
      for (int f = 0; f < d; ++f) forest.importances[f] += b.importance[f] / sum;
    }
    for (std::size_t i = 0; i < data.rows(); ++i) {
      if (b.inbag[i] != 0) continue;
      oob_ones[i] += tree_vote(b.tree, data.row(i), TiePolicy::Negative);
      ++oob_votes[i];
    }
    forest.trees.push_back(std::move(b.tree));
  }
  const double total = std::accumulate(forest.importances.begin(), forest.importances.end(), 0.0);
  if (total > 0.0) {
    for (auto& v : forest.importances) v /= total;
  } else {
    // No informative split anywhere; report a flat profile.
    std::fill(forest.importances.begin(), forest.importances.end(), 1.0 / d);
  }
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (oob_votes[i] == 0) continue;
    ++forest.oob_samples;
    const int label = 2 * oob_ones[i] > oob_votes[i] ? 1 : 0;
    if (label != data.label(i)) ++wrong;
  }
  forest.oob_error = forest.oob_samples == 0
                         ? 0.0
                         : static_cast<double>(wrong) / static_cast<double>(forest.oob_samples);
  return forest;
}

OobSurface tune_oob(const Dataset& data, std::span<const std::pair<int, int>> grid,
                    const ForestConfig& base) {
  CORONAL_EXPECTS(!grid.empty(), "tune_oob grid must not be empty");
  OobSurface out;
  for (const auto& [trees, depth] : grid) {
    ForestConfig cfg = base;
    cfg.n_trees = trees;
    cfg.max_depth = depth;
    out.points.push_back({trees, depth, train(data, cfg).oob_error});
  }
  const OobPoint* best = &out.points.front();
  for (const auto& p : out.points) {
    const bool better =
        p.oob_error < best->oob_error ||
        (p.oob_error == best->oob_error &&
         (p.n_trees < best->n_trees || (p.n_trees == best->n_trees && p.max_depth < best->max_depth)));
    if (better) best = &p;
  }
  out.best = base;
  out.best.n_trees = best->n_trees;
  out.best.max_depth = best->max_depth;
  return out;
}

std::vector<double> permutation_importance(const TrainedForest& forest, const Dataset& data,
                                           int repeats, std::uint64_t seed, TiePolicy tie) {
  CORONAL_EXPECTS(repeats >= 1, "permutation_importance needs repeats >= 1");
  CORONAL_EXPECTS(data.features() == forest.n_features, "dataset width mismatch");
  const std::size_t n = data.rows();
  auto accuracy = [&](const std::vector<double>& x) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::span<const double> row(x.data() + i * forest.n_features, forest.n_features);
      if (predict(forest, row, tie).label == data.label(i)) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(n);
  };
  std::vector<double> base_x;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = data.row(i);
    base_x.insert(base_x.end(), r.begin(), r.end());
  }
  const double base = accuracy(base_x);
  std::mt19937_64 rng(seed);
  std::vector<double> out(forest.n_features, 0.0);
  for (std::size_t f = 0; f < forest.n_features; ++f) {
    for (int k = 0; k < repeats; ++k) {
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      auto x = base_x;
      for (std::size_t i = 0; i < n; ++i)
        x[i * forest.n_features + f] = base_x[perm[i] * forest.n_features + f];
      out[f] += (base - accuracy(x)) / repeats;
    }
  }
  return out;
}

std::string to_json(const TrainedForest& forest) {
  nlohmann::json j;
  j["format"] = "coronal.forest";
  j["version"] = kModelFormatVersion;
  j["n_features"] = forest.n_features;
  j["oob_error"] = forest.oob_error;
  j["oob_samples"] = forest.oob_samples;
  j["importances"] = forest.importances;
  auto& trees = j["trees"] = nlohmann::json::array();
  for (const auto& t : forest.trees) {
    nlohmann::json jt;
    std::vector<int> feature, left, right, samples;
    std::vector<double> threshold, p1;
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      p1.push_back(n.p1);
      samples.push_back(n.samples);
    }
    jt["feature"] = feature;
    jt["threshold"] = threshold;
    jt["left"] = left;
    jt["right"] = right;
    jt["p1"] = p1;
    jt["samples"] = samples;
    trees.push_back(std::move(jt));
  }
  return j.dump(1) + "\n";
}

TrainedForest from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("forest model: malformed JSON: ") + e.what());
  }
  if (j.value("format", "") != "coronal.forest") throw IoError("forest model: wrong format tag");
  const int version = j.value("version", -1);
  if (version != kModelFormatVersion) {
    throw IoError("forest model: unsupported version " + std::to_string(version) + " (expected " +
                  std::to_string(kModelFormatVersion) + ")");
  }
  try {
    TrainedForest f;
    f.n_features = j.at("n_features").get<std::size_t>();
    f.oob_error = j.at("oob_error").get<double>();
    f.oob_samples = j.at("oob_samples").get<std::size_t>();
    f.importances = j.at("importances").get<std::vector<double>>();
    for (const auto& jt : j.at("trees")) {
      const auto feature = jt.at("feature").get<std::vector<int>>();
      const auto threshold = jt.at("threshold").get<std::vector<double>>();
      const auto left = jt.at("left").get<std::vector<int>>();
      const auto right = jt.at("right").get<std::vector<int>>();
      const auto p1 = jt.at("p1").get<std::vector<double>>();
      const auto samples = jt.at("samples").get<std::vector<int>>();
      const std::size_t m = feature.size();
      if (m == 0 || threshold.size() != m || left.size() != m || right.size() != m ||
          p1.size() != m || samples.size() != m)
        throw IoError("forest model: inconsistent tree arrays");
      Tree t;
      for (std::size_t i = 0; i < m; ++i) {
        if (feature[i] >= static_cast<int>(f.n_features) ||
            (feature[i] >= 0 && (left[i] <= static_cast<int>(i) || right[i] <= static_cast<int>(i) ||
                                 left[i] >= static_cast<int>(m) || right[i] >= static_cast<int>(m))))
          throw IoError("forest model: invalid node " + std::to_string(i));
        t.nodes.push_back({feature[i], threshold[i], left[i], right[i], p1[i], samples[i]});
      }
      f.trees.push_back(std::move(t));
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("forest model: ") + e.what());
  }
}

void save(const std::filesystem::path& path, const TrainedForest& forest) {
  write_file_atomic(path, to_json(forest));
}

TrainedForest load(const std::filesystem::path& path) { return from_json(read_text_file(path)); }

}  // namespace coronal::forest
