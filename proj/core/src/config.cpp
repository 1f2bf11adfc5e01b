#include "coronal/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <sstream>
#include <variant>

#include "coronal/error.hpp"
#include "coronal/fileio.hpp"

namespace coronal {

namespace {

using Target = std::variant<double*, int*, bool*, std::uint64_t*, std::string*,
                            std::filesystem::path*, std::vector<std::string>*, std::vector<int>*,
                            classify::AreaMode*>;

struct Binding {
  const char* section;
  const char* key;
  Target target;
};

void bind_forest(std::vector<Binding>& b, const char* prefix_trees, const char* prefix_depth,
                 const char* prefix_leaf, const char* prefix_splits, forest::ForestConfig& f) {
  b.push_back({"forest", prefix_trees, &f.n_trees});
  b.push_back({"forest", prefix_depth, &f.max_depth});
  b.push_back({"forest", prefix_leaf, &f.min_leaf});
  b.push_back({"forest", prefix_splits, &f.max_splits});
}

std::vector<Binding> bindings(PipelineConfig& c) {
  std::vector<Binding> b;
  b.push_back({"paths", "root", &c.paths.root});

  auto& ls = c.levelset;
  b.push_back({"levelset", "mu", &ls.params.mu});
  b.push_back({"levelset", "lambda", &ls.params.lambda});
  b.push_back({"levelset", "alpha", &ls.params.alpha});
  b.push_back({"levelset", "epsilon", &ls.params.epsilon});
  b.push_back({"levelset", "sigma", &ls.params.sigma});
  b.push_back({"levelset", "timestep", &ls.params.timestep});
  b.push_back({"levelset", "n_iters", &ls.params.n_iters});
  b.push_back({"levelset", "use_tuned", &ls.use_tuned});
  b.push_back({"levelset", "tune_images", &ls.tune_images});
  b.push_back({"levelset", "tune_max_evaluations", &ls.tune_max_evaluations});
  b.push_back({"levelset", "tune_initial_step", &ls.tune_initial_step});
  b.push_back({"levelset", "tune_min_step", &ls.tune_min_step});

  b.push_back({"init", "dark_quantile", &c.init.hh.dark_quantile});
  b.push_back({"init", "unipolarity_min", &c.init.hh.unipolarity_min});
  b.push_back({"init", "external", &c.init.external});
  b.push_back({"init", "use_selectors", &c.init.use_selectors});
  b.push_back({"init", "valid_overlap", &c.init.valid_overlap});

  auto& m = c.matching;
  b.push_back({"matching", "cluster_threshold", &m.cluster_threshold});
  b.push_back({"matching", "mahalanobis_threshold", &m.mahalanobis_threshold});
  b.push_back({"matching", "mean_area", &m.mean_area});
  b.push_back({"matching", "mean_distance", &m.mean_distance});
  b.push_back({"matching", "sd_area", &m.sd_area});
  b.push_back({"matching", "sd_distance", &m.sd_distance});
  b.push_back({"matching", "correlation", &m.correlation});
  b.push_back({"matching", "close_radius", &m.close_radius});
  b.push_back({"matching", "reference", &m.reference});

  auto& f = c.forest;
  bind_forest(b, "classifier_trees", "classifier_depth", "classifier_min_leaf",
              "classifier_splits", f.classifier);
  bind_forest(b, "selector_hh_trees", "selector_hh_depth", "selector_hh_min_leaf",
              "selector_hh_splits", f.selector_hh);
  bind_forest(b, "selector_external_trees", "selector_external_depth",
              "selector_external_min_leaf", "selector_external_splits", f.selector_external);
  b.push_back({"forest", "train_fraction", &f.train_fraction});
  b.push_back({"forest", "include_same", &f.include_same});
  b.push_back({"forest", "area_mode", &f.area_mode});
  b.push_back({"forest", "oob_trees", &f.oob_trees});
  b.push_back({"forest", "oob_depths", &f.oob_depths});
  b.push_back({"forest", "seed", &f.seed});

  auto& s = c.synth;
  b.push_back({"synth", "n_dates", &s.n_dates});
  b.push_back({"synth", "seed", &s.seed});
  b.push_back({"synth", "n_cols", &s.n_cols});
  b.push_back({"synth", "n_rows", &s.n_rows});
  b.push_back({"synth", "model_cols", &s.model_cols});
  b.push_back({"synth", "model_rows", &s.model_rows});
  b.push_back({"synth", "holes_min", &s.holes_min});
  b.push_back({"synth", "holes_max", &s.holes_max});
  b.push_back({"synth", "semi_major_min", &s.semi_major_min});
  b.push_back({"synth", "semi_major_max", &s.semi_major_max});
  b.push_back({"synth", "axis_ratio_min", &s.axis_ratio_min});
  b.push_back({"synth", "axis_ratio_max", &s.axis_ratio_max});
  b.push_back({"synth", "max_abs_lat", &s.max_abs_lat});
  b.push_back({"synth", "min_separation", &s.min_separation});
  b.push_back({"synth", "quiet_euv", &s.quiet_euv});
  b.push_back({"synth", "euv_noise", &s.euv_noise});
  b.push_back({"synth", "hole_depth", &s.hole_depth});
  b.push_back({"synth", "edge_width", &s.edge_width});
  b.push_back({"synth", "flux_hole", &s.flux_hole});
  b.push_back({"synth", "flux_background", &s.flux_background});
  b.push_back({"synth", "flux_noise", &s.flux_noise});
  b.push_back({"synth", "fakes_max", &s.fakes_max});
  b.push_back({"synth", "band_width", &s.band_width});
  b.push_back({"synth", "external_block", &s.external_block});
  b.push_back({"synth", "n_models", &s.n_models});
  b.push_back({"synth", "rank1_min", &s.rank1_min});
  b.push_back({"synth", "rank1_max", &s.rank1_max});
  auto bind_pert = [&b](synth::Perturbation& p, const char* jitter, const char* smin,
                        const char* smax, const char* remove, const char* add) {
    b.push_back({"synth", jitter, &p.jitter_max});
    b.push_back({"synth", smin, &p.scale_min});
    b.push_back({"synth", smax, &p.scale_max});
    b.push_back({"synth", remove, &p.remove_prob});
    b.push_back({"synth", add, &p.add_prob});
  };
  bind_pert(s.rank1, "rank1_jitter", "rank1_scale_min", "rank1_scale_max", "rank1_remove_prob",
            "rank1_add_prob");
  bind_pert(s.rank2, "rank2_jitter", "rank2_scale_min", "rank2_scale_max", "rank2_remove_prob",
            "rank2_add_prob");
  b.push_back({"synth", "max_missing_fraction", &s.max_missing_fraction});
  b.push_back({"synth", "max_new_fraction", &s.max_new_fraction});
  b.push_back({"synth", "max_area_ratio", &s.max_area_ratio});
  return b;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& where, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(where + ": cannot parse '" + text + "' as a number");
  }
  return v;
}

void assign(const std::string& where, const Target& t, const std::string& raw) {
  const std::string text = trim(raw);
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double> || std::is_same_v<T, int> ||
                      std::is_same_v<T, std::uint64_t>) {
          *p = parse_number<T>(where, text);
        } else if constexpr (std::is_same_v<T, bool>) {
          if (text == "true" || text == "1" || text == "yes") *p = true;
          else if (text == "false" || text == "0" || text == "no") *p = false;
          else throw ConfigError(where + ": expected true/false, got '" + text + "'");
        } else if constexpr (std::is_same_v<T, std::string> || std::is_same_v<T, std::filesystem::path>) {
          *p = text;
        } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
          *p = split_list(text);
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
          p->clear();
          for (const auto& item : split_list(text)) p->push_back(parse_number<int>(where, item));
        } else if constexpr (std::is_same_v<T, classify::AreaMode>) {
          if (text == "per_feature") *p = classify::AreaMode::PerFeature;
          else if (text == "spherical") *p = classify::AreaMode::Spherical;
          else throw ConfigError(where + ": expected per_feature or spherical, got '" + text + "'");
        }
      },
      t);
}

std::string render(const Target& t) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) {
          char buf[64];
          const auto r = std::to_chars(buf, buf + sizeof buf, *p);
          return std::string(buf, r.ptr);
        } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
          return std::to_string(*p);
        } else if constexpr (std::is_same_v<T, bool>) {
          return *p ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return *p;
        } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
          return p->string();
        } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
          std::string s;
          for (std::size_t i = 0; i < p->size(); ++i) s += (i ? "," : "") + (*p)[i];
          return s;
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
          std::string s;
          for (std::size_t i = 0; i < p->size(); ++i) s += (i ? "," : "") + std::to_string((*p)[i]);
          return s;
        } else {
          return *p == classify::AreaMode::PerFeature ? "per_feature" : "spherical";
        }
      },
      t);
}

void check(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

ForestSection::ForestSection() {
  classifier.n_trees = 20;
  classifier.max_depth = 11;
  selector_hh.n_trees = 50;
  selector_hh.max_splits = 50;
  selector_hh.max_depth = 50;
  selector_external.n_trees = 30;
  selector_external.max_splits = 50;
  selector_external.max_depth = 50;
}

matching::MatchConfig MatchingConfig::to_match_config() const {
  matching::MatchConfig m;
  m.cluster_threshold = cluster_threshold;
  const double cov = correlation * sd_area * sd_distance;
  m.mahalanobis = matching::MahalanobisModel(
      {mean_area, mean_distance}, {sd_area * sd_area, cov, cov, sd_distance * sd_distance},
      mahalanobis_threshold);
  m.preprocess.close_radius = close_radius;
  return m;
}

void PipelineConfig::validate() const {
  try {
    levelset.params.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("[levelset] ") + e.what());
  }
  check(levelset.tune_images >= 1, "[levelset] tune_images must be >= 1");
  check(levelset.tune_max_evaluations >= 1, "[levelset] tune_max_evaluations must be >= 1");
  check(levelset.tune_initial_step > 0.0 && levelset.tune_min_step > 0.0,
        "[levelset] tune steps must be positive");
  check(init.hh.dark_quantile > 0.0 && init.hh.dark_quantile < 1.0,
        "[init] dark_quantile must be in (0, 1)");
  check(init.hh.unipolarity_min >= 0.0 && init.hh.unipolarity_min <= 1.0,
        "[init] unipolarity_min must be in [0, 1]");
  check(init.valid_overlap > 0.0 && init.valid_overlap <= 1.0,
        "[init] valid_overlap must be in (0, 1]");
  check(matching.cluster_threshold >= 0.0, "[matching] cluster_threshold must be >= 0");
  check(matching.close_radius >= 0, "[matching] close_radius must be >= 0");
  check(matching.correlation > -1.0 && matching.correlation < 1.0,
        "[matching] correlation must be in (-1, 1)");
  check(matching.reference == "consensus" || matching.reference == "segmented",
        "[matching] reference must be consensus or segmented");
  try {
    (void)matching.to_match_config();
  } catch (const Error& e) {
    throw ConfigError(std::string("[matching] ") + e.what());
  }
  for (const auto* f : {&forest.classifier, &forest.selector_hh, &forest.selector_external}) {
    try {
      f->validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("[forest] ") + e.what());
    }
  }
  check(forest.train_fraction > 0.0 && forest.train_fraction < 1.0,
        "[forest] train_fraction must be in (0, 1)");
  check(!forest.oob_trees.empty() && !forest.oob_depths.empty(),
        "[forest] oob grid must be non-empty");
  for (int v : forest.oob_trees) check(v >= 1, "[forest] oob_trees entries must be >= 1");
  for (int v : forest.oob_depths) check(v >= 1, "[forest] oob_depths entries must be >= 1");
  try {
    synth.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("[synth] ") + e.what());
  }
}

void PipelineConfig::set_seed(std::uint64_t seed) {
  synth.seed = seed;
  forest.seed = seed;
}

PipelineConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  PipelineConfig cfg;
  auto table = bindings(cfg);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config: key '" + section + "' outside any section");
    }
    bool known_section = false;
    for (const auto& b : table) known_section |= section == b.section;
    if (!known_section) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const Binding* hit = nullptr;
      for (const auto& b : table) {
        if (section == b.section && key == b.key) hit = &b;
      }
      if (!hit) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
      assign("[" + section + "] " + key, hit->target, value.data());
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config file not found: " + path.string());
  }
  return parse_config(read_text_file(path));
}

std::string format_config(const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;
  std::string out;
  std::string current;
  for (const auto& b : bindings(copy)) {
    if (current != b.section) {
      if (!current.empty()) out += "\n";
      current = b.section;
      out += "[" + current + "]\n";
    }
    out += std::string(b.key) + " = " + render(b.target) + "\n";
  }
  return out;
}

}  // namespace coronal
