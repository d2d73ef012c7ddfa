#include "crashcast/boosting/booster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "crashcast/error.hpp"

namespace crashcast::boosting {

namespace {

void invalid(const std::string& what) { throw Error(ErrorCode::kInvalidArgument, what); }

enum Stream : std::uint64_t { kBagging = 1, kColumns = 2, kGoss = 3 };

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::uint64_t round_seed(std::uint64_t seed, std::uint64_t stream, std::size_t round) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(round)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

double soft_threshold(double g, double alpha) {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

struct GrowParams {
  int max_depth = 3;
  std::size_t max_leaves = 8;
  bool best_first = false;
  double min_child_weight = 1.0;
  std::size_t min_child_samples = 1;
  double alpha = 0.0;
  double lambda = 1.0;
  double gamma = 0.0;
  double learning_rate = 0.1;
};

struct Split {
  double gain = 0.0;
  int feature = -1;
  std::size_t bin = 0;
  double gl = 0.0, hl = 0.0, cl = 0.0;
  bool valid() const { return feature >= 0; }
};

struct OpenNode {
  int id = 0;
  int depth = 0;
  std::vector<std::size_t> rows;
  std::vector<double> hist;  // (g, h, count) per bin of the sampled features
  double g = 0.0, h = 0.0, c = 0.0;
  Split best;
};

// Histogram tree grower over pre-binned rows. Rows and features are given in
// ascending order, so accumulation order (and therefore every sum) depends only
// on the selected row set.
class TreeGrower {
 public:
  TreeGrower(const FeatureBinner& binner, const std::vector<std::uint8_t>& bins, std::size_t cols, GrowParams p)
      : binner_(binner), bins_(bins), cols_(cols), p_(p) {}

  DecisionTree grow(std::vector<std::size_t> rows, std::span<const double> g, std::span<const double> h,
                    const std::vector<std::size_t>& features) {
    g_ = g;
    h_ = h;
    features_ = features;
    offsets_.assign(features_.size() + 1, 0);
    for (std::size_t i = 0; i < features_.size(); ++i) offsets_[i + 1] = offsets_[i] + binner_.bin_count(features_[i]);

    nodes_.assign(1, TreeNode{});
    OpenNode root;
    root.rows = std::move(rows);
    for (std::size_t r : root.rows) {
      root.g += g_[r];
      root.h += h_[r];
    }
    root.c = static_cast<double>(root.rows.size());
    finish_node(root);

    std::vector<OpenNode> open;
    if (can_split(root)) {
      root.hist = build_hist(root.rows);
      root.best = find_split(root);
    }
    open.push_back(std::move(root));

    if (p_.best_first) {
      std::size_t leaves = 1;
      while (leaves < p_.max_leaves) {
        std::size_t pick = open.size();
        for (std::size_t i = 0; i < open.size(); ++i) {
          if (!open[i].best.valid()) continue;
          if (pick == open.size() || open[i].best.gain > open[pick].best.gain) pick = i;
        }
        if (pick == open.size()) break;
        OpenNode node = std::move(open[pick]);
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
        auto [l, r] = split(node);
        open.push_back(std::move(l));
        open.push_back(std::move(r));
        ++leaves;
      }
    } else {
      // Level order: every splittable node of a level splits before the next.
      while (!open.empty()) {
        std::vector<OpenNode> next;
        for (auto& node : open) {
          if (!node.best.valid()) continue;
          auto [l, r] = split(node);
          next.push_back(std::move(l));
          next.push_back(std::move(r));
        }
        open = std::move(next);
      }
    }
    return DecisionTree(std::move(nodes_));
  }

 private:
  bool can_split(const OpenNode& n) const {
    if (p_.max_depth > 0 && n.depth >= p_.max_depth) return false;
    return n.rows.size() >= 2 * std::max<std::size_t>(1, p_.min_child_samples);
  }

  double score(double g, double h) const {
    const double denom = h + p_.lambda;
    if (denom <= 0.0) return 0.0;
    const double t = soft_threshold(g, p_.alpha);
    return t * t / denom;
  }

  void finish_node(const OpenNode& n) {
    auto& node = nodes_[static_cast<std::size_t>(n.id)];
    const double denom = n.h + p_.lambda;
    node.leaf_value = denom > 0.0 ? -soft_threshold(n.g, p_.alpha) / denom * p_.learning_rate : 0.0;
    node.cover = n.h;
  }

  std::vector<double> build_hist(const std::vector<std::size_t>& rows) const {
    std::vector<double> hist(3 * offsets_.back(), 0.0);
    const std::size_t nf = features_.size();
    for (std::size_t r : rows) {
      const std::uint8_t* b = bins_.data() + r * cols_;
      const double gr = g_[r], hr = h_[r];
      for (std::size_t i = 0; i < nf; ++i) {
        double* cell = hist.data() + 3 * (offsets_[i] + b[features_[i]]);
        cell[0] += gr;
        cell[1] += hr;
        cell[2] += 1.0;
      }
    }
    return hist;
  }

  Split find_split(const OpenNode& n) const {
    Split best;
    const double parent = score(n.g, n.h);
    const double min_count = static_cast<double>(std::max<std::size_t>(1, p_.min_child_samples));
    for (std::size_t i = 0; i < features_.size(); ++i) {
      const double* cell = n.hist.data() + 3 * offsets_[i];
      const std::size_t nb = offsets_[i + 1] - offsets_[i];
      double gl = 0.0, hl = 0.0, cl = 0.0;
      // Bin 0 (missing) always rides left; split after bin b, 1 <= b <= nb - 2.
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        gl += cell[3 * b];
        hl += cell[3 * b + 1];
        cl += cell[3 * b + 2];
        if (b == 0) continue;
        const double gr = n.g - gl, hr = n.h - hl, cr = n.c - cl;
        if (cl < min_count || cr < min_count) continue;
        if (hl < p_.min_child_weight || hr < p_.min_child_weight) continue;
        const double gain = 0.5 * (score(gl, hl) + score(gr, hr) - parent) - p_.gamma;
        if (gain > best.gain) best = Split{gain, static_cast<int>(i), b, gl, hl, cl};
      }
    }
    return best;
  }

  std::pair<OpenNode, OpenNode> split(OpenNode& n) {
    const auto slot = static_cast<std::size_t>(n.best.feature);
    const std::size_t feature = features_[slot];
    const int left_id = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{});
    nodes_.push_back(TreeNode{});
    auto& node = nodes_[static_cast<std::size_t>(n.id)];
    node.feature = static_cast<int>(feature);
    node.threshold = binner_.edges(feature)[n.best.bin - 1];
    node.left = left_id;
    node.right = left_id + 1;

    OpenNode l, r;
    l.id = left_id;
    r.id = left_id + 1;
    l.depth = r.depth = n.depth + 1;
    for (std::size_t row : n.rows) {
      (bins_[row * cols_ + feature] <= n.best.bin ? l.rows : r.rows).push_back(row);
    }
    l.g = n.best.gl;
    l.h = n.best.hl;
    l.c = n.best.cl;
    r.g = n.g - l.g;
    r.h = n.h - l.h;
    r.c = n.c - l.c;
    finish_node(l);
    finish_node(r);

    const bool split_l = can_split(l), split_r = can_split(r);
    if (split_l || split_r) {
      // Build the smaller child; the sibling is the parent minus it.
      OpenNode& small = l.rows.size() <= r.rows.size() ? l : r;
      OpenNode& large = &small == &l ? r : l;
      small.hist = build_hist(small.rows);
      large.hist = std::move(n.hist);
      for (std::size_t k = 0; k < large.hist.size(); ++k) large.hist[k] -= small.hist[k];
      if (split_l) l.best = find_split(l);
      if (split_r) r.best = find_split(r);
    }
    // Only nodes that may still split keep their histograms.
    if (!l.best.valid()) std::vector<double>().swap(l.hist);
    if (!r.best.valid()) std::vector<double>().swap(r.hist);
    return {std::move(l), std::move(r)};
  }

  const FeatureBinner& binner_;
  const std::vector<std::uint8_t>& bins_;
  std::size_t cols_;
  GrowParams p_;
  std::span<const double> g_, h_;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> offsets_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

std::string_view variant_name(BoosterVariant v) noexcept {
  return v == BoosterVariant::kDepthwise ? "depthwise" : "leafwise";
}

BoosterVariant parse_variant(std::string_view name) {
  if (name == "depthwise") return BoosterVariant::kDepthwise;
  if (name == "leafwise") return BoosterVariant::kLeafwise;
  invalid("unknown booster variant '" + std::string(name) + "'");
  return BoosterVariant::kDepthwise;
}

void GossConfig::validate() const {
  if (!(a_top > 0.0 && a_top <= 1.0)) invalid("goss a_top must be in (0, 1]");
  if (!(b_rest >= 0.0) || a_top + b_rest > 1.0 + 1e-12) invalid("goss needs b_rest >= 0 and a_top + b_rest <= 1");
  if (b_rest == 0.0 && a_top < 1.0) invalid("goss b_rest = 0 requires a_top = 1");
  if (!(severity_weight_exponent >= 0.0)) invalid("goss severity exponent must be nonnegative");
}

void BoosterConfig::validate() const {
  if (!(learning_rate >= 0.0 && learning_rate <= 1.0)) invalid("learning_rate must be in [0, 1]");
  if (!(subsample > 0.0 && subsample <= 1.0)) invalid("subsample must be in (0, 1]");
  if (!(colsample_bytree > 0.0 && colsample_bytree <= 1.0)) invalid("colsample_bytree must be in (0, 1]");
  if (!(reg_alpha >= 0.0) || !(reg_lambda >= 0.0) || !(gamma >= 0.0) || !(min_child_weight >= 0.0)) {
    invalid("regularizers must be nonnegative");
  }
  if (variant == BoosterVariant::kDepthwise && max_depth <= 0) invalid("depthwise max_depth must be positive");
  if (variant == BoosterVariant::kLeafwise && num_leaves < 2) invalid("num_leaves must be at least 2");
  if (max_bins < 2 || max_bins > 255) invalid("max_bins must be in [2, 255]");
  if (variant == BoosterVariant::kLeafwise && goss.enabled) goss.validate();
}

BoosterConfig depthwise_preset() {
  BoosterConfig c;
  c.variant = BoosterVariant::kDepthwise;
  c.colsample_bytree = 0.9998673385112622;
  c.gamma = 0.000712326191489122;
  c.learning_rate = 0.07600002770236322;
  c.max_depth = 3;
  c.min_child_weight = 3;
  c.n_estimators = 114;
  c.reg_alpha = 7.817258654943406e-05;
  c.reg_lambda = 4.980310548511174e-05;
  c.subsample = 0.9820341765138635;
  c.num_leaves = 8;
  return c;
}

BoosterConfig leafwise_preset() {
  BoosterConfig c;
  c.variant = BoosterVariant::kLeafwise;
  c.colsample_bytree = 0.696571764024241;
  c.learning_rate = 0.15202067057852842;
  c.max_depth = 3;
  c.min_child_samples = 100;
  c.n_estimators = 101;
  c.num_leaves = 33;
  c.reg_alpha = 0.001825422639063087;
  c.reg_lambda = 2.3454548994016394e-05;
  c.subsample = 0.9748228026992201;
  c.min_child_weight = 1e-3;
  c.gamma = 0.0;
  c.goss.enabled = true;
  return c;
}

nlohmann::json to_json(const BoosterConfig& c) {
  return {{"variant", variant_name(c.variant)},
          {"n_estimators", c.n_estimators},
          {"max_depth", c.max_depth},
          {"num_leaves", c.num_leaves},
          {"min_child_weight", c.min_child_weight},
          {"min_child_samples", c.min_child_samples},
          {"learning_rate", c.learning_rate},
          {"subsample", c.subsample},
          {"colsample_bytree", c.colsample_bytree},
          {"reg_alpha", c.reg_alpha},
          {"reg_lambda", c.reg_lambda},
          {"gamma", c.gamma},
          {"max_bins", c.max_bins},
          {"seed", c.seed},
          {"goss",
           {{"enabled", c.goss.enabled},
            {"a_top", c.goss.a_top},
            {"b_rest", c.goss.b_rest},
            {"severity_weight_exponent", c.goss.severity_weight_exponent}}}};
}

BoosterConfig booster_config_from_json(const nlohmann::json& doc) {
  BoosterConfig c;
  try {
    c.variant = parse_variant(doc.at("variant").get<std::string>());
    c.n_estimators = doc.at("n_estimators").get<std::size_t>();
    c.max_depth = doc.at("max_depth").get<int>();
    c.num_leaves = doc.at("num_leaves").get<std::size_t>();
    c.min_child_weight = doc.at("min_child_weight").get<double>();
    c.min_child_samples = doc.at("min_child_samples").get<std::size_t>();
    c.learning_rate = doc.at("learning_rate").get<double>();
    c.subsample = doc.at("subsample").get<double>();
    c.colsample_bytree = doc.at("colsample_bytree").get<double>();
    c.reg_alpha = doc.at("reg_alpha").get<double>();
    c.reg_lambda = doc.at("reg_lambda").get<double>();
    c.gamma = doc.at("gamma").get<double>();
    c.max_bins = doc.at("max_bins").get<std::size_t>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    const auto& g = doc.at("goss");
    c.goss.enabled = g.at("enabled").get<bool>();
    c.goss.a_top = g.at("a_top").get<double>();
    c.goss.b_rest = g.at("b_rest").get<double>();
    c.goss.severity_weight_exponent = g.at("severity_weight_exponent").get<double>();
    c.validate();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("booster config: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("booster config: ") + e.what());
  }
  return c;
}

void softmax(std::span<double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) sum += (x = std::exp(x - m));
  for (double& x : v) x /= sum;
}

GradientPair softmax_gradients(std::span<const int> labels, std::span<const double> margins, std::size_t k) {
  if (k == 0 || margins.size() != labels.size() * k) throw Error(ErrorCode::kLengthMismatch, "margins shape");
  GradientPair out{std::vector<double>(margins.size()), std::vector<double>(margins.size())};
  std::vector<double> p(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::copy_n(margins.begin() + static_cast<std::ptrdiff_t>(i * k), k, p.begin());
    softmax(p);
    for (std::size_t c = 0; c < k; ++c) {
      out.g[i * k + c] = p[c] - (labels[i] == static_cast<int>(c) ? 1.0 : 0.0);
      out.h[i * k + c] = p[c] * (1.0 - p[c]);
    }
  }
  return out;
}

double multiclass_logloss(std::span<const int> labels, std::span<const double> probabilities, std::size_t k) {
  if (labels.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probabilities[i * k + static_cast<std::size_t>(labels[i])];
    sum -= std::log(std::max(p, 1e-300));
  }
  return sum / static_cast<double>(labels.size());
}

Booster Booster::fit(const Matrix& x, std::span<const int> labels, const BoosterConfig& config, FitTrace* trace) {
  config.validate();
  if (x.rows() == 0 || x.cols() == 0) throw Error(ErrorCode::kEmptyMatrix, "booster fit: empty feature matrix");
  if (labels.size() != x.rows()) throw Error(ErrorCode::kLengthMismatch, "booster fit: labels length");
  std::set<int> distinct;
  for (int y : labels) {
    if (y < 0) invalid("labels must be nonnegative");
    distinct.insert(y);
  }
  if (distinct.size() < 2) throw Error(ErrorCode::kSingleClassInput, "booster fit: need at least two classes");

  const std::size_t n = x.rows(), d = x.cols();
  const auto k = static_cast<std::size_t>(*distinct.rbegin() + 1);
  Booster b;
  b.config_ = config;
  b.num_classes_ = k;
  b.num_features_ = d;
  b.trees_.assign(k, {});
  std::vector<double> counts(k, 0.0);
  for (int y : labels) counts[static_cast<std::size_t>(y)] += 1.0;
  for (std::size_t c = 0; c < k; ++c) b.base_score_.push_back(std::log(std::max(counts[c], 1.0) / static_cast<double>(n)));

  const auto binner = FeatureBinner::fit(x, config.max_bins);
  const auto bins = binner.transform(x);
  const bool leafwise = config.variant == BoosterVariant::kLeafwise;
  GrowParams params;
  params.best_first = leafwise;
  params.max_depth = config.max_depth;
  params.max_leaves = leafwise ? config.num_leaves : std::numeric_limits<std::size_t>::max();
  params.min_child_weight = config.min_child_weight;
  params.min_child_samples = config.min_child_samples;
  params.alpha = config.reg_alpha;
  params.lambda = config.reg_lambda;
  params.gamma = config.gamma;
  params.learning_rate = config.learning_rate;
  TreeGrower grower(binner, bins, d, params);

  std::vector<double> margins(n * k);
  for (std::size_t i = 0; i < n; ++i) std::copy(b.base_score_.begin(), b.base_score_.end(), margins.begin() + static_cast<std::ptrdiff_t>(i * k));
  auto logloss = [&] {
    std::vector<double> p(margins);
    for (std::size_t i = 0; i < n; ++i) softmax(std::span<double>(p).subspan(i * k, k));
    return multiclass_logloss(labels, p, k);
  };
  if (trace) trace->train_logloss = {logloss()};

  const bool use_goss = leafwise && config.goss.enabled;
  auto bag_rng = stream_rng(config.seed, kBagging);
  auto col_rng = stream_rng(config.seed, kColumns);
  const auto col_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(config.colsample_bytree * static_cast<double>(d))), 1, d);
  std::vector<std::size_t> all_rows(n), all_features(d);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::iota(all_features.begin(), all_features.end(), 0);
  std::vector<double> gc(n), hc(n), magnitude(n);

  for (std::size_t round = 0; round < config.n_estimators; ++round) {
    const auto grad = softmax_gradients(labels, margins, k);
    std::vector<std::size_t> rows;
    std::vector<double> weight;
    if (use_goss) {
      for (std::size_t i = 0; i < n; ++i) {
        double m = 0.0;
        for (std::size_t c = 0; c < k; ++c) m += std::abs(grad.g[i * k + c]);
        magnitude[i] = m;
      }
      auto sample = goss_sample(magnitude, labels, config.goss, round_seed(config.seed, kGoss, round));
      rows = std::move(sample.indices);
      weight.assign(n, 0.0);
      for (std::size_t j = 0; j < rows.size(); ++j) weight[rows[j]] = sample.weights[j];
    } else if (config.subsample < 1.0) {
      const auto m = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(config.subsample * static_cast<double>(n))), 1, n);
      std::sample(all_rows.begin(), all_rows.end(), std::back_inserter(rows), m, bag_rng);
    } else {
      rows = all_rows;
    }

    std::vector<const DecisionTree*> round_trees;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t r : rows) {
        const double w = weight.empty() ? 1.0 : weight[r];
        gc[r] = grad.g[r * k + c] * w;
        hc[r] = grad.h[r * k + c] * w;
      }
      std::vector<std::size_t> features;
      if (col_count == d) {
        features = all_features;
      } else {
        features = all_features;
        std::shuffle(features.begin(), features.end(), col_rng);
        features.resize(col_count);
        std::sort(features.begin(), features.end());
      }
      b.trees_[c].push_back(grower.grow(rows, gc, hc, features));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = x.row(i);
      for (std::size_t c = 0; c < k; ++c) margins[i * k + c] += b.trees_[c].back().predict(row);
    }
    if (trace) trace->train_logloss.push_back(logloss());
  }
  return b;
}

Booster fit_depthwise(const Matrix& x, std::span<const int> labels, BoosterConfig config, FitTrace* trace) {
  config.variant = BoosterVariant::kDepthwise;
  return Booster::fit(x, labels, config, trace);
}

Booster fit_leafwise_goss(const Matrix& x, std::span<const int> labels, BoosterConfig config, const GossConfig& goss,
                          FitTrace* trace) {
  config.variant = BoosterVariant::kLeafwise;
  config.goss = goss;
  return Booster::fit(x, labels, config, trace);
}

std::size_t Booster::node_count() const noexcept {
  std::size_t n = 0;
  for (const auto& per_class : trees_) {
    for (const auto& t : per_class) n += t.nodes().size();
  }
  return n;
}

void Booster::predict_margin(std::span<const double> x, std::span<double> out) const {
  if (!fitted()) throw Error(ErrorCode::kUnfittedModel, "booster is not fitted");
  if (x.size() != num_features_ || out.size() != num_classes_) {
    throw Error(ErrorCode::kLengthMismatch, "booster predict: expected " + std::to_string(num_features_) + " features");
  }
  for (std::size_t c = 0; c < num_classes_; ++c) {
    double m = base_score_[c];
    for (const auto& t : trees_[c]) m += t.predict(x);
    out[c] = m;
  }
}

std::vector<double> Booster::predict_margin(std::span<const double> x) const {
  std::vector<double> out(num_classes_);
  predict_margin(x, out);
  return out;
}

std::vector<double> Booster::predict_proba(std::span<const double> x) const {
  auto out = predict_margin(x);
  softmax(out);
  return out;
}

void Booster::attribute(std::span<const double> x, std::size_t cls, double& base, std::span<double> contributions) const {
  if (!fitted()) throw Error(ErrorCode::kUnfittedModel, "booster is not fitted");
  if (x.size() != num_features_ || contributions.size() != num_features_ || cls >= num_classes_) {
    throw Error(ErrorCode::kLengthMismatch, "booster attribute: shape mismatch");
  }
  base = base_score_[cls];
  for (const auto& t : trees_[cls]) {
    const auto& nodes = t.nodes();
    const auto& expected = t.expected_values();
    base += expected[0];
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& node = nodes[i];
      const double v = x[static_cast<std::size_t>(node.feature)];
      const auto next = static_cast<std::size_t>(std::isnan(v) || v <= node.threshold ? node.left : node.right);
      contributions[static_cast<std::size_t>(node.feature)] += expected[next] - expected[i];
      i = next;
    }
  }
}

namespace {

// Baseline Shapley of one tree against one reference row z. Where x and z take
// different branches the walk forks: the x side puts the feature in the
// coalition, the z side leaves it out. A leaf reached with a features on the
// x side and b on the z side gives each x-side feature v (a-1)! b! / (a+b)! and
// takes v a! (b-1)! / (a+b)! from each z-side feature.
class BaselineShapley {
 public:
  BaselineShapley(std::span<const double> x, std::span<const double> z, std::span<double> phi, std::size_t features)
      : x_(x), z_(z), phi_(phi), side_(features, 0) {
    factorial_.assign(features + 2, 1.0);
    for (std::size_t i = 1; i < factorial_.size(); ++i) factorial_[i] = factorial_[i - 1] * static_cast<double>(i);
  }

  void run(const DecisionTree& tree) {
    nodes_ = &tree.nodes();
    walk(0, 0, 0);
  }

 private:
  static bool goes_left(const TreeNode& n, double v) { return std::isnan(v) || v <= n.threshold; }

  void walk(std::size_t i, std::size_t a, std::size_t b) {
    const auto& n = (*nodes_)[i];
    if (n.is_leaf()) {
      if (a + b == 0) return;
      const double total = factorial_[a + b];
      const double win = a ? n.leaf_value * factorial_[a - 1] * factorial_[b] / total : 0.0;
      const double lose = b ? n.leaf_value * factorial_[a] * factorial_[b - 1] / total : 0.0;
      for (std::size_t f : path_) phi_[f] += side_[f] == 1 ? win : -lose;
      return;
    }
    const auto f = static_cast<std::size_t>(n.feature);
    const bool xl = goes_left(n, x_[f]), zl = goes_left(n, z_[f]);
    const auto child = [&](bool left) { return static_cast<std::size_t>(left ? n.left : n.right); };
    if (side_[f] == 1) return walk(child(xl), a, b);
    if (side_[f] == 2) return walk(child(zl), a, b);
    if (xl == zl) return walk(child(xl), a, b);
    path_.push_back(f);
    side_[f] = 1;
    walk(child(xl), a + 1, b);
    side_[f] = 2;
    walk(child(zl), a, b + 1);
    side_[f] = 0;
    path_.pop_back();
  }

  std::span<const double> x_, z_;
  std::span<double> phi_;
  std::vector<int> side_;
  std::vector<std::size_t> path_;
  std::vector<double> factorial_;
  const std::vector<TreeNode>* nodes_ = nullptr;
};

}  // namespace

void Booster::attribute_interventional(std::span<const double> x, std::size_t cls, const Matrix& background,
                                       double& base, std::span<double> contributions) const {
  if (!fitted()) throw Error(ErrorCode::kUnfittedModel, "booster is not fitted");
  if (x.size() != num_features_ || contributions.size() != num_features_ || cls >= num_classes_ ||
      background.cols() != num_features_) {
    throw Error(ErrorCode::kLengthMismatch, "booster attribute: shape mismatch");
  }
  if (background.rows() == 0) throw Error(ErrorCode::kEmptyMatrix, "interventional attribution needs background rows");
  const double share = 1.0 / static_cast<double>(background.rows());
  std::vector<double> phi(num_features_, 0.0);
  base = 0.0;
  for (std::size_t r = 0; r < background.rows(); ++r) {
    const auto z = background.row(r);
    double fz = base_score_[cls];
    BaselineShapley shapley(x, z, phi, num_features_);
    for (const auto& t : trees_[cls]) {
      fz += t.predict(z);
      shapley.run(t);
    }
    base += share * fz;
  }
  for (std::size_t f = 0; f < num_features_; ++f) contributions[f] += share * phi[f];
}

nlohmann::json to_json(const Booster& b) {
  auto trees = nlohmann::json::array();
  for (const auto& per_class : b.trees_) {
    auto list = nlohmann::json::array();
    for (const auto& t : per_class) list.push_back(to_json(t));
    trees.push_back(std::move(list));
  }
  return {{"config", to_json(b.config_)},
          {"num_classes", b.num_classes_},
          {"num_features", b.num_features_},
          {"base_score", b.base_score_},
          {"trees", std::move(trees)}};
}

Booster booster_from_json(const nlohmann::json& doc) {
  Booster b;
  try {
    b.config_ = booster_config_from_json(doc.at("config"));
    b.num_classes_ = doc.at("num_classes").get<std::size_t>();
    b.num_features_ = doc.at("num_features").get<std::size_t>();
    b.base_score_ = doc.at("base_score").get<std::vector<double>>();
    for (const auto& per_class : doc.at("trees")) {
      std::vector<DecisionTree> list;
      for (const auto& t : per_class) list.push_back(tree_from_json(t));
      b.trees_.push_back(std::move(list));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("booster: ") + e.what());
  }
  if (b.num_classes_ < 2 || b.base_score_.size() != b.num_classes_ || b.trees_.size() != b.num_classes_) {
    throw Error(ErrorCode::kMalformedDocument, "booster: class count mismatch");
  }
  for (const auto& per_class : b.trees_) {
    for (const auto& t : per_class) {
      for (const auto& node : t.nodes()) {
        if (!node.is_leaf() && static_cast<std::size_t>(node.feature) >= b.num_features_) {
          throw Error(ErrorCode::kMalformedDocument, "booster: split feature out of range");
        }
      }
    }
  }
  return b;
}

}  // namespace crashcast::boosting
