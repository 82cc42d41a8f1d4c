#include "fdhw/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "fdhw/parallel.hpp"
#include "fdhw/rng.hpp"

namespace fdhw {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

double softplus(double m) { return m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)); }

double sigmoid(double m) {
  if (m >= 0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

// Count drawn from a fraction of n, at least one.
std::size_t fraction_of(double frac, std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9)));
}

std::vector<std::size_t> draw_subset(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (k < n) {
    rng.shuffle(idx.begin(), idx.end());
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

template <typename T>
T pick(Rng& rng, std::span<const T> values) {
  return values[rng.below(values.size())];
}

struct Presorted {
  // Per feature: (value, row) ascending by value, ties by row.
  std::vector<std::vector<std::pair<double, std::uint32_t>>> order;
};

Presorted presort(const Dataset& d) {
  const std::size_t n = d.size(), nf = d.x.front().size();
  Presorted p;
  p.order.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    auto& o = p.order[f];
    o.reserve(n);
    for (std::size_t i = 0; i < n; ++i) o.emplace_back(d.x[i][f], static_cast<std::uint32_t>(i));
    std::sort(o.begin(), o.end());
  }
  return p;
}

struct Split {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

Tree grow_tree(const Dataset& d, const Presorted& ps, std::span<const double> g, std::span<const double> h,
               std::span<const std::size_t> rows, std::span<const std::size_t> tree_features, const GBTConfig& cfg,
               Rng& rng) {
  const double lambda = GBTConfig::kLambda;
  Tree tree;
  tree.nodes.emplace_back();
  std::vector<int> node_of(d.size(), -1);
  for (auto i : rows) node_of[i] = 0;

  std::vector<int> active{0};
  std::vector<int> local(1, -1);
  std::vector<double> G, H, GL, HL, last;
  std::vector<char> seen;
  std::vector<Split> best;

  auto leaf_value = [&](double gs, double hs) { return -cfg.learning_rate * gs / (hs + lambda); };

  for (std::size_t depth = 0; !active.empty(); ++depth) {
    const std::size_t na = active.size();
    local.assign(tree.nodes.size(), -1);
    for (std::size_t a = 0; a < na; ++a) local[static_cast<std::size_t>(active[a])] = static_cast<int>(a);
    G.assign(na, 0.0);
    H.assign(na, 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (node_of[i] < 0) continue;
      const int a = local[static_cast<std::size_t>(node_of[i])];
      if (a < 0) continue;
      G[static_cast<std::size_t>(a)] += g[i];
      H[static_cast<std::size_t>(a)] += h[i];
    }

    best.assign(na, Split{});
    if (depth < cfg.max_depth) {
      std::vector<std::size_t> level(tree_features.begin(), tree_features.end());
      const std::size_t kl = fraction_of(cfg.colsample_bylevel, level.size());
      if (kl < level.size()) {
        rng.shuffle(level.begin(), level.end());
        level.resize(kl);
        std::sort(level.begin(), level.end());
      }
      for (auto f : level) {
        GL.assign(na, 0.0);
        HL.assign(na, 0.0);
        last.assign(na, 0.0);
        seen.assign(na, 0);
        for (const auto& [v, i] : ps.order[f]) {
          const int k = node_of[i];
          if (k < 0) continue;
          const int ai = local[static_cast<std::size_t>(k)];
          if (ai < 0) continue;
          const auto a = static_cast<std::size_t>(ai);
          if (seen[a] && v > last[a]) {
            const double gr = G[a] - GL[a], hr = H[a] - HL[a];
            if (HL[a] >= cfg.min_child_weight && hr >= cfg.min_child_weight) {
              const double gain = GL[a] * GL[a] / (HL[a] + lambda) + gr * gr / (hr + lambda) -
                                  G[a] * G[a] / (H[a] + lambda) - cfg.gamma;
              if (gain > best[a].gain) {
                double thr = last[a] + 0.5 * (v - last[a]);
                if (!(thr > last[a])) thr = v;
                best[a] = {gain, static_cast<int>(f), thr};
              }
            }
          }
          GL[a] += g[i];
          HL[a] += h[i];
          last[a] = v;
          seen[a] = 1;
        }
      }
    }

    std::vector<int> next;
    for (std::size_t a = 0; a < na; ++a) {
      const auto id = static_cast<std::size_t>(active[a]);
      if (best[a].feature < 0) {
        tree.nodes[id].value = leaf_value(G[a], H[a]);
        continue;
      }
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[id];
      node.feature = best[a].feature;
      node.threshold = best[a].threshold;
      node.left = l;
      node.right = l + 1;
      next.push_back(l);
      next.push_back(l + 1);
    }
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (node_of[i] < 0) continue;
      const auto& node = tree.nodes[static_cast<std::size_t>(node_of[i])];
      if (node.feature < 0) continue;
      node_of[i] = d.x[i][static_cast<std::size_t>(node.feature)] < node.threshold ? node.left : node.right;
    }
    active = std::move(next);
  }
  return tree;
}

}  // namespace

void GBTConfig::validate() const {
  require(n_estimators >= 1, "n_estimators must be >= 1");
  require(learning_rate > 0 && std::isfinite(learning_rate), "learning_rate must be > 0");
  require(gamma >= 0, "gamma must be >= 0");
  require(max_depth >= 1, "max_depth must be >= 1");
  require(subsample > 0 && subsample <= 1, "subsample must be in (0, 1]");
  require(colsample_bylevel > 0 && colsample_bylevel <= 1, "colsample_bylevel must be in (0, 1]");
  require(colsample_bytree > 0 && colsample_bytree <= 1, "colsample_bytree must be in (0, 1]");
  require(scale_pos_weight > 0, "scale_pos_weight must be > 0");
  require(min_child_weight >= 0, "min_child_weight must be >= 0");
}

Dataset to_dataset(const FeatureMatrix& m) {
  Dataset d;
  d.x = m.rows;
  for (const auto& s : m.subjects) {
    if (!s.label) throw std::invalid_argument(fmt::format("subject '{}' has no label", s.subject_id));
    d.y.push_back(*s.label == Label::PD ? 1 : 0);
  }
  return d;
}

double Tree::margin(std::span<const double> row) const {
  std::size_t k = 0;
  while (nodes[k].feature >= 0) {
    const auto& n = nodes[k];
    k = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
  }
  return nodes[k].value;
}

double GBTModel::margin(std::span<const double> row) const {
  double m = base_margin;
  for (const auto& t : trees) m += t.margin(row);
  return m;
}

double GBTModel::probability(std::span<const double> row) const { return sigmoid(margin(row)); }

GBTModel train_gbt(const Dataset& d, const GBTConfig& cfg) {
  cfg.validate();
  const std::size_t n = d.size();
  require(d.x.size() == n && n > 0, "dataset rows and labels differ in count");
  const std::size_t nf = d.x.front().size();
  require(nf > 0, "dataset has no features");
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    require(d.x[i].size() == nf, "ragged feature rows");
    for (double v : d.x[i]) require(std::isfinite(v), "training data must not contain missing values");
    n_pos += d.y[i] == 1;
  }
  if (n_pos == 0 || n_pos == n) throw std::invalid_argument("training data contains a single class");
  require(n_pos >= 2 && n - n_pos >= 2, "training needs at least 2 subjects per class");

  std::vector<double> w(n);
  double sw = 0, swy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = d.y[i] ? cfg.scale_pos_weight : 1.0;
    sw += w[i];
    swy += w[i] * d.y[i];
  }
  const double prior = swy / sw;

  GBTModel model;
  model.base_margin = std::log(prior / (1.0 - prior));
  const auto ps = presort(d);
  std::vector<double> margin(n, model.base_margin), g(n), h(n);

  for (std::size_t t = 0; t < cfg.n_estimators; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      g[i] = w[i] * (p - d.y[i]);
      h[i] = w[i] * p * (1.0 - p);
    }
    Rng rng(Rng::key(cfg.seed, {t}));
    const auto rows = draw_subset(rng, n, cfg.subsample < 1.0 ? fraction_of(cfg.subsample, n) : n);
    const auto feats = draw_subset(rng, nf, fraction_of(cfg.colsample_bytree, nf));
    model.trees.push_back(grow_tree(d, ps, g, h, rows, feats, cfg, rng));

    double loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      margin[i] += model.trees.back().margin(d.x[i]);
      loss += w[i] * (softplus(margin[i]) - d.y[i] * margin[i]);
    }
    model.train_loss.push_back(loss / sw);
  }
  return model;
}

GBTModel train_gbt(const FeatureMatrix& m, const GBTConfig& cfg) { return train_gbt(to_dataset(m), cfg); }

MetricsReport compute_metrics(const ConfusionMatrix& m) {
  require(m.tp + m.fn >= 1 && m.tn + m.fp >= 1, "confusion matrix needs both classes");
  const double tp = static_cast<double>(m.tp), fn = static_cast<double>(m.fn);
  const double fp = static_cast<double>(m.fp), tn = static_cast<double>(m.tn);
  MetricsReport r;
  r.matrix = m;
  r.sen = tp / (tp + fn);
  r.spe = tn / (tn + fp);
  r.bacc = 0.5 * (r.sen + r.spe);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  r.mcc = denom == 0.0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(denom);
  if (m.tp + m.fp > 0) {
    r.pre = tp / (tp + fp);
    r.f1 = *r.pre + r.sen == 0.0 ? 0.0 : 2.0 * *r.pre * r.sen / (*r.pre + r.sen);
  }
  return r;
}

void CVPlan::validate() const {
  require(folds >= 2, "cv folds must be >= 2");
  require(repetitions >= 1, "cv repetitions must be >= 1");
}

std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t folds, std::uint64_t key) {
  Rng rng(key);
  std::vector<std::size_t> fold(y.size());
  std::size_t c = 0;
  for (int cls : {1, 0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == cls) idx.push_back(i);
    }
    rng.shuffle(idx.begin(), idx.end());
    for (auto i : idx) fold[i] = c++ % folds;
  }
  return fold;
}

std::vector<double> column_medians(const Dataset& d, std::span<const std::size_t> rows) {
  const std::size_t nf = d.x.empty() ? 0 : d.x.front().size();
  std::vector<double> med(nf, 0.0), buf;
  for (std::size_t f = 0; f < nf; ++f) {
    buf.clear();
    for (auto i : rows) {
      if (!std::isnan(d.x[i][f])) buf.push_back(d.x[i][f]);
    }
    if (buf.empty()) continue;
    std::sort(buf.begin(), buf.end());
    const std::size_t k = buf.size() / 2;
    med[f] = buf.size() % 2 ? buf[k] : 0.5 * (buf[k - 1] + buf[k]);
  }
  return med;
}

CVResult cross_validate(const Dataset& d, const GBTConfig& cfg, const CVPlan& plan) {
  plan.validate();
  cfg.validate();
  const std::size_t n = d.size();
  const auto n_pos = static_cast<std::size_t>(std::count(d.y.begin(), d.y.end(), 1));
  if (n_pos < plan.folds || n - n_pos < plan.folds) {
    throw std::invalid_argument(
        fmt::format("each class needs at least {} subjects for {}-fold CV (PD={}, HC={})", plan.folds, plan.folds,
                    n_pos, n - n_pos));
  }

  CVResult out;
  for (std::size_t rep = 0; rep < plan.repetitions; ++rep) {
    std::vector<std::size_t> fold;
    for (std::size_t attempt = 0;; ++attempt) {
      const auto key = Rng::key(plan.seed, {rep, attempt});
      if (plan.stratified) {
        fold = stratified_folds(d.y, plan.folds, key);
      } else {
        Rng rng(key);
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx.begin(), idx.end());
        fold.assign(n, 0);
        for (std::size_t k = 0; k < n; ++k) fold[idx[k]] = k % plan.folds;
      }
      std::vector<int> has(2 * plan.folds, 0);
      for (std::size_t i = 0; i < n; ++i) has[2 * fold[i] + static_cast<std::size_t>(d.y[i])] = 1;
      if (std::all_of(has.begin(), has.end(), [](int v) { return v; })) break;
      if (attempt + 1 >= 100) throw std::runtime_error("could not draw folds containing both classes");
    }

    ConfusionMatrix cm;
    for (std::size_t f = 0; f < plan.folds; ++f) {
      std::vector<std::size_t> train_rows, test_rows;
      for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? test_rows : train_rows).push_back(i);
      const auto med = column_medians(d, train_rows);
      auto impute = [&](std::vector<double> row) {
        for (std::size_t j = 0; j < row.size(); ++j) {
          if (std::isnan(row[j])) row[j] = med[j];
        }
        return row;
      };
      Dataset train;
      for (auto i : train_rows) {
        train.x.push_back(impute(d.x[i]));
        train.y.push_back(d.y[i]);
      }
      GBTConfig c = cfg;
      c.seed = Rng::key(cfg.seed, {rep, f});
      const auto model = train_gbt(train, c);
      for (auto i : test_rows) {
        const int pred = model.predict(impute(d.x[i]));
        if (d.y[i]) {
          (pred ? cm.tp : cm.fn)++;
        } else {
          (pred ? cm.fp : cm.tn)++;
        }
      }
    }
    out.repetitions.push_back(compute_metrics(cm));
  }

  auto& s = out.summary;
  const double r = static_cast<double>(out.repetitions.size());
  double pre_sum = 0, f1_sum = 0;
  std::size_t pre_n = 0, f1_n = 0;
  for (const auto& m : out.repetitions) {
    s.mcc += m.mcc / r;
    s.bacc += m.bacc / r;
    s.sen += m.sen / r;
    s.spe += m.spe / r;
    if (m.pre) pre_sum += *m.pre, ++pre_n;
    if (m.f1) f1_sum += *m.f1, ++f1_n;
  }
  if (pre_n) s.pre = pre_sum / static_cast<double>(pre_n);
  if (f1_n) s.f1 = f1_sum / static_cast<double>(f1_n);

  std::vector<std::size_t> order(out.repetitions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return out.repetitions[a].bacc < out.repetitions[b].bacc; });
  s.matrix = out.repetitions[order[(order.size() - 1) / 2]].matrix;
  return out;
}

GBTConfig sample_config(std::uint64_t seed, std::size_t iteration) {
  Rng rng(Rng::key(seed, {iteration, 0x5ea7c4}));
  GBTConfig c;
  c.learning_rate = pick<double>(rng, grid::learning_rate);
  c.gamma = pick<double>(rng, grid::gamma);
  c.max_depth = pick<std::size_t>(rng, grid::max_depth);
  c.subsample = pick<double>(rng, grid::subsample);
  c.colsample_bylevel = pick<double>(rng, grid::colsample_bylevel);
  c.colsample_bytree = pick<double>(rng, grid::colsample_bytree);
  c.scale_pos_weight = pick<double>(rng, grid::scale_pos_weight);
  c.min_child_weight = pick<double>(rng, grid::min_child_weight);
  c.seed = rng.next_u64();
  return c;
}

SearchResult random_search(const Dataset& d, const CVPlan& plan, std::size_t iterations, std::uint64_t seed,
                           std::size_t jobs) {
  require(iterations >= 1, "search iterations must be >= 1");
  std::vector<GBTConfig> configs(iterations);
  for (std::size_t it = 0; it < iterations; ++it) configs[it] = sample_config(seed, it);
  std::vector<CVResult> results(iterations);

  parallel_for(iterations, jobs, [&](std::size_t it) { results[it] = cross_validate(d, configs[it], plan); });

  std::size_t best = 0;
  for (std::size_t it = 1; it < iterations; ++it) {
    const auto& a = results[it].summary;
    const auto& b = results[best].summary;
    if (a.bacc > b.bacc || (a.bacc == b.bacc && a.mcc > b.mcc)) best = it;
  }
  return {configs[best], std::move(results[best]), best};
}

}  // namespace fdhw
