#include "fdhw/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "fdhw/io.hpp"

namespace fdhw {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("correlation inputs differ in length");
  if (x.size() < 4) throw std::invalid_argument("correlation needs at least 4 pairs");
}

double centred_ss(std::span<const double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss;
}

// Residuals that are round-off of an exact covariate fit count as constant.
bool explained_away(std::span<const double> raw, std::span<const double> resid) {
  const double before = centred_ss(raw);
  return before == 0.0 || centred_ss(resid) <= 1e-24 * before;
}

}  // namespace

double correlation_p_value(double r, std::size_t n) {
  const double df = static_cast<double>(n) - 2.0;
  const double r2 = r * r;
  if (r2 >= 1.0) return 0.0;
  const double t = std::abs(r) * std::sqrt(df / (1.0 - r2));
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("correlation undefined for constant input");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return {r, correlation_p_value(r, x.size())};
}

std::vector<double> mid_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = mid_ranks(x);
  const auto ry = mid_ranks(y);
  return pearson(rx, ry);
}

std::vector<double> fdr_bh(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::vector<double> q(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const double cand = p[idx[r]] * static_cast<double>(m) / static_cast<double>(r + 1);
    running = std::min(running, cand);
    q[idx[r]] = std::min(running, 1.0);
  }
  return q;
}

Residualized residualize(const FeatureMatrix& m, CovariateSpec spec) {
  Residualized out{m, {}};
  const std::size_t n = m.n_rows();
  if (!spec.age && !spec.gender) return out;

  for (const auto& s : m.subjects) {
    if ((spec.age && !s.age) || (spec.gender && !s.gender)) {
      throw std::invalid_argument(fmt::format("subject '{}' lacks covariates", s.subject_id));
    }
  }

  // Candidate covariates, centred for conditioning (the intercept absorbs the shift).
  std::vector<std::pair<std::string, std::vector<double>>> candidates;
  if (spec.age) {
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = *m.subjects[i].age;
    candidates.emplace_back("age", std::move(a));
  }
  if (spec.gender) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = *m.subjects[i].gender == Gender::M ? 1.0 : 0.0;
    candidates.emplace_back("gender", std::move(g));
  }
  for (auto& [name, v] : candidates) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(std::max<std::size_t>(n, 1));
    for (auto& x : v) x -= mean;
  }

  for (std::size_t j = 0; j < m.n_cols(); ++j) {
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_missing(m.rows[i][j])) present.push_back(i);
    }
    if (present.empty()) continue;

    // Greedy rank check: keep a covariate only if it adds a dimension.
    std::vector<const std::vector<double>*> kept;
    Eigen::MatrixXd design(present.size(), 1);
    design.setOnes();
    for (const auto& [name, v] : candidates) {
      Eigen::MatrixXd trial(present.size(), design.cols() + 1);
      trial.leftCols(design.cols()) = design;
      for (std::size_t r = 0; r < present.size(); ++r) trial(r, design.cols()) = v[present[r]];
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
      if (qr.rank() == trial.cols()) {
        design = std::move(trial);
      } else {
        const auto msg = fmt::format("{}: covariate '{}' dropped (rank-deficient design)", m.columns[j], name);
        out.warnings.push_back(msg);
      }
    }

    Eigen::VectorXd y(present.size());
    for (std::size_t r = 0; r < present.size(); ++r) y(r) = m.rows[present[r]][j];
    // Normal equations, solved with a pivoted QR.
    const Eigen::MatrixXd xtx = design.transpose() * design;
    const Eigen::VectorXd xty = design.transpose() * y;
    const Eigen::VectorXd beta = xtx.colPivHouseholderQr().solve(xty);
    const Eigen::VectorXd resid = y - design * beta;
    for (std::size_t r = 0; r < present.size(); ++r) out.matrix.rows[present[r]][j] = resid(r);
  }

  // Collapse duplicate warnings (same covariate dropped for every column).
  std::vector<std::string> compact;
  for (const auto& w : out.warnings) {
    const auto tail = w.substr(w.find(": ") + 2);
    if (std::find(compact.begin(), compact.end(), tail) == compact.end()) compact.push_back(tail);
  }
  out.warnings = std::move(compact);
  return out;
}

double status_code(Label l) { return l == Label::HC ? 1.0 : 0.0; }

CorrelationReport correlation_report(const FeatureMatrix& m, CovariateSpec spec) {
  std::size_t n_pd = 0, n_hc = 0;
  for (const auto& s : m.subjects) {
    if (!s.label) throw std::invalid_argument(fmt::format("subject '{}' has no label", s.subject_id));
    (*s.label == Label::PD ? n_pd : n_hc)++;
  }
  if (n_pd < 4 || n_hc < 4) {
    throw std::invalid_argument(
        fmt::format("correlation analysis needs >= 4 subjects per class (PD={}, HC={})", n_pd, n_hc));
  }

  auto resid = residualize(m, spec);
  CorrelationReport report;
  report.warnings = std::move(resid.warnings);

  std::vector<double> ps, pp;
  for (std::size_t j = 0; j < m.n_cols(); ++j) {
    std::vector<double> feat, status;
    bool any_missing = false;
    for (std::size_t i = 0; i < m.n_rows(); ++i) {
      const double v = resid.matrix.rows[i][j];
      any_missing = any_missing || is_missing(v);
      feat.push_back(v);
      status.push_back(status_code(*m.subjects[i].label));
    }
    if (any_missing || explained_away(m.column(j), feat)) {
      report.excluded.push_back(m.columns[j]);
      continue;
    }
    try {
      const auto s = spearman(feat, status);
      const auto p = pearson(feat, status);
      report.rows.push_back({m.columns[j], s.coef, s.p, 0.0, p.coef, p.p, 0.0});
      ps.push_back(s.p);
      pp.push_back(p.p);
    } catch (const std::invalid_argument&) {
      report.excluded.push_back(m.columns[j]);
    }
  }

  const auto qs = fdr_bh(ps);
  const auto qp = fdr_bh(pp);
  for (std::size_t k = 0; k < report.rows.size(); ++k) {
    report.rows[k].p_s_adj = qs[k];
    report.rows[k].p_p_adj = qp[k];
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) {
    if (a.p_s_adj != b.p_s_adj) return a.p_s_adj < b.p_s_adj;
    return std::abs(a.rho) > std::abs(b.rho);
  });
  return report;
}

std::vector<CorrelationRow> top_rows(const CorrelationReport& report, std::size_t k) {
  const auto n = std::min(k, report.rows.size());
  return {report.rows.begin(), report.rows.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::string write_correlation_csv(std::span<const CorrelationRow> rows, bool machine) {
  auto num = machine ? fmt_machine : fmt_human;
  std::string out = "feature,rho,p_s,p_s_adj,r,p_p,p_p_adj\n";
  for (const auto& r : rows) {
    fmt::format_to(std::back_inserter(out), "{},{},{},{},{},{},{}\n", r.feature, num(r.rho), num(r.p_s),
                   num(r.p_s_adj), num(r.r), num(r.p_p), num(r.p_p_adj));
  }
  return out;
}

}  // namespace fdhw
