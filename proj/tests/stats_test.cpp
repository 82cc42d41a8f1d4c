#include "fdhw/stats.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"

using namespace fdhw;

namespace {

std::vector<double> vec(std::initializer_list<double> v) { return v; }

FeatureMatrix cohort(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> age(50, 80);
  std::normal_distribution<double> noise(0.0, 1.0);
  FeatureMatrix m;
  m.columns = {"age_linear", "age_noise", "independent"};
  for (std::size_t i = 0; i < n; ++i) {
    SubjectInfo s{"S" + std::to_string(i), i % 2 ? Label::PD : Label::HC, std::round(age(gen) * 10) / 10,
                  i % 3 ? Gender::M : Gender::F};
    m.subjects.push_back(s);
    m.rows.push_back({2.0 * *s.age + 1.0, *s.age + 5.0 * noise(gen), noise(gen)});
  }
  return m;
}

std::vector<double> ages(const FeatureMatrix& m) {
  std::vector<double> a;
  for (const auto& s : m.subjects) a.push_back(*s.age);
  return a;
}

// q_i = min over order positions k >= rank(i) of p_(k) * m / k, capped at 1.
std::vector<double> bh_brute(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<double> q(m);
  for (std::size_t i = 0; i < m; ++i) {
    double best = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (p[j] < p[i]) continue;
      std::size_t rank = 0;  // largest position p[j] can occupy among ties
      for (double v : p) rank += v <= p[j];
      best = std::min(best, p[j] * static_cast<double>(m) / static_cast<double>(rank));
    }
    q[i] = best;
  }
  return q;
}

}  // namespace

TEST(Pearson, IdentityIsOne) {
  const auto x = vec({1, 2, 3, 4, 5});
  const auto c = pearson(x, x);
  EXPECT_DOUBLE_EQ(c.coef, 1.0);
  EXPECT_EQ(c.p, 0.0);
}

TEST(Pearson, HandExample) {
  const auto c = pearson(vec({1, 2, 3, 4}), vec({2, 1, 4, 3}));
  EXPECT_NEAR(c.coef, 0.6, 1e-15);
  const double t = 0.6 * std::sqrt(2.0 / (1.0 - 0.36));
  EXPECT_NEAR(c.p, oracle::t_two_sided(t, 2.0), 1e-9);
  EXPECT_NEAR(c.p, 0.4, 1e-12);
}

TEST(Pearson, PValueMatchesQuadrature) {
  for (std::size_t n : {5u, 12u, 40u, 68u}) {
    for (double r : {-0.9, -0.31, 0.05, 0.5408}) {
      const double t = r * std::sqrt((n - 2.0) / (1.0 - r * r));
      EXPECT_NEAR(correlation_p_value(r, n), oracle::t_two_sided(t, n - 2.0), 1e-9) << n << " " << r;
    }
  }
}

TEST(Pearson, OrthogonalIsZero) {
  const auto y = vec({1, 2, 3, 4, 5, 6});
  auto x = vec({3, -1, 4, 1, -5, 9});
  const double my = 3.5;
  double sxy = 0, syy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) sxy += x[i] * (y[i] - my), syy += (y[i] - my) * (y[i] - my);
  for (std::size_t i = 0; i < y.size(); ++i) x[i] -= sxy / syy * (y[i] - my);
  EXPECT_NEAR(pearson(x, y).coef, 0.0, 1e-12);
}

TEST(Pearson, Errors) {
  EXPECT_THROW(pearson(vec({1, 1, 1, 1}), vec({1, 2, 3, 4})), std::invalid_argument);
  EXPECT_THROW(pearson(vec({1, 2, 3}), vec({1, 2, 3})), std::invalid_argument);
  EXPECT_THROW(pearson(vec({1, 2, 3, 4}), vec({1, 2, 3})), std::invalid_argument);
}

TEST(Pearson, PointBiserial) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> d(0, 1);
  std::vector<double> x(37), g(37);
  for (std::size_t i = 0; i < x.size(); ++i) {
    g[i] = i % 3 == 0 ? 1.0 : 0.0;
    x[i] = d(gen) + g[i];
  }
  double m1 = 0, m0 = 0, n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) (g[i] ? (m1 += x[i], n1 += 1) : (m0 += x[i], n0 += 1));
  m1 /= n1;
  m0 /= n0;
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sn = std::sqrt(ss / n);
  const double rpb = (m1 - m0) / sn * std::sqrt(n1 * n0 / (n * n));
  EXPECT_NEAR(pearson(x, g).coef, rpb, 1e-12);
}

TEST(Spearman, HandExample) { EXPECT_NEAR(spearman(vec({1, 2, 3, 4}), vec({3, 1, 2, 4})).coef, 0.4, 1e-15); }

TEST(Spearman, ThreePointExample) {
  // Below the n >= 4 precondition, so check the rank arithmetic directly.
  const auto rx = mid_ranks(vec({1, 2, 3}));
  const auto ry = mid_ranks(vec({3, 1, 2}));
  double d2 = 0;
  for (int i = 0; i < 3; ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  EXPECT_DOUBLE_EQ(1.0 - 6.0 * d2 / (3 * 8), -0.5);
  EXPECT_THROW(spearman(vec({1, 2, 3}), vec({3, 1, 2})), std::invalid_argument);
}

TEST(Spearman, MidRanks) {
  EXPECT_EQ(mid_ranks(vec({1, 1, 2})), vec({1.5, 1.5, 3}));
  EXPECT_EQ(mid_ranks(vec({5, 3, 5, 5, 1})), vec({4, 2, 4, 4, 1}));
}

TEST(Spearman, NoTiesMatchesRankDifferenceFormula) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(15), y(15);
    std::iota(x.begin(), x.end(), 0.0);
    std::iota(y.begin(), y.end(), 0.0);
    std::shuffle(y.begin(), y.end(), gen);
    double d2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
    const double n = 15;
    EXPECT_NEAR(spearman(x, y).coef, 1.0 - 6.0 * d2 / (n * (n * n - 1)), 1e-12);
  }
}

TEST(Spearman, MonotoneInvariance) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> d(0, 1);
  std::vector<double> x(30), y(30), fx(30);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = d(gen);
    y[i] = x[i] + d(gen);
    fx[i] = std::exp(3 * x[i]) + 7;
  }
  const auto a = spearman(x, y);
  const auto b = spearman(fx, y);
  EXPECT_EQ(a.coef, b.coef);
  EXPECT_EQ(a.p, b.p);
  EXPECT_DOUBLE_EQ(spearman(x, fx).coef, 1.0);
}

TEST(FdrBh, Examples) {
  EXPECT_EQ(fdr_bh(vec({0.01, 0.02, 0.03})), vec({0.03, 0.03, 0.03}));
  EXPECT_EQ(fdr_bh(vec({1.0})), vec({1.0}));
  EXPECT_TRUE(fdr_bh({}).empty());
}

TEST(FdrBh, MatchesBruteForceAndProperties) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(1 + trial % 25);
    for (auto& v : p) v = trial % 4 == 0 ? std::round(u(gen) * 5) / 5 : u(gen) * u(gen);
    const auto q = fdr_bh(p);
    const auto ref = bh_brute(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_NEAR(q[i], ref[i], 1e-15);
      EXPECT_GE(q[i], p[i]);
      EXPECT_LE(q[i], 1.0);
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[i] < p[j]) EXPECT_LE(q[i], q[j]);
      }
    }
    std::vector<std::size_t> perm(p.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<double> pp(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) pp[i] = p[perm[i]];
    const auto qq = fdr_bh(pp);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(qq[i], q[perm[i]]);
  }
}

TEST(Residualize, Examples) {
  const auto m = cohort(40, 1);
  const auto r = residualize(m, {});
  EXPECT_TRUE(r.warnings.empty());
  const auto lin = r.matrix.column(0);
  for (double v : lin) EXPECT_NEAR(v, 0.0, 1e-9);
  EXPECT_LE(std::abs(pearson(r.matrix.column(1), ages(m)).coef), 1e-9);
  EXPECT_EQ(r.matrix.subjects[3].label, m.subjects[3].label);
}

TEST(Residualize, CovariateFreeFeatureIsCentred) {
  auto m = cohort(12, 2);
  m.columns = {"c"};
  // Orthogonal to age and gender by construction: x = f(i) averaged out in pairs
  // is hard to guarantee, so use intercept-only residualization instead.
  for (std::size_t i = 0; i < m.n_rows(); ++i) m.rows[i] = {static_cast<double>(i * i)};
  const auto r = residualize(m, {.age = false, .gender = false});
  EXPECT_EQ(r.matrix.rows, m.rows);

  // With both covariates the residual of an already-orthogonal feature is feature - mean.
  auto m2 = cohort(8, 2);
  for (std::size_t i = 0; i < 8; ++i) {
    m2.subjects[i].age = i < 4 ? 60.0 : 70.0;
    m2.subjects[i].gender = i % 2 ? Gender::M : Gender::F;
  }
  m2.columns = {"c"};
  const std::vector<double> x{1, -1, -1, 1, 3, -3, -3, 3};  // zero mean within every age and gender cell
  for (std::size_t i = 0; i < 8; ++i) m2.rows[i] = {x[i] + 10.0};
  const auto r2 = residualize(m2, {});
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(r2.matrix.rows[i][0], x[i], 1e-12);
}

TEST(Residualize, Idempotent) {
  const auto m = cohort(50, 4);
  const auto r1 = residualize(m, {}).matrix;
  const auto r2 = residualize(r1, {}).matrix;
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    for (std::size_t j = 0; j < m.n_cols(); ++j) EXPECT_NEAR(r1.rows[i][j], r2.rows[i][j], 1e-9);
  }
}

TEST(Residualize, SingleGenderDropsCovariateWithWarning) {
  auto m = cohort(20, 5);
  for (auto& s : m.subjects) s.gender = Gender::F;
  const auto r = residualize(m, {});
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("gender"), std::string::npos);
  for (double v : r.matrix.column(0)) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(Residualize, MissingCovariateIsError) {
  auto m = cohort(10, 6);
  m.subjects[2].age.reset();
  EXPECT_THROW(residualize(m, {}), std::invalid_argument);
  EXPECT_NO_THROW(residualize(m, {.age = false, .gender = true}));
}

TEST(CorrelationReport, RanksInjectedDifference) {
  auto m = cohort(40, 7);
  std::mt19937_64 gen(8);
  std::normal_distribution<double> d(0, 1);
  m.columns.push_back("relstd horizontal_velocity a=0.6 [C]");
  m.columns.push_back("flat");
  m.columns.push_back("holey");
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    const bool pd = *m.subjects[i].label == Label::PD;
    m.rows[i].push_back(d(gen) + (pd ? 2.0 : 0.0));
    m.rows[i].push_back(pd ? 1.0 : 1.0);
    m.rows[i].push_back(i == 3 ? kMissing : d(gen));
  }
  const auto rep = correlation_report(m, {});
  ASSERT_FALSE(rep.rows.empty());
  EXPECT_EQ(rep.rows[0].feature, "relstd horizontal_velocity a=0.6 [C]");
  EXPECT_LT(rep.rows[0].rho, 0.0);
  EXPECT_LT(rep.rows[0].p_s_adj, 0.05);
  // Exact covariate fits and constants residualize to zero; gaps leave the family too.
  EXPECT_EQ(rep.excluded, (std::vector<std::string>{"age_linear", "flat", "holey"}));
  EXPECT_EQ(rep.rows.size(), 3u);
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    const auto& r = rep.rows[k];
    EXPECT_GE(r.p_s_adj, r.p_s);
    EXPECT_GE(r.p_p_adj, r.p_p);
    EXPECT_LE(std::abs(r.rho), 1.0);
    EXPECT_LE(std::abs(r.r), 1.0);
    if (k > 0) EXPECT_LE(rep.rows[k - 1].p_s_adj, r.p_s_adj);
  }
  EXPECT_EQ(top_rows(rep, 1).size(), 1u);
  EXPECT_EQ(top_rows(rep, 10).size(), 3u);
}

TEST(CorrelationReport, IdenticalGroupsGiveZeroRho) {
  FeatureMatrix m;
  m.columns = {"same", "diff"};
  for (int i = 0; i < 8; ++i) {
    const bool pd = i >= 4;
    m.subjects.push_back({"S" + std::to_string(i), pd ? Label::PD : Label::HC, 60.0, Gender::F});
    const double base = static_cast<double>(i % 4);
    m.rows.push_back({base, base + (pd ? 5.0 : 0.0)});
  }
  const auto rep = correlation_report(m, {.age = false, .gender = false});
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0].feature, "diff");
  EXPECT_EQ(rep.rows[1].feature, "same");
  EXPECT_NEAR(rep.rows[1].rho, 0.0, 1e-15);
}

TEST(CorrelationReport, NeedsFourPerClass) {
  auto m = cohort(7, 9);
  EXPECT_THROW(correlation_report(m, {}), std::invalid_argument);
}

TEST(CorrelationCsv, Formats) {
  std::vector<CorrelationRow> rows{{"f", -0.5408, 1e-5, 0.000123456, -0.5, 0.01, 0.02}};
  EXPECT_EQ(write_correlation_csv(rows, false),
            "feature,rho,p_s,p_s_adj,r,p_p,p_p_adj\nf,-0.5408,0.0000,0.0001,-0.5000,0.0100,0.0200\n");
  EXPECT_EQ(write_correlation_csv(rows, true),
            "feature,rho,p_s,p_s_adj,r,p_p,p_p_adj\nf,-0.54079999999999995,1.0000000000000001e-05,"
            "0.00012345600000000001,-0.5,0.01,0.02\n");
}
