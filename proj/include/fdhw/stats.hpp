#pragma once

// Correlation of features with clinical status: Pearson/Spearman with
// Student-t p-values, Benjamini-Hochberg adjustment and OLS residualization
// against age and gender.

#include <span>
#include <string>
#include <vector>

#include "fdhw/features.hpp"

namespace fdhw {

struct Correlation {
  double coef;
  double p;  // two-sided, t approximation with n - 2 degrees of freedom
};

// Throws std::invalid_argument on length mismatch, n < 4 or constant input.
Correlation pearson(std::span<const double> x, std::span<const double> y);
Correlation spearman(std::span<const double> x, std::span<const double> y);

// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> mid_ranks(std::span<const double> x);

// Two-sided p-value of a correlation coefficient r from n pairs.
double correlation_p_value(double r, std::size_t n);

// Benjamini-Hochberg step-up adjusted p-values, in input order.
std::vector<double> fdr_bh(std::span<const double> p);

struct CovariateSpec {
  bool age = true;
  bool gender = true;
};

struct Residualized {
  FeatureMatrix matrix;
  std::vector<std::string> warnings;  // dropped covariates and the reason
};

// Replaces each column by its OLS residual on [1, age, gender(F=0, M=1)],
// using the rows where the column is present. Covariates that make the
// design rank-deficient are dropped with a warning.
Residualized residualize(const FeatureMatrix& m, CovariateSpec spec);

struct CorrelationRow {
  std::string feature;
  double rho, p_s, p_s_adj;
  double r, p_p, p_p_adj;
};

struct CorrelationReport {
  std::vector<CorrelationRow> rows;   // full family, sorted
  std::vector<std::string> excluded;  // columns left out of the family
  std::vector<std::string> warnings;
};

// Status coding used by correlation_report: HC = 1, PD = 0.
double status_code(Label l);

// Residualizes, correlates each column with status, adjusts both p-value
// families by BH and sorts by (p_s_adj ascending, |rho| descending).
// Requires >= 4 subjects per class.
CorrelationReport correlation_report(const FeatureMatrix& m, CovariateSpec spec = {});

std::vector<CorrelationRow> top_rows(const CorrelationReport& report, std::size_t k);

// `feature,rho,p_s,p_s_adj,r,p_p,p_p_adj`; machine = 17 significant digits,
// otherwise 4 decimals.
std::string write_correlation_csv(std::span<const CorrelationRow> rows, bool machine);

}  // namespace fdhw
