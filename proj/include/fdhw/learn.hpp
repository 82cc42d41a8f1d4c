#pragma once

// Binary PD/HC classification: a small second-order gradient-boosted tree
// learner, repeated stratified cross-validation and randomized search.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdhw/features.hpp"

namespace fdhw {

struct GBTConfig {
  std::size_t n_estimators = 100;
  double learning_rate = 0.1;
  double gamma = 0.0;
  std::size_t max_depth = 6;
  double subsample = 1.0;
  double colsample_bylevel = 1.0;
  double colsample_bytree = 1.0;
  double scale_pos_weight = 1.0;
  double min_child_weight = 1.0;
  std::uint64_t seed = 0;

  static constexpr double kLambda = 1.0;

  void validate() const;  // std::invalid_argument on out-of-range fields
  bool operator==(const GBTConfig&) const = default;
};

// Candidate values for random_search.
namespace grid {
inline constexpr double learning_rate[] = {0.001, 0.01, 0.1, 0.2, 0.3};
inline constexpr double gamma[] = {0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.5};
inline constexpr std::size_t max_depth[] = {6, 8, 10, 12, 15};
inline constexpr double subsample[] = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
inline constexpr double colsample_bylevel[] = {0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
inline constexpr double colsample_bytree[] = {0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
inline constexpr double scale_pos_weight[] = {1, 2, 3, 4};
inline constexpr double min_child_weight[] = {0.5, 1.0, 3.0, 5.0, 7.0, 10.0};
}  // namespace grid

// Dense training data; y = 1 for PD (positive class), 0 for HC.
struct Dataset {
  std::vector<std::vector<double>> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
};

// Labels are required; missing feature values stay NaN.
Dataset to_dataset(const FeatureMatrix& m);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;  // leaf output (already scaled by the learning rate)
};

struct Tree {
  std::vector<TreeNode> nodes;
  double margin(std::span<const double> row) const;
};

class GBTModel {
 public:
  double base_margin = 0.0;
  std::vector<Tree> trees;
  std::vector<double> train_loss;  // weighted log-loss after each round, on all training rows

  double margin(std::span<const double> row) const;
  double probability(std::span<const double> row) const;
  int predict(std::span<const double> row) const { return probability(row) >= 0.5 ? 1 : 0; }
};

// Requires >= 2 subjects per class and no missing values.
GBTModel train_gbt(const Dataset& data, const GBTConfig& cfg);
GBTModel train_gbt(const FeatureMatrix& m, const GBTConfig& cfg);

struct ConfusionMatrix {
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
  bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricsReport {
  double mcc = 0, bacc = 0, sen = 0, spe = 0;
  std::optional<double> pre, f1;  // undefined when nothing is predicted positive
  ConfusionMatrix matrix;
  bool operator==(const MetricsReport&) const = default;
};

MetricsReport compute_metrics(const ConfusionMatrix& m);

struct CVPlan {
  std::size_t folds = 5;
  std::size_t repetitions = 10;
  bool stratified = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// Fold index per subject for one repetition.
std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t folds, std::uint64_t key);

// Median of the non-missing entries of each column (0 if none).
std::vector<double> column_medians(const Dataset& data, std::span<const std::size_t> rows);

struct CVResult {
  MetricsReport summary;                    // metrics averaged over repetitions; matrix of the median-BACC repetition
  std::vector<MetricsReport> repetitions;  // pooled out-of-fold metrics per repetition
};

CVResult cross_validate(const Dataset& data, const GBTConfig& cfg, const CVPlan& plan);

GBTConfig sample_config(std::uint64_t seed, std::size_t iteration);

struct SearchResult {
  GBTConfig best;
  CVResult report;
  std::size_t best_iteration = 0;
};

// Best mean BACC, then MCC, then lowest iteration. jobs > 1 evaluates
// iterations on worker threads; the result does not depend on jobs.
SearchResult random_search(const Dataset& data, const CVPlan& plan, std::size_t iterations, std::uint64_t seed,
                           std::size_t jobs = 1);

}  // namespace fdhw
