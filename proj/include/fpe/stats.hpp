#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fpe::stats {

// Two-class softmax output for one image (or one aggregated patient).
struct PredictionRecord {
  std::string image_id;
  double prob_nonref{0.0};
  double prob_ref{0.0};

  // Throws Contract when a probability is outside [0,1] or the pair does not
  // sum to 1 within 1e-6.
  void validate() const;
  // Argmax decision; a tie goes to the referable class.
  bool predicts_referable() const noexcept { return prob_ref >= prob_nonref; }
};

struct RocPoint {
  double fpr{0.0};
  double tpr{0.0};
};

// Points run from (0,0) to (1,1). thresholds[i] is the score cutoff that
// yields points[i] (predict positive when score >= cutoff); the first
// cutoff is +inf.
struct RocCurve {
  std::vector<RocPoint> points;
  std::vector<double> thresholds;
};

enum class CiMethod { Bootstrap, Wilson, WilsonContinuityCorrected, Point };
std::string to_string(CiMethod method);

struct MetricReport {
  std::string name;
  double value{0.0};
  double ci_low{0.0};
  double ci_high{0.0};
  std::size_t n_pos{0};
  std::size_t n_neg{0};
  CiMethod method{CiMethod::Point};
  // False when the metric is undefined for the input (e.g. sensitivity
  // without positives); value and CI are then meaningless zeros.
  bool applicable{true};
};

struct BootstrapConfig {
  std::size_t n_resamples{1000};
  std::uint64_t seed{0};
  double lower_percentile{2.5};
  double upper_percentile{97.5};
  // Parallelism only; results do not depend on it.
  std::size_t workers{1};
};

struct Interval {
  double low{0.0};
  double high{0.0};
};

enum class WilsonVariant { Plain, ContinuityCorrected };

struct ConfusionCounts {
  std::size_t tp{0};
  std::size_t fn{0};
  std::size_t tn{0};
  std::size_t fp{0};
};

struct SensSpec {
  MetricReport sensitivity;
  MetricReport specificity;
  ConfusionCounts counts;
};

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

// Trapezoidal area over the ROC sweep, accumulated from integer counts so it
// coincides with the Mann-Whitney statistic.
double auc(std::span<const double> scores, std::span<const int> labels);

// Floating-point trapezoid over an already built curve.
double trapezoid_area(const RocCurve& curve);

// Percentile bootstrap. Resample r is a pure function of (seed, r), so the
// interval does not depend on config.workers.
MetricReport bootstrap_auc_ci(std::span<const double> scores, std::span<const int> labels,
                              const BootstrapConfig& config = {});

Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.96,
                         WilsonVariant variant = WilsonVariant::Plain);

ConfusionCounts confusion_argmax(std::span<const PredictionRecord> predictions, std::span<const int> labels);

SensSpec sens_spec_argmax(std::span<const PredictionRecord> predictions, std::span<const int> labels,
                          double z = 1.96, WilsonVariant variant = WilsonVariant::Plain);

// Base-2 entropy of the two-class distribution, in [0,1].
double prediction_entropy(const PredictionRecord& p);

// Linear interpolation between closest ranks (numpy's default). `sorted`
// must be ascending and nonempty; pct in [0,100].
double percentile(std::span<const double> sorted, double pct);

struct SetMetrics {
  std::size_t n{0};
  std::size_t n_pos{0};
  std::size_t n_neg{0};
  MetricReport auc;
  MetricReport sensitivity;
  MetricReport specificity;
  ConfusionCounts counts;
  double entropy_mean{0.0};
  double entropy_sd{0.0};
  RocCurve roc;
};

// AUC with bootstrap CI, argmax Se/Sp with Wilson CIs and entropy summary.
// Single-class inputs produce non-applicable AUC instead of throwing.
SetMetrics evaluate(std::span<const PredictionRecord> predictions, std::span<const int> labels,
                    const BootstrapConfig& bootstrap = {}, WilsonVariant variant = WilsonVariant::Plain);

}  // namespace fpe::stats
