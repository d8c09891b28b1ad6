#include "fpe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "fpe/error.hpp"

namespace fpe::stats {

namespace {

// Distinct scores in descending order with the class counts at each score.
struct ScoreGroups {
  std::vector<double> score;          // per group
  std::vector<std::uint32_t> group;   // per sample
  std::vector<std::uint64_t> pos;     // per group
  std::vector<std::uint64_t> neg;     // per group
  std::uint64_t n_pos{0};
  std::uint64_t n_neg{0};
};

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "scores and labels differ in length");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, "labels must be 0 or 1");
    require(!std::isnan(scores[i]), "scores must not be NaN");
  }
}

ScoreGroups group_scores(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  std::vector<std::uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });

  ScoreGroups g;
  g.group.resize(scores.size());
  for (const std::uint32_t i : order) {
    if (g.score.empty() || scores[i] != g.score.back()) {
      g.score.push_back(scores[i]);
      g.pos.push_back(0);
      g.neg.push_back(0);
    }
    g.group[i] = static_cast<std::uint32_t>(g.score.size() - 1);
    if (labels[i] == 1) {
      ++g.pos.back();
      ++g.n_pos;
    } else {
      ++g.neg.back();
      ++g.n_neg;
    }
  }
  if (g.n_pos == 0 || g.n_neg == 0) fail(ErrorKind::DegenerateLabels, "ROC analysis needs both classes");
  return g;
}

// Sum over groups of neg_g * (2 * positives ranked above + pos_g), i.e. twice
// the trapezoid area scaled by n_pos * n_neg.
template <typename Count>
double area_from_counts(std::span<const Count> pos, std::span<const Count> neg, std::uint64_t n_pos,
                        std::uint64_t n_neg) {
  std::uint64_t twice_area = 0;
  std::uint64_t above = 0;
  for (std::size_t k = 0; k < pos.size(); ++k) {
    twice_area += static_cast<std::uint64_t>(neg[k]) * (2 * above + pos[k]);
    above += pos[k];
  }
  return static_cast<double>(twice_area) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::mt19937_64 resample_engine(std::uint64_t seed, std::uint64_t resample, std::uint64_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(resample), static_cast<std::uint32_t>(resample >> 32),
                    static_cast<std::uint32_t>(attempt)};
  return std::mt19937_64(seq);
}

MetricReport not_applicable(std::string name, CiMethod method) {
  MetricReport r;
  r.name = std::move(name);
  r.method = method;
  r.applicable = false;
  return r;
}

}  // namespace

std::string to_string(CiMethod method) {
  switch (method) {
    case CiMethod::Bootstrap: return "bootstrap";
    case CiMethod::Wilson: return "wilson";
    case CiMethod::WilsonContinuityCorrected: return "wilson-cc";
    case CiMethod::Point: return "point";
  }
  return "unknown";
}

void PredictionRecord::validate() const {
  require(prob_nonref >= 0.0 && prob_nonref <= 1.0, image_id + ": prob_nonref outside [0,1]");
  require(prob_ref >= 0.0 && prob_ref <= 1.0, image_id + ": prob_ref outside [0,1]");
  require(std::abs(prob_nonref + prob_ref - 1.0) <= 1e-6, image_id + ": probabilities do not sum to 1");
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  const ScoreGroups g = group_scores(scores, labels);
  RocCurve curve;
  curve.points.reserve(g.score.size() + 1);
  curve.thresholds.reserve(g.score.size() + 1);
  curve.points.push_back({0.0, 0.0});
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  for (std::size_t k = 0; k < g.score.size(); ++k) {
    tp += g.pos[k];
    fp += g.neg[k];
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(g.n_neg),
                            static_cast<double>(tp) / static_cast<double>(g.n_pos)});
    curve.thresholds.push_back(g.score[k]);
  }
  return curve;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  const ScoreGroups g = group_scores(scores, labels);
  return area_from_counts<std::uint64_t>(g.pos, g.neg, g.n_pos, g.n_neg);
}

double trapezoid_area(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return area;
}

double percentile(std::span<const double> sorted, double pct) {
  require(!sorted.empty(), "percentile of an empty sample");
  require(pct >= 0.0 && pct <= 100.0, "percentile outside [0,100]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

MetricReport bootstrap_auc_ci(std::span<const double> scores, std::span<const int> labels,
                              const BootstrapConfig& config) {
  require(config.n_resamples >= 1, "bootstrap needs at least one resample");
  require(config.lower_percentile >= 0.0 && config.lower_percentile <= config.upper_percentile &&
              config.upper_percentile <= 100.0,
          "bootstrap percentiles must satisfy 0 <= lower <= upper <= 100");
  const ScoreGroups g = group_scores(scores, labels);
  const std::size_t n = scores.size();
  const std::size_t budget = 100 * config.n_resamples;

  std::vector<double> aucs(config.n_resamples);
  std::vector<std::size_t> redraws(config.n_resamples, 0);
  std::vector<std::uint8_t> exhausted(config.n_resamples, 0);

  auto run_worker = [&](std::size_t first, std::size_t stride) {
    std::vector<std::uint32_t> pos(g.score.size());
    std::vector<std::uint32_t> neg(g.score.size());
    for (std::size_t r = first; r < config.n_resamples; r += stride) {
      for (std::size_t attempt = 0;; ++attempt) {
        if (attempt >= budget) {
          exhausted[r] = 1;
          break;
        }
        auto engine = resample_engine(config.seed, r, attempt);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::fill(pos.begin(), pos.end(), 0u);
        std::fill(neg.begin(), neg.end(), 0u);
        std::uint64_t n_pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t s = pick(engine);
          if (labels[s] == 1) {
            ++pos[g.group[s]];
            ++n_pos;
          } else {
            ++neg[g.group[s]];
          }
        }
        if (n_pos == 0 || n_pos == n) {
          ++redraws[r];
          continue;
        }
        aucs[r] = area_from_counts<std::uint32_t>(pos, neg, n_pos, n - n_pos);
        break;
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(config.workers, 1, config.n_resamples);
  if (workers == 1) {
    run_worker(0, 1);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_worker, w, workers);
  }

  const std::size_t total_redraws = std::accumulate(redraws.begin(), redraws.end(), std::size_t{0});
  if (total_redraws > budget || std::find(exhausted.begin(), exhausted.end(), 1) != exhausted.end()) {
    fail(ErrorKind::ResamplingFailure, "bootstrap could not draw resamples containing both classes");
  }

  std::sort(aucs.begin(), aucs.end());
  MetricReport report;
  report.name = "auc";
  report.value = area_from_counts<std::uint64_t>(g.pos, g.neg, g.n_pos, g.n_neg);
  report.ci_low = percentile(aucs, config.lower_percentile);
  report.ci_high = percentile(aucs, config.upper_percentile);
  report.n_pos = g.n_pos;
  report.n_neg = g.n_neg;
  report.method = CiMethod::Bootstrap;
  return report;
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z, WilsonVariant variant) {
  require(trials >= 1, "wilson_interval: trials must be >= 1");
  require(successes <= trials, "wilson_interval: successes exceed trials");
  require(std::isfinite(z) && z >= 0.0, "wilson_interval: z must be non-negative");

  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  Interval ci;
  if (variant == WilsonVariant::Plain) {
    const double center = p + z2 / (2.0 * n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    const double denom = 1.0 + z2 / n;
    ci = {(center - half) / denom, (center + half) / denom};
  } else {
    const double denom = 2.0 * (n + z2);
    const double lo_root = std::sqrt(std::max(0.0, z2 - 2.0 - 1.0 / n + 4.0 * p * (n * (1.0 - p) + 1.0)));
    const double hi_root = std::sqrt(std::max(0.0, z2 + 2.0 - 1.0 / n + 4.0 * p * (n * (1.0 - p) - 1.0)));
    ci = {(2.0 * n * p + z2 - 1.0 - z * lo_root) / denom, (2.0 * n * p + z2 + 1.0 + z * hi_root) / denom};
  }
  ci.low = std::clamp(ci.low, 0.0, 1.0);
  ci.high = std::clamp(ci.high, 0.0, 1.0);
  if (successes == 0) ci.low = 0.0;
  if (successes == trials) ci.high = 1.0;
  return ci;
}

ConfusionCounts confusion_argmax(std::span<const PredictionRecord> predictions, std::span<const int> labels) {
  require(predictions.size() == labels.size(), "predictions and labels differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, "labels must be 0 or 1");
    const bool predicted = predictions[i].predicts_referable();
    if (labels[i] == 1) {
      predicted ? ++c.tp : ++c.fn;
    } else {
      predicted ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

SensSpec sens_spec_argmax(std::span<const PredictionRecord> predictions, std::span<const int> labels, double z,
                          WilsonVariant variant) {
  SensSpec out;
  out.counts = confusion_argmax(predictions, labels);
  const auto& c = out.counts;
  const std::size_t n_pos = c.tp + c.fn;
  const std::size_t n_neg = c.tn + c.fp;
  const CiMethod method =
      variant == WilsonVariant::Plain ? CiMethod::Wilson : CiMethod::WilsonContinuityCorrected;

  auto proportion = [&](std::string name, std::size_t hits, std::size_t trials) {
    if (trials == 0) {
      MetricReport r = not_applicable(std::move(name), method);
      r.n_pos = n_pos;
      r.n_neg = n_neg;
      return r;
    }
    const Interval ci = wilson_interval(hits, trials, z, variant);
    MetricReport r;
    r.name = std::move(name);
    r.value = static_cast<double>(hits) / static_cast<double>(trials);
    r.ci_low = ci.low;
    r.ci_high = ci.high;
    r.n_pos = n_pos;
    r.n_neg = n_neg;
    r.method = method;
    return r;
  };
  out.sensitivity = proportion("sensitivity", c.tp, n_pos);
  out.specificity = proportion("specificity", c.tn, n_neg);
  return out;
}

double prediction_entropy(const PredictionRecord& p) {
  double h = 0.0;
  for (const double q : {p.prob_nonref, p.prob_ref}) {
    if (q > 0.0) h -= q * std::log2(q);
  }
  return std::clamp(h, 0.0, 1.0);
}

SetMetrics evaluate(std::span<const PredictionRecord> predictions, std::span<const int> labels,
                    const BootstrapConfig& bootstrap, WilsonVariant variant) {
  require(predictions.size() == labels.size(), "predictions and labels differ in length");
  SetMetrics m;
  m.n = predictions.size();
  for (const int l : labels) (l == 1 ? m.n_pos : m.n_neg)++;

  std::vector<double> scores;
  scores.reserve(predictions.size());
  for (const auto& p : predictions) scores.push_back(p.prob_ref);

  if (m.n_pos > 0 && m.n_neg > 0) {
    m.auc = bootstrap_auc_ci(scores, labels, bootstrap);
    m.roc = roc_curve(scores, labels);
  } else {
    m.auc = not_applicable("auc", CiMethod::Bootstrap);
    m.auc.n_pos = m.n_pos;
    m.auc.n_neg = m.n_neg;
  }

  const SensSpec ss = sens_spec_argmax(predictions, labels, 1.96, variant);
  m.sensitivity = ss.sensitivity;
  m.specificity = ss.specificity;
  m.counts = ss.counts;

  if (!predictions.empty()) {
    double sum = 0.0;
    for (const auto& p : predictions) sum += prediction_entropy(p);
    m.entropy_mean = sum / static_cast<double>(m.n);
    if (m.n > 1) {
      double ss_dev = 0.0;
      for (const auto& p : predictions) {
        const double d = prediction_entropy(p) - m.entropy_mean;
        ss_dev += d * d;
      }
      m.entropy_sd = std::sqrt(ss_dev / static_cast<double>(m.n - 1));
    }
  }
  return m;
}

}  // namespace fpe::stats
