#include <cmath>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "fpe/error.hpp"
#include "fpe/stats.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace fpe::stats {
namespace {

// Scores rounded to a coarse grid so ties are common.
fpe::testing::ScoredSample tied_sample(std::size_t n, std::mt19937_64& rng) {
  fpe::testing::ScoredSample s;
  std::uniform_int_distribution<int> level(0, 9);
  while (true) {
    s.scores.clear();
    s.labels.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const int label = static_cast<int>(rng() % 2);
      s.labels.push_back(label);
      s.scores.push_back(static_cast<double>(level(rng) + 2 * label) / 11.0);
    }
    const auto pos = std::count(s.labels.begin(), s.labels.end(), 1);
    if (pos > 0 && pos < static_cast<long>(n)) return s;
  }
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

TEST(PredictionRecord, Validation) {
  EXPECT_NO_THROW((PredictionRecord{"a", 0.3, 0.7}.validate()));
  EXPECT_NO_THROW((PredictionRecord{"a", 0.3, 0.7 + 5e-7}.validate()));
  EXPECT_THROW((PredictionRecord{"a", 0.3, 0.6}.validate()), Error);
  EXPECT_THROW((PredictionRecord{"a", -0.1, 1.1}.validate()), Error);
  EXPECT_TRUE((PredictionRecord{"a", 0.5, 0.5}.predicts_referable()));
  EXPECT_FALSE((PredictionRecord{"a", 0.51, 0.49}.predicts_referable()));
}

TEST(Roc, PerfectSeparation) {
  const std::vector<double> s{0.9, 0.8, 0.2, 0.1};
  const std::vector<int> l{1, 1, 0, 0};
  const RocCurve c = roc_curve(s, l);
  bool through_corner = false;
  for (const auto& p : c.points) through_corner |= (p.fpr == 0.0 && p.tpr == 1.0);
  EXPECT_TRUE(through_corner);
  EXPECT_EQ(auc(s, l), 1.0);
  EXPECT_TRUE(std::isinf(c.thresholds.front()));
  EXPECT_EQ(c.points.front().fpr, 0.0);
  EXPECT_EQ(c.points.back().tpr, 1.0);
  EXPECT_EQ(c.points.back().fpr, 1.0);
}

TEST(Roc, FullTieIsDiagonal) {
  const std::vector<double> s(6, 0.4);
  const std::vector<int> l{1, 0, 1, 0, 0, 1};
  const RocCurve c = roc_curve(s, l);
  ASSERT_EQ(c.points.size(), 2u);
  EXPECT_EQ(c.points[1].fpr, 1.0);
  EXPECT_EQ(c.points[1].tpr, 1.0);
  EXPECT_EQ(auc(s, l), 0.5);
}

TEST(Roc, SingleClassIsDegenerate) {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<int> l{1, 1};
  try {
    (void)roc_curve(s, l);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateLabels);
  }
  EXPECT_THROW((void)auc(s, std::vector<int>{0, 0}), Error);
  EXPECT_THROW((void)auc(s, std::vector<int>{0}), Error);
}

TEST(Roc, MonotoneEndpointsOnRandomInput) {
  std::mt19937_64 rng(71);
  for (int t = 0; t < 50; ++t) {
    const auto s = tied_sample(5 + rng() % 100, rng);
    const RocCurve c = roc_curve(s.scores, s.labels);
    EXPECT_EQ(c.points.front().fpr, 0.0);
    EXPECT_EQ(c.points.front().tpr, 0.0);
    EXPECT_EQ(c.points.back().fpr, 1.0);
    EXPECT_EQ(c.points.back().tpr, 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_GE(c.points[i].fpr, c.points[i - 1].fpr);
      EXPECT_GE(c.points[i].tpr, c.points[i - 1].tpr);
      EXPECT_LT(c.thresholds[i], c.thresholds[i - 1]);
    }
    EXPECT_NEAR(trapezoid_area(c), auc(s.scores, s.labels), 1e-12);
  }
}

TEST(Auc, Examples) {
  const std::vector<double> s{0.9, 0.8, 0.2, 0.1};
  EXPECT_EQ(auc(s, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_EQ(auc(s, std::vector<int>{0, 0, 1, 1}), 0.0);
}

TEST(Auc, MatchesPairwiseOracle) {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 200; ++t) {
    const auto s = (t % 2) ? tied_sample(1 + rng() % 300, rng)
                           : fpe::testing::binormal_sample(200, 0.4, 1.0, rng);
    if (std::count(s.labels.begin(), s.labels.end(), 1) == 0 ||
        std::count(s.labels.begin(), s.labels.end(), 0) == 0)
      continue;
    EXPECT_NEAR(auc(s.scores, s.labels), fpe::oracle::pairwise_auc(s.scores, s.labels), 1e-12);
  }
}

TEST(Auc, LabelFlipAntisymmetry) {
  std::mt19937_64 rng(72);
  for (int t = 0; t < 100; ++t) {
    const auto s = tied_sample(2 + rng() % 200, rng);
    std::vector<int> flipped;
    for (int l : s.labels) flipped.push_back(1 - l);
    EXPECT_NEAR(auc(s.scores, s.labels) + auc(s.scores, flipped), 1.0, 1e-12);
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(73);
  for (int t = 0; t < 100; ++t) {
    const auto s = tied_sample(2 + rng() % 200, rng);
    std::vector<double> a, b;
    for (double x : s.scores) {
      a.push_back(std::exp(3 * x));
      b.push_back(-1.0 / (1.0 + x));
    }
    const double base = auc(s.scores, s.labels);
    EXPECT_EQ(auc(a, s.labels), base);
    EXPECT_EQ(auc(b, s.labels), base);
  }
}

TEST(Percentile, LinearInterpolation) {
  const std::vector<double> v{1, 2, 3, 4, 5};
  EXPECT_EQ(percentile(v, 0), 1);
  EXPECT_EQ(percentile(v, 100), 5);
  EXPECT_EQ(percentile(v, 50), 3);
  EXPECT_DOUBLE_EQ(percentile(v, 2.5), 1.1);
  EXPECT_DOUBLE_EQ(percentile(v, 97.5), 4.9);
}

TEST(Bootstrap, FixedSeedIsBitIdenticalAcrossRunsAndWorkers) {
  std::mt19937_64 rng(74);
  const auto s = fpe::testing::binormal_sample(500, 0.3, 1.0, rng);
  BootstrapConfig cfg;
  cfg.seed = 42;
  const MetricReport a = bootstrap_auc_ci(s.scores, s.labels, cfg);
  const MetricReport b = bootstrap_auc_ci(s.scores, s.labels, cfg);
  cfg.workers = 7;
  const MetricReport c = bootstrap_auc_ci(s.scores, s.labels, cfg);
  EXPECT_TRUE(same_bits(a.ci_low, b.ci_low) && same_bits(a.ci_high, b.ci_high));
  EXPECT_TRUE(same_bits(a.ci_low, c.ci_low) && same_bits(a.ci_high, c.ci_high));
  EXPECT_EQ(a.method, CiMethod::Bootstrap);
  EXPECT_GE(a.ci_low, 0.0);
  EXPECT_LE(a.ci_low, a.ci_high);
  EXPECT_LE(a.ci_high, 1.0);

  cfg.seed = 43;
  const MetricReport d = bootstrap_auc_ci(s.scores, s.labels, cfg);
  EXPECT_FALSE(same_bits(a.ci_low, d.ci_low) && same_bits(a.ci_high, d.ci_high));
}

TEST(Bootstrap, PerfectSeparationGivesDegenerateInterval) {
  std::vector<double> s;
  std::vector<int> l;
  for (int i = 0; i < 40; ++i) {
    s.push_back(i / 40.0);
    l.push_back(i >= 25 ? 1 : 0);
  }
  const MetricReport r = bootstrap_auc_ci(s, l);
  EXPECT_EQ(r.value, 1.0);
  EXPECT_EQ(r.ci_low, 1.0);
  EXPECT_EQ(r.ci_high, 1.0);
  EXPECT_EQ(r.n_pos, 15u);
  EXPECT_EQ(r.n_neg, 25u);
}

TEST(Bootstrap, BinormalCohortsGiveNarrowIntervals) {
  // generating AUC Phi(1.19 / sqrt 2) ~ 0.80
  std::mt19937_64 rng(75);
  for (int t = 0; t < 10; ++t) {
    const auto s = fpe::testing::binormal_sample(2000, 0.5, 1.19, rng);
    BootstrapConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(t);
    const MetricReport r = bootstrap_auc_ci(s.scores, s.labels, cfg);
    EXPECT_LE(r.ci_low, r.value);
    EXPECT_GE(r.ci_high, r.value);
    EXPECT_LT(r.ci_high - r.ci_low, 0.06);
    EXPECT_NEAR(r.value, 0.80, 0.04);
  }
}

TEST(Bootstrap, SingleClassResamplesAreRedrawn) {
  // With one positive in two samples half the draws lack a class and are
  // redrawn; the interval is still produced deterministically.
  const std::vector<double> s{0.2, 0.8};
  const std::vector<int> l{0, 1};
  BootstrapConfig cfg;
  cfg.n_resamples = 500;
  const MetricReport a = bootstrap_auc_ci(s, l, cfg);
  const MetricReport b = bootstrap_auc_ci(s, l, cfg);
  EXPECT_EQ(a.ci_low, 1.0);
  EXPECT_EQ(a.ci_high, 1.0);
  EXPECT_TRUE(same_bits(a.ci_low, b.ci_low));
}

TEST(Wilson, BoundaryCases) {
  EXPECT_EQ(wilson_interval(0, 10).low, 0.0);
  EXPECT_EQ(wilson_interval(10, 10).high, 1.0);
  EXPECT_EQ(wilson_interval(0, 10, 1.96, WilsonVariant::ContinuityCorrected).low, 0.0);
  EXPECT_EQ(wilson_interval(10, 10, 1.96, WilsonVariant::ContinuityCorrected).high, 1.0);
  try {
    (void)wilson_interval(0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Contract);
  }
  EXPECT_THROW((void)wilson_interval(5, 4), Error);
}

TEST(Wilson, MatchesClosedForm) {
  const Interval got = wilson_interval(8, 10, 1.96);
  const Interval ref = fpe::oracle::wilson_closed_form(8, 10, 1.96);
  EXPECT_NEAR(got.low, ref.low, 1e-12);
  EXPECT_NEAR(got.high, ref.high, 1e-12);
  for (std::size_t n = 1; n <= 60; ++n)
    for (std::size_t k = 0; k <= n; ++k) {
      const Interval a = wilson_interval(k, n);
      const Interval b = fpe::oracle::wilson_closed_form(k, n, 1.96);
      EXPECT_NEAR(a.low, std::max(0.0, b.low), 1e-12);
      EXPECT_NEAR(a.high, std::min(1.0, b.high), 1e-12);
    }
}

TEST(Wilson, NineOfNineVariants) {
  // Both variants at n = 9, k = 9: plain ~0.701, continuity corrected ~0.629.
  EXPECT_NEAR(wilson_interval(9, 9).low, 0.7008, 5e-4);
  EXPECT_NEAR(wilson_interval(9, 9, 1.96, WilsonVariant::ContinuityCorrected).low, 0.6288, 5e-4);
}

TEST(Wilson, Properties) {
  for (const auto variant : {WilsonVariant::Plain, WilsonVariant::ContinuityCorrected}) {
    for (std::size_t n = 1; n <= 50; ++n) {
      for (std::size_t k = 0; k <= n; ++k) {
        const Interval ci = wilson_interval(k, n, 1.96, variant);
        const double p = static_cast<double>(k) / static_cast<double>(n);
        EXPECT_LE(ci.low, p);
        EXPECT_GE(ci.high, p);
        EXPECT_GE(ci.low, 0.0);
        EXPECT_LE(ci.high, 1.0);
        const Interval mirror = wilson_interval(n - k, n, 1.96, variant);
        EXPECT_NEAR(ci.low, 1.0 - mirror.high, 1e-12);
        if (k > 0) {
          const Interval prev = wilson_interval(k - 1, n, 1.96, variant);
          EXPECT_GE(ci.low, prev.low);
          EXPECT_GE(ci.high, prev.high);
        }
      }
    }
  }
}

TEST(SensSpec, AllCorrect) {
  const std::vector<PredictionRecord> p{{"a", 0.1, 0.9}, {"b", 0.8, 0.2}, {"c", 0.3, 0.7}};
  const std::vector<int> l{1, 0, 1};
  const SensSpec r = sens_spec_argmax(p, l);
  EXPECT_EQ(r.sensitivity.value, 1.0);
  EXPECT_EQ(r.specificity.value, 1.0);
  EXPECT_EQ(r.sensitivity.method, CiMethod::Wilson);
  EXPECT_EQ(r.sensitivity.ci_high, 1.0);
  EXPECT_EQ(r.sensitivity.n_pos, 2u);
  EXPECT_EQ(r.specificity.n_neg, 1u);
}

TEST(SensSpec, TieCountsAsReferable) {
  const std::vector<PredictionRecord> p{{"a", 0.5, 0.5}, {"b", 0.5, 0.5}};
  const std::vector<int> l{1, 0};
  const SensSpec r = sens_spec_argmax(p, l);
  EXPECT_EQ(r.counts.tp, 1u);
  EXPECT_EQ(r.counts.fp, 1u);
  EXPECT_EQ(r.sensitivity.value, 1.0);
  EXPECT_EQ(r.specificity.value, 0.0);
}

TEST(SensSpec, SingleClassMarksMetricNotApplicable) {
  const std::vector<PredictionRecord> p{{"a", 0.1, 0.9}, {"b", 0.8, 0.2}};
  const SensSpec r = sens_spec_argmax(p, std::vector<int>{1, 1});
  EXPECT_TRUE(r.sensitivity.applicable);
  EXPECT_FALSE(r.specificity.applicable);
  EXPECT_EQ(r.specificity.n_neg, 0u);
}

TEST(SensSpec, MatchesConfusionOracle) {
  std::mt19937_64 rng(76);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<PredictionRecord> p;
    std::vector<int> l;
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
    for (int i = 0; i < 100; ++i) {
      const double q = std::round(u(rng) * 20) / 20;  // includes exact 0.5
      const int label = static_cast<int>(rng() % 2);
      p.push_back({"i" + std::to_string(i), 1 - q, q});
      l.push_back(label);
      const bool pred = !(1 - q > q);
      if (label) pred ? ++tp : ++fn;
      else pred ? ++fp : ++tn;
    }
    const SensSpec r = sens_spec_argmax(p, l);
    if (tp + fn == 0 || tn + fp == 0) continue;
    EXPECT_EQ(r.counts.tp, tp);
    EXPECT_EQ(r.counts.tn, tn);
    EXPECT_DOUBLE_EQ(r.sensitivity.value, static_cast<double>(tp) / static_cast<double>(tp + fn));
    EXPECT_DOUBLE_EQ(r.specificity.value, static_cast<double>(tn) / static_cast<double>(tn + fp));
    const Interval ci = fpe::oracle::wilson_closed_form(tp, tp + fn, 1.96);
    EXPECT_NEAR(r.sensitivity.ci_low, std::max(0.0, ci.low), 1e-12);
  }
}

TEST(Entropy, ClosedForm) {
  EXPECT_DOUBLE_EQ(prediction_entropy({"", 0.5, 0.5}), 1.0);
  EXPECT_EQ(prediction_entropy({"", 1.0, 0.0}), 0.0);
  EXPECT_EQ(prediction_entropy({"", 0.0, 1.0}), 0.0);
  EXPECT_NEAR(prediction_entropy({"", 0.9, 0.1}), fpe::oracle::binary_entropy(0.1), 1e-12);
}

TEST(Entropy, SymmetricConcaveMaximalAtUniform) {
  for (int i = 0; i <= 100; ++i) {
    const double p = i / 100.0;
    const double h = prediction_entropy({"", 1 - p, p});
    EXPECT_NEAR(h, prediction_entropy({"", p, 1 - p}), 1e-15);
    EXPECT_LE(h, 1.0);
    EXPECT_GE(h, 0.0);
    if (i > 0 && i < 100) {
      const double lo = prediction_entropy({"", 1 - (p - 0.01), p - 0.01});
      const double hi = prediction_entropy({"", 1 - (p + 0.01), p + 0.01});
      EXPECT_GE(h, 0.5 * (lo + hi) - 1e-12);
    }
  }
}

TEST(Evaluate, SummarizesSet) {
  std::mt19937_64 rng(77);
  const auto s = fpe::testing::binormal_sample(300, 0.4, 1.0, rng);
  std::vector<double> probs;
  for (double x : s.scores) probs.push_back(1.0 / (1.0 + std::exp(-x)));
  const auto preds = fpe::testing::predictions_from_scores(probs);
  BootstrapConfig cfg;
  cfg.n_resamples = 200;
  const SetMetrics m = evaluate(preds, s.labels, cfg);
  EXPECT_EQ(m.n, 300u);
  EXPECT_EQ(m.n_pos + m.n_neg, 300u);
  EXPECT_NEAR(m.auc.value, fpe::oracle::pairwise_auc(probs, s.labels), 1e-12);
  double h = 0;
  for (double q : probs) h += fpe::oracle::binary_entropy(q);
  EXPECT_NEAR(m.entropy_mean, h / 300.0, 1e-12);

  const std::vector<int> all_pos(preds.size(), 1);
  const SetMetrics single = evaluate(preds, all_pos, cfg);
  EXPECT_FALSE(single.auc.applicable);
  EXPECT_FALSE(single.specificity.applicable);
}

}  // namespace
}  // namespace fpe::stats
