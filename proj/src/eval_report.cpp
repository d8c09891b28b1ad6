#include "fpe/eval_report.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fpe/error.hpp"
#include "fpe/imaging.hpp"

namespace fpe::report {

using nlohmann::ordered_json;

namespace {

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

ordered_json metric_json(const stats::MetricReport& m) {
  return {{"name", m.name},
          {"value", m.value},
          {"ci_low", m.ci_low},
          {"ci_high", m.ci_high},
          {"n_pos", m.n_pos},
          {"n_neg", m.n_neg},
          {"method", stats::to_string(m.method)},
          {"applicable", m.applicable}};
}

class Builder {
 public:
  explicit Builder(const EvalOptions& options) : options_(options) {}

  ordered_json section(const std::string& key, const cohort::EvalView& view) {
    const stats::SetMetrics m = stats::evaluate(view.predictions, view.labels, options_.bootstrap, options_.wilson);
    ordered_json j;
    j["n"] = m.n;
    j["n_pos"] = m.n_pos;
    j["n_neg"] = m.n_neg;
    j["auc"] = metric_json(m.auc);
    j["sensitivity"] = metric_json(m.sensitivity);
    j["specificity"] = metric_json(m.specificity);
    j["confusion"] = {{"tp", m.counts.tp}, {"fn", m.counts.fn}, {"tn", m.counts.tn}, {"fp", m.counts.fp}};
    j["entropy"] = {{"mean", m.entropy_mean}, {"sd", m.entropy_sd}};
    if (!m.roc.points.empty()) {
      const std::string file = "roc_" + key + ".csv";
      tables_.push_back({file, roc_csv(m.roc)});
      j["roc_csv"] = file;
    }
    return j;
  }

  std::vector<RocTable> take_tables() { return std::move(tables_); }

 private:
  const EvalOptions& options_;
  std::vector<RocTable> tables_;
};

std::string slug(const std::string& s) {
  std::string out;
  for (const char c : s) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    out.push_back(keep ? c : '_');
  }
  return out;
}

}  // namespace

std::string roc_csv(const stats::RocCurve& curve) {
  std::string out = "threshold,fpr,tpr\n";
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    out += number(curve.thresholds[i]) + "," + number(curve.points[i].fpr) + "," + number(curve.points[i].tpr) + "\n";
  }
  return out;
}

EvalOutputs build_eval_report(const std::vector<EvalInput>& inputs, const EvalOptions& options) {
  require(!inputs.empty(), "evaluate needs at least one manifest/prediction pair");
  require(inputs.size() == 1 || options.pool, "several inputs require pooling");

  cohort::Manifest manifest;
  std::vector<stats::PredictionRecord> predictions;
  if (options.pool) {
    std::vector<cohort::PoolInput> pool;
    for (const auto& in : inputs) pool.push_back({in.name, in.manifest, in.predictions});
    auto pooled = cohort::pool_datasets(pool);
    manifest = std::move(pooled.manifest);
    predictions = std::move(pooled.predictions);
  } else {
    manifest = inputs.front().manifest;
    predictions = inputs.front().predictions;
  }

  const cohort::EvaluationSet set = cohort::join(manifest, predictions, {options.split});
  Builder builder(options);

  ordered_json j;
  j["tool"] = {{"name", "fpe"}, {"version", FPE_VERSION}};
  ordered_json echo;
  ordered_json echo_inputs = ordered_json::array();
  for (const auto& in : inputs) {
    echo_inputs.push_back({{"name", in.name}, {"manifest", in.manifest_path}, {"predictions", in.predictions_path}});
  }
  echo["inputs"] = std::move(echo_inputs);
  echo["pool"] = options.pool;
  echo["split"] = options.split ? cohort::to_string(*options.split) : "all";
  echo["per_patient"] = options.per_patient;
  echo["per_eye"] = options.per_eye;
  echo["stratify_grade"] = options.stratify_grade;
  echo["stratify_quality"] = options.quality_scheme ? ordered_json(*options.quality_scheme) : ordered_json(nullptr);
  echo["bootstrap"] = {{"n_resamples", options.bootstrap.n_resamples},
                       {"seed", options.bootstrap.seed},
                       {"percentiles", {options.bootstrap.lower_percentile, options.bootstrap.upper_percentile}}};
  echo["wilson"] = options.wilson == stats::WilsonVariant::Plain ? "plain" : "continuity-corrected";
  j["config"] = std::move(echo);

  j["image_level"] = builder.section("image", cohort::view_of(set));

  if (options.per_patient) {
    const auto patients = cohort::aggregate_patients(set);
    j["patient_level"] = builder.section("patient", cohort::view_of(patients));
  }
  if (options.per_eye) {
    const auto eyes = cohort::aggregate_eyes(set);
    j["eye_level"] = builder.section("eye", cohort::view_of(eyes));
  }

  if (options.pool) {
    std::map<std::string, cohort::EvaluationSet> by_dataset;
    for (const auto& s : set) by_dataset[s.record.dataset].push_back(s);
    ordered_json datasets = ordered_json::array();
    for (const auto& [name, subset] : by_dataset) {
      ordered_json d = builder.section("dataset_" + slug(name), cohort::view_of(subset));
      d["dataset"] = name;
      datasets.push_back(std::move(d));
    }
    j["datasets"] = std::move(datasets);
  }

  if (options.stratify_grade) {
    ordered_json strata = ordered_json::array();
    for (int grade = 2; grade <= 4; ++grade) {
      ordered_json s;
      try {
        s = builder.section("grade" + std::to_string(grade), cohort::view_of(cohort::stratify_by_grade(set, grade)));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateLabels) throw;
        s["error"] = e.what();
      }
      s["referable_grade"] = grade;
      strata.push_back(std::move(s));
    }
    j["grade_strata"] = std::move(strata);
  }

  if (options.quality_scheme) {
    const auto q = cohort::stratify_by_quality(set, *options.quality_scheme);
    ordered_json strata = ordered_json::array();
    for (const auto& [label, subset] : q.strata) {
      ordered_json s = builder.section("quality_" + slug(label), cohort::view_of(subset));
      s["quality"] = label;
      strata.push_back(std::move(s));
    }
    j["quality_strata"] = {{"scheme", q.scheme}, {"unlabeled", q.unlabeled}, {"strata", std::move(strata)}};
  }

  return {j.dump(2) + "\n", builder.take_tables()};
}

void write_eval_outputs(const EvalOutputs& outputs, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + out_dir.string());
  auto bytes = [](const std::string& s) {
    return std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
  };
  imaging::write_file_atomic(out_dir / "report.json", bytes(outputs.report_json));
  for (const auto& t : outputs.roc_tables) imaging::write_file_atomic(out_dir / t.file_name, bytes(t.csv));
}

}  // namespace fpe::report
