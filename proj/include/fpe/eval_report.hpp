#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fpe/cohort.hpp"
#include "fpe/stats.hpp"

// Assembles the JSON evaluation report and its ROC point tables.
namespace fpe::report {

struct EvalInput {
  std::string name;
  std::string manifest_path;
  std::string predictions_path;
  cohort::Manifest manifest;
  std::vector<stats::PredictionRecord> predictions;
};

struct EvalOptions {
  bool per_patient{false};
  bool per_eye{false};
  bool stratify_grade{false};
  std::optional<std::string> quality_scheme;
  bool pool{false};
  std::optional<cohort::Split> split;
  stats::BootstrapConfig bootstrap;
  stats::WilsonVariant wilson{stats::WilsonVariant::Plain};
};

struct RocTable {
  std::string file_name;
  std::string csv;
};

struct EvalOutputs {
  std::string report_json;
  std::vector<RocTable> roc_tables;
};

// Throws ReconciliationError when inputs do not line up, Contract for bad
// option combinations (several inputs without pooling).
EvalOutputs build_eval_report(const std::vector<EvalInput>& inputs, const EvalOptions& options);

void write_eval_outputs(const EvalOutputs& outputs, const std::filesystem::path& out_dir);

std::string roc_csv(const stats::RocCurve& curve);

}  // namespace fpe::report
