#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpe/stats.hpp"

// Label semantics, manifests, patient aggregation, pooling and stratification.
namespace fpe::cohort {

enum class Split { Train, Val, Test };
enum class Laterality { Left, Right };

std::string to_string(Split split);
std::string to_string(Laterality laterality);

// Grades 0,1 (no DR, mild NPDR) are non-referable; 2,3,4 are referable.
int grade_to_binary(int grade);

struct ManifestRecord {
  std::string image_id;
  std::string path;
  std::string dataset;
  Split split{Split::Test};
  std::optional<std::string> patient_id;
  std::optional<Laterality> laterality;
  std::optional<int> dr_grade;
  std::optional<int> referable;
  std::optional<std::string> quality;
  std::optional<std::string> quality_scheme;

  // Binary referable label from whichever column is present.
  std::optional<int> label() const;
};

using Manifest = std::vector<ManifestRecord>;

inline constexpr const char* kManifestHeader =
    "image_id,path,dataset,split,patient_id,laterality,dr_grade,referable,quality,quality_scheme";
inline constexpr const char* kPredictionHeader = "image_id,prob_nonref,prob_ref";

// Parsing validates every field, rejects duplicate ids and fails with a
// ReconciliationError listing every record whose referable column
// disagrees with its grade.
Manifest parse_manifest(std::istream& in);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(std::ostream& out, std::span<const ManifestRecord> manifest);

std::vector<stats::PredictionRecord> parse_predictions(std::istream& in);
std::vector<stats::PredictionRecord> read_predictions(const std::filesystem::path& path);
void write_predictions(std::ostream& out, std::span<const stats::PredictionRecord> predictions);

struct LesionFindings {
  std::size_t microaneurysm_count{0};
  std::size_t hemorrhage_count{0};
  bool exudates_present{false};
  bool neovascularization_present{false};
};

// Placeholder criterion: referable when any hemorrhage, exudate or
// neovascularization is present, or microaneurysms exceed the threshold.
struct LesionRule {
  std::size_t microaneurysm_threshold{5};
  bool hemorrhage_is_referable{true};
  bool exudates_are_referable{true};
  bool neovascularization_is_referable{true};
};

int lesion_to_binary(const LesionFindings& findings, const LesionRule& rule = {});

// One labeled image joined with its prediction.
struct EvalSample {
  ManifestRecord record;
  stats::PredictionRecord prediction;
  int label{0};
};

using EvaluationSet = std::vector<EvalSample>;

struct JoinOptions {
  // Evaluate only records from this split when set.
  std::optional<Split> split;
};

// Joins labeled manifest records with predictions. Unlabeled records are
// skipped. Labeled records without a prediction, predictions without a
// record and duplicate predictions are reported together.
EvaluationSet join(std::span<const ManifestRecord> manifest, std::span<const stats::PredictionRecord> predictions,
                   const JoinOptions& options = {});

struct PatientRecord {
  std::string patient_id;
  std::vector<std::string> image_ids;
  double prob_ref{0.0};
  int referable{0};
};

// Max probability and OR label per patient_id, sorted by patient_id.
std::vector<PatientRecord> aggregate_patients(const EvaluationSet& set);
std::vector<PatientRecord> aggregate_patients(std::span<const ManifestRecord> manifest,
                                              std::span<const stats::PredictionRecord> predictions);
// Same rule grouped per eye; ids are "<patient_id>/<left|right>".
std::vector<PatientRecord> aggregate_eyes(const EvaluationSet& set);

// Flat prediction/label arrays consumed by the statistics layer.
struct EvalView {
  std::vector<stats::PredictionRecord> predictions;
  std::vector<int> labels;
};

EvalView view_of(const EvaluationSet& set);
EvalView view_of(std::span<const PatientRecord> patients);

// Non-referable records (grades 0,1) plus referable records of exactly
// `referable_grade`. Records without a grade are left out.
EvaluationSet stratify_by_grade(const EvaluationSet& set, int referable_grade);

struct QualityStrata {
  std::string scheme;
  std::map<std::string, EvaluationSet> strata;
  std::size_t unlabeled{0};
};

QualityStrata stratify_by_quality(const EvaluationSet& set, const std::string& scheme);

struct PoolInput {
  std::string name;
  Manifest manifest;
  std::vector<stats::PredictionRecord> predictions;
};

struct PooledSet {
  Manifest manifest;
  std::vector<stats::PredictionRecord> predictions;
};

// Concatenates sets with ids and patient ids qualified as "<name>:<id>" and
// the dataset column set to the pool name.
PooledSet pool_datasets(std::span<const PoolInput> sets);

std::string qualify(const std::string& name, const std::string& id);

}  // namespace fpe::cohort
