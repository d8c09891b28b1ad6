#include "fpe/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "csv.hpp"
#include "fpe/error.hpp"

namespace fpe::cohort {

using stats::PredictionRecord;

namespace {

std::string list_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < 10; ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  if (ids.size() > 10) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

[[noreturn]] void bad_field(std::size_t line, const std::string& column, const std::string& value) {
  fail(ErrorKind::Format, "line " + std::to_string(line) + ": invalid " + column + " '" + value + "'");
}

int parse_int(std::size_t line, const std::string& column, const std::string& value) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_field(line, column, value);
  return out;
}

double parse_double(std::size_t line, const std::string& column, const std::string& value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_field(line, column, value);
  return out;
}

std::optional<std::string> optional_text(const std::string& v) {
  if (v.empty()) return std::nullopt;
  return v;
}

// Maps column name -> index; unknown columns are ignored.
class Columns {
 public:
  Columns(const std::vector<std::string>& header, std::initializer_list<const char*> required) {
    for (std::size_t i = 0; i < header.size(); ++i) index_[header[i]] = i;
    for (const char* name : required) {
      if (!index_.contains(name)) fail(ErrorKind::Format, std::string("missing required column '") + name + "'");
    }
  }

  const std::string& get(const std::vector<std::string>& row, const char* name) const {
    static const std::string empty;
    const auto it = index_.find(name);
    if (it == index_.end() || it->second >= row.size()) return empty;
    return row[it->second];
  }

 private:
  std::map<std::string, std::size_t, std::less<>> index_;
};

bool blank(const std::vector<std::string>& row) { return row.size() == 1 && row[0].empty(); }

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return in;
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "test";
}

std::string to_string(Laterality laterality) { return laterality == Laterality::Left ? "left" : "right"; }

int grade_to_binary(int grade) {
  require(grade >= 0 && grade <= 4, "dr_grade must be in 0..4, got " + std::to_string(grade));
  return grade >= 2 ? 1 : 0;
}

std::optional<int> ManifestRecord::label() const {
  if (referable) return referable;
  if (dr_grade) return grade_to_binary(*dr_grade);
  return std::nullopt;
}

Manifest parse_manifest(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row)) fail(ErrorKind::Format, "manifest is empty");
  const Columns cols(row, {"image_id", "path", "dataset", "split"});

  Manifest manifest;
  std::unordered_set<std::string> seen;
  std::vector<std::string> duplicates;
  std::vector<std::string> disagreements;
  while (reader.next(row)) {
    if (blank(row)) continue;
    const std::size_t line = reader.line();
    ManifestRecord r;
    r.image_id = cols.get(row, "image_id");
    if (r.image_id.empty()) fail(ErrorKind::Format, "line " + std::to_string(line) + ": empty image_id");
    r.path = cols.get(row, "path");
    r.dataset = cols.get(row, "dataset");

    const std::string& split = cols.get(row, "split");
    if (split == "train") r.split = Split::Train;
    else if (split == "val") r.split = Split::Val;
    else if (split == "test") r.split = Split::Test;
    else bad_field(line, "split", split);

    r.patient_id = optional_text(cols.get(row, "patient_id"));
    const std::string& lat = cols.get(row, "laterality");
    if (lat == "left") r.laterality = Laterality::Left;
    else if (lat == "right") r.laterality = Laterality::Right;
    else if (!lat.empty()) bad_field(line, "laterality", lat);

    if (const std::string& g = cols.get(row, "dr_grade"); !g.empty()) {
      r.dr_grade = parse_int(line, "dr_grade", g);
      if (*r.dr_grade < 0 || *r.dr_grade > 4) bad_field(line, "dr_grade", g);
    }
    if (const std::string& ref = cols.get(row, "referable"); !ref.empty()) {
      r.referable = parse_int(line, "referable", ref);
      if (*r.referable != 0 && *r.referable != 1) bad_field(line, "referable", ref);
    }
    r.quality = optional_text(cols.get(row, "quality"));
    r.quality_scheme = optional_text(cols.get(row, "quality_scheme"));

    if (r.dr_grade && r.referable && grade_to_binary(*r.dr_grade) != *r.referable) {
      disagreements.push_back(r.image_id);
    }
    if (!seen.insert(r.image_id).second) duplicates.push_back(r.image_id);
    manifest.push_back(std::move(r));
  }
  if (!duplicates.empty()) {
    throw ReconciliationError("duplicate image_id in manifest: " + list_ids(duplicates), duplicates);
  }
  if (!disagreements.empty()) {
    throw ReconciliationError("referable column disagrees with dr_grade for: " + list_ids(disagreements),
                              disagreements);
  }
  return manifest;
}

Manifest read_manifest(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_manifest(in);
}

void write_manifest(std::ostream& out, std::span<const ManifestRecord> manifest) {
  out << kManifestHeader << '\n';
  for (const auto& r : manifest) {
    csv::write_row(out, {r.image_id, r.path, r.dataset, to_string(r.split), r.patient_id.value_or(""),
                         r.laterality ? to_string(*r.laterality) : "",
                         r.dr_grade ? std::to_string(*r.dr_grade) : "",
                         r.referable ? std::to_string(*r.referable) : "", r.quality.value_or(""),
                         r.quality_scheme.value_or("")});
  }
}

std::vector<PredictionRecord> parse_predictions(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row)) fail(ErrorKind::Format, "prediction file is empty");
  const Columns cols(row, {"image_id", "prob_nonref", "prob_ref"});

  std::vector<PredictionRecord> out;
  while (reader.next(row)) {
    if (blank(row)) continue;
    const std::size_t line = reader.line();
    PredictionRecord p;
    p.image_id = cols.get(row, "image_id");
    if (p.image_id.empty()) fail(ErrorKind::Format, "line " + std::to_string(line) + ": empty image_id");
    p.prob_nonref = parse_double(line, "prob_nonref", cols.get(row, "prob_nonref"));
    p.prob_ref = parse_double(line, "prob_ref", cols.get(row, "prob_ref"));
    try {
      p.validate();
    } catch (const Error& e) {
      fail(ErrorKind::Format, "line " + std::to_string(line) + ": " + e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_predictions(in);
}

void write_predictions(std::ostream& out, std::span<const PredictionRecord> predictions) {
  out << kPredictionHeader << '\n';
  for (const auto& p : predictions) {
    csv::write_row(out, {p.image_id, format_double(p.prob_nonref), format_double(p.prob_ref)});
  }
}

int lesion_to_binary(const LesionFindings& f, const LesionRule& rule) {
  if (rule.hemorrhage_is_referable && f.hemorrhage_count > 0) return 1;
  if (rule.exudates_are_referable && f.exudates_present) return 1;
  if (rule.neovascularization_is_referable && f.neovascularization_present) return 1;
  return f.microaneurysm_count > rule.microaneurysm_threshold ? 1 : 0;
}

EvaluationSet join(std::span<const ManifestRecord> manifest, std::span<const PredictionRecord> predictions,
                   const JoinOptions& options) {
  std::unordered_map<std::string, const PredictionRecord*> by_id;
  std::vector<std::string> duplicate_predictions;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.image_id, &p).second) duplicate_predictions.push_back(p.image_id);
  }

  std::unordered_set<std::string> known;
  std::vector<std::string> missing;
  EvaluationSet set;
  for (const auto& r : manifest) {
    known.insert(r.image_id);
    if (options.split && r.split != *options.split) continue;
    const auto label = r.label();
    if (!label) continue;
    const auto it = by_id.find(r.image_id);
    if (it == by_id.end()) {
      missing.push_back(r.image_id);
      continue;
    }
    set.push_back({r, *it->second, *label});
  }

  std::vector<std::string> orphans;
  for (const auto& p : predictions) {
    if (!known.contains(p.image_id)) orphans.push_back(p.image_id);
  }

  if (!missing.empty() || !orphans.empty() || !duplicate_predictions.empty()) {
    std::string what = "manifest/prediction reconciliation failed:";
    std::vector<std::string> ids;
    if (!missing.empty()) what += " missing predictions for [" + list_ids(missing) + "]";
    if (!orphans.empty()) what += " predictions without manifest record [" + list_ids(orphans) + "]";
    if (!duplicate_predictions.empty()) what += " duplicate predictions [" + list_ids(duplicate_predictions) + "]";
    ids.insert(ids.end(), missing.begin(), missing.end());
    ids.insert(ids.end(), orphans.begin(), orphans.end());
    ids.insert(ids.end(), duplicate_predictions.begin(), duplicate_predictions.end());
    throw ReconciliationError(what, std::move(ids));
  }
  return set;
}

namespace {

template <typename KeyFn>
std::vector<PatientRecord> aggregate_by(const EvaluationSet& set, KeyFn key_of) {
  std::map<std::string, PatientRecord> groups;
  std::vector<std::string> unkeyed;
  for (const auto& s : set) {
    const std::optional<std::string> key = key_of(s.record);
    if (!key) {
      unkeyed.push_back(s.record.image_id);
      continue;
    }
    auto [it, inserted] = groups.try_emplace(*key);
    PatientRecord& p = it->second;
    if (inserted) {
      p.patient_id = *key;
      p.prob_ref = s.prediction.prob_ref;
    } else {
      p.prob_ref = std::max(p.prob_ref, s.prediction.prob_ref);
    }
    p.image_ids.push_back(s.record.image_id);
    p.referable = p.referable | s.label;
  }
  if (!unkeyed.empty()) {
    throw ReconciliationError("records lack grouping keys: " + list_ids(unkeyed), unkeyed);
  }
  std::vector<PatientRecord> out;
  out.reserve(groups.size());
  for (auto& [_, p] : groups) out.push_back(std::move(p));
  return out;
}

}  // namespace

std::vector<PatientRecord> aggregate_patients(const EvaluationSet& set) {
  return aggregate_by(set, [](const ManifestRecord& r) { return r.patient_id; });
}

std::vector<PatientRecord> aggregate_patients(std::span<const ManifestRecord> manifest,
                                              std::span<const PredictionRecord> predictions) {
  return aggregate_patients(join(manifest, predictions));
}

std::vector<PatientRecord> aggregate_eyes(const EvaluationSet& set) {
  return aggregate_by(set, [](const ManifestRecord& r) -> std::optional<std::string> {
    if (!r.patient_id || !r.laterality) return std::nullopt;
    return *r.patient_id + "/" + to_string(*r.laterality);
  });
}

EvalView view_of(const EvaluationSet& set) {
  EvalView v;
  v.predictions.reserve(set.size());
  v.labels.reserve(set.size());
  for (const auto& s : set) {
    v.predictions.push_back(s.prediction);
    v.labels.push_back(s.label);
  }
  return v;
}

EvalView view_of(std::span<const PatientRecord> patients) {
  EvalView v;
  v.predictions.reserve(patients.size());
  v.labels.reserve(patients.size());
  for (const auto& p : patients) {
    v.predictions.push_back({p.patient_id, 1.0 - p.prob_ref, p.prob_ref});
    v.labels.push_back(p.referable);
  }
  return v;
}

EvaluationSet stratify_by_grade(const EvaluationSet& set, int referable_grade) {
  require(referable_grade >= 2 && referable_grade <= 4, "referable_grade must be 2, 3 or 4");
  EvaluationSet out;
  std::size_t positives = 0;
  for (const auto& s : set) {
    if (!s.record.dr_grade) continue;
    const int g = *s.record.dr_grade;
    if (g <= 1) {
      out.push_back(s);
    } else if (g == referable_grade) {
      out.push_back(s);
      ++positives;
    }
  }
  if (positives == 0) {
    fail(ErrorKind::DegenerateLabels, "no records with dr_grade " + std::to_string(referable_grade));
  }
  if (positives == out.size()) fail(ErrorKind::DegenerateLabels, "no non-referable records with a grade");
  return out;
}

QualityStrata stratify_by_quality(const EvaluationSet& set, const std::string& scheme) {
  QualityStrata out;
  out.scheme = scheme;
  bool scheme_known = false;
  for (const auto& s : set) {
    if (s.record.quality_scheme == scheme && s.record.quality) {
      scheme_known = true;
      out.strata[*s.record.quality].push_back(s);
    } else {
      ++out.unlabeled;
    }
  }
  require(scheme_known, "unknown quality scheme '" + scheme + "'");
  return out;
}

std::string qualify(const std::string& name, const std::string& id) { return name + ":" + id; }

PooledSet pool_datasets(std::span<const PoolInput> sets) {
  PooledSet pooled;
  std::unordered_set<std::string> ids;
  std::unordered_set<std::string> prediction_ids;
  for (const auto& input : sets) {
    require(!input.name.empty(), "pool: dataset name must not be empty");
    for (ManifestRecord r : input.manifest) {
      r.image_id = qualify(input.name, r.image_id);
      if (r.patient_id) r.patient_id = qualify(input.name, *r.patient_id);
      r.dataset = input.name;
      require(ids.insert(r.image_id).second, "pool: duplicate qualified id " + r.image_id);
      pooled.manifest.push_back(std::move(r));
    }
    for (PredictionRecord p : input.predictions) {
      p.image_id = qualify(input.name, p.image_id);
      require(prediction_ids.insert(p.image_id).second, "pool: duplicate qualified prediction id " + p.image_id);
      pooled.predictions.push_back(std::move(p));
    }
  }
  return pooled;
}

}  // namespace fpe::cohort
