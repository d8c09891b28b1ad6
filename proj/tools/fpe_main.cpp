#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fpe/cohort.hpp"
#include "fpe/error.hpp"
#include "fpe/eval_report.hpp"
#include "fpe/pipeline.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitReconciliation = 2;

struct PreprocessArgs {
  std::string manifest;
  std::string out;
  std::size_t size{512};
  std::size_t workers{1};
  std::string stage{"after_resize"};
  bool no_square_pad{false};
  bool tensor{false};
  bool no_png{false};
  fpe::enhance::EnhanceParams enhance;
};

struct InputArgs {
  std::vector<std::string> manifests;
  std::vector<std::string> predictions;
  std::vector<std::string> names;
};

struct EvaluateArgs {
  InputArgs inputs;
  std::string out;
  bool per_patient{false};
  bool per_eye{false};
  bool stratify_grade{false};
  std::string quality_scheme;
  bool pool{false};
  std::optional<std::uint64_t> seed;
  std::size_t bootstrap_n{1000};
  std::size_t workers{1};
  std::string split{"all"};
  std::string wilson{"plain"};
};

struct AggregateArgs {
  std::string manifest;
  std::string predictions;
  std::string out;
  bool per_eye{false};
};

struct PoolArgs {
  InputArgs inputs;
  std::string out_manifest;
  std::string out_predictions;
};

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("FPE_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw CLI::ValidationError("FPE_SEED", "must be an unsigned integer");
  }
  return 0;
}

std::vector<fpe::report::EvalInput> load_inputs(const InputArgs& args) {
  if (args.manifests.size() != args.predictions.size()) {
    throw CLI::ValidationError("--predictions", "give one prediction file per manifest");
  }
  if (!args.names.empty() && args.names.size() != args.manifests.size()) {
    throw CLI::ValidationError("--name", "give one name per manifest");
  }
  std::vector<fpe::report::EvalInput> inputs;
  for (std::size_t i = 0; i < args.manifests.size(); ++i) {
    fpe::report::EvalInput in;
    in.name = args.names.empty() ? std::filesystem::path(args.manifests[i]).stem().string() : args.names[i];
    in.manifest_path = args.manifests[i];
    in.predictions_path = args.predictions[i];
    in.manifest = fpe::cohort::read_manifest(args.manifests[i]);
    in.predictions = fpe::cohort::read_predictions(args.predictions[i]);
    inputs.push_back(std::move(in));
  }
  return inputs;
}

void add_enhance_options(CLI::App* cmd, fpe::enhance::EnhanceParams& p) {
  cmd->add_option("--alpha", p.alpha, "Image weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--beta", p.beta, "Background weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--gamma", p.gamma, "Anchor intensity")->capture_default_str()->check(CLI::Range(0.0, 255.0));
  cmd->add_option("--sigma-divisor", p.sigma_divisor, "sigma = width / divisor")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--kernel-truncation", p.kernel_truncation, "Kernel radius in sigmas")
      ->capture_default_str()
      ->check(CLI::Range(1.0, 100.0));
}

int run_preprocess(const PreprocessArgs& a) {
  fpe::pipeline::PreprocessConfig config;
  config.target_size = a.size;
  config.workers = a.workers;
  config.enhance_stage =
      a.stage == "before_resize" ? fpe::pipeline::EnhanceStage::BeforeResize : fpe::pipeline::EnhanceStage::AfterResize;
  config.square_pad = !a.no_square_pad;
  config.emit_tensor = a.tensor;
  config.emit_png = !a.no_png;
  config.enhance = a.enhance;

  const auto manifest = fpe::cohort::read_manifest(a.manifest);
  const auto base = std::filesystem::path(a.manifest).parent_path();
  const auto report = fpe::pipeline::run_batch(manifest, config, a.out, base);
  std::cout << "processed " << report.processed << " of " << manifest.size() << " images in " << report.wall_time
            << " s (" << report.per_image_mean << " +/- " << report.per_image_sd << " s per image)\n";
  for (const auto& f : report.failed) {
    std::cerr << "failed " << f.image_id << " [" << fpe::to_string(f.kind) << "]: " << f.message << "\n";
  }
  return 0;
}

int run_evaluate(const EvaluateArgs& a) {
  fpe::report::EvalOptions options;
  options.per_patient = a.per_patient;
  options.per_eye = a.per_eye;
  options.stratify_grade = a.stratify_grade;
  if (!a.quality_scheme.empty()) options.quality_scheme = a.quality_scheme;
  options.pool = a.pool;
  if (a.split != "all") {
    options.split = a.split == "train" ? fpe::cohort::Split::Train
                    : a.split == "val" ? fpe::cohort::Split::Val
                                       : fpe::cohort::Split::Test;
  }
  options.bootstrap.n_resamples = a.bootstrap_n;
  options.bootstrap.seed = resolve_seed(a.seed);
  options.bootstrap.workers = a.workers;
  options.wilson = a.wilson == "cc" ? fpe::stats::WilsonVariant::ContinuityCorrected : fpe::stats::WilsonVariant::Plain;

  const auto inputs = load_inputs(a.inputs);
  if (inputs.size() > 1 && !a.pool) throw CLI::ValidationError("--pool", "several inputs need --pool");
  const auto outputs = fpe::report::build_eval_report(inputs, options);
  fpe::report::write_eval_outputs(outputs, a.out);
  std::cout << "wrote " << (std::filesystem::path(a.out) / "report.json").string() << " and "
            << outputs.roc_tables.size() << " ROC tables\n";
  return 0;
}

int run_aggregate(const AggregateArgs& a) {
  const auto manifest = fpe::cohort::read_manifest(a.manifest);
  const auto predictions = fpe::cohort::read_predictions(a.predictions);
  const auto set = fpe::cohort::join(manifest, predictions);
  const auto groups = a.per_eye ? fpe::cohort::aggregate_eyes(set) : fpe::cohort::aggregate_patients(set);

  std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
  if (!out) throw fpe::Error(fpe::ErrorKind::Io, "cannot write " + a.out);
  out << (a.per_eye ? "eye_id" : "patient_id") << ",n_images,prob_nonref,prob_ref,referable\n";
  for (const auto& g : groups) {
    out << g.patient_id << ',' << g.image_ids.size() << ',' << format_double(1.0 - g.prob_ref) << ','
        << format_double(g.prob_ref) << ',' << g.referable << '\n';
  }
  std::cout << "wrote " << groups.size() << (a.per_eye ? " eyes" : " patients") << " to " << a.out << "\n";
  return 0;
}

int run_pool(const PoolArgs& a) {
  const auto inputs = load_inputs(a.inputs);
  std::vector<fpe::cohort::PoolInput> pool;
  for (const auto& in : inputs) pool.push_back({in.name, in.manifest, in.predictions});
  const auto pooled = fpe::cohort::pool_datasets(pool);

  std::ofstream m(a.out_manifest, std::ios::binary | std::ios::trunc);
  if (!m) throw fpe::Error(fpe::ErrorKind::Io, "cannot write " + a.out_manifest);
  fpe::cohort::write_manifest(m, pooled.manifest);
  std::ofstream p(a.out_predictions, std::ios::binary | std::ios::trunc);
  if (!p) throw fpe::Error(fpe::ErrorKind::Io, "cannot write " + a.out_predictions);
  fpe::cohort::write_predictions(p, pooled.predictions);
  std::cout << "pooled " << inputs.size() << " sets: " << pooled.manifest.size() << " records, "
            << pooled.predictions.size() << " predictions\n";
  return 0;
}

// Repeatable; the i-th --predictions pairs with the i-th --manifest.
void add_input_options(CLI::App* cmd, InputArgs& in) {
  cmd->add_option("--manifest", in.manifests, "Manifest CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--predictions", in.predictions, "Prediction CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--name", in.names, "Dataset name per manifest (defaults to the manifest file stem)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fundus photograph preprocessing and screening evaluation"};
  app.set_version_flag("--version", FPE_VERSION);
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* preprocess = app.add_subcommand("preprocess", "Crop, resize and enhance every image in a manifest");
  preprocess->add_option("--manifest", pre.manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  preprocess->add_option("--out", pre.out, "Output directory")->required();
  preprocess->add_option("--size", pre.size, "Output side length")->capture_default_str()->check(CLI::Range(32, 65535));
  preprocess->add_option("--workers", pre.workers, "Parallel workers")->capture_default_str()->check(CLI::Range(1, 1024));
  preprocess->add_option("--enhance-stage", pre.stage, "Where enhancement runs")
      ->capture_default_str()
      ->check(CLI::IsMember({"after_resize", "before_resize"}));
  preprocess->add_flag("--no-square-pad", pre.no_square_pad, "Crop without padding to a square");
  preprocess->add_flag("--tensor", pre.tensor, "Also write normalized .t32 tensors");
  preprocess->add_flag("--no-png", pre.no_png, "Skip PNG output");
  add_enhance_options(preprocess, pre.enhance);

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Compute AUC, Se/Sp and strata with confidence intervals");
  add_input_options(evaluate, ev.inputs);
  evaluate->add_option("--out", ev.out, "Report directory")->required();
  evaluate->add_flag("--per-patient", ev.per_patient, "Add max/OR per-patient section");
  evaluate->add_flag("--per-eye", ev.per_eye, "Add max/OR per-eye section");
  evaluate->add_flag("--stratify-grade", ev.stratify_grade, "Add grade 2/3/4 vs fixed negatives sections");
  evaluate->add_option("--stratify-quality", ev.quality_scheme, "Add per-quality sections for this scheme");
  evaluate->add_flag("--pool", ev.pool, "Pool every manifest/prediction pair");
  evaluate->add_option("--seed", ev.seed, "Bootstrap seed (falls back to FPE_SEED, then 0)");
  evaluate->add_option("--bootstrap-n", ev.bootstrap_n, "Bootstrap resamples")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{1}, std::size_t{10000000}));
  evaluate->add_option("--workers", ev.workers, "Bootstrap threads")->capture_default_str()->check(CLI::Range(1, 1024));
  evaluate->add_option("--split", ev.split, "Evaluate only this split")
      ->capture_default_str()
      ->check(CLI::IsMember({"all", "train", "val", "test"}));
  evaluate->add_option("--wilson", ev.wilson, "Wilson variant for Se/Sp")
      ->capture_default_str()
      ->check(CLI::IsMember({"plain", "cc"}));

  AggregateArgs ag;
  auto* aggregate = app.add_subcommand("aggregate-patients", "Write per-patient max/OR predictions");
  aggregate->add_option("--manifest", ag.manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  aggregate->add_option("--predictions", ag.predictions, "Prediction CSV")->required()->check(CLI::ExistingFile);
  aggregate->add_option("--out", ag.out, "Output CSV")->required();
  aggregate->add_flag("--per-eye", ag.per_eye, "Group by patient and eye");

  PoolArgs po;
  auto* pool = app.add_subcommand("pool", "Merge several datasets into one manifest and prediction file");
  add_input_options(pool, po.inputs);
  pool->add_option("--out-manifest", po.out_manifest, "Pooled manifest CSV")->required();
  pool->add_option("--out-predictions", po.out_predictions, "Pooled prediction CSV")->required();

  try {
    app.parse(argc, argv);
    if (*preprocess) return run_preprocess(pre);
    if (*evaluate) return run_evaluate(ev);
    if (*aggregate) return run_aggregate(ag);
    if (*pool) return run_pool(po);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const fpe::ReconciliationError& e) {
    std::cerr << "reconciliation failed: " << e.what() << "\n";
    for (const auto& id : e.ids()) std::cerr << "  " << id << "\n";
    return kExitReconciliation;
  } catch (const fpe::Error& e) {
    std::cerr << "error [" << fpe::to_string(e.kind()) << "]: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
