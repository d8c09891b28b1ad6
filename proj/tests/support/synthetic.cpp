#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace fpe::testing {

using imaging::FovMask;
using imaging::RasterImage;
using imaging::Rgb;

FovMask disc_mask(std::size_t w, std::size_t h, double cx, double cy, double r) {
  FovMask m(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (in_disc(static_cast<double>(x), static_cast<double>(y), cx, cy, r)) m.set(x, y);
  return m;
}

RasterImage disc_image(std::size_t w, std::size_t h, double cx, double cy, double r, Rgb inside, Rgb outside) {
  RasterImage img(w, h, outside);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (in_disc(static_cast<double>(x), static_cast<double>(y), cx, cy, r)) img.set_pixel(x, y, inside);
  return img;
}

RasterImage fundus_like(std::size_t w, std::size_t h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = 0.42 * static_cast<double>(std::min(w, h)) * (0.9 + 0.2 * u(rng));
  const double cx = static_cast<double>(w) / 2.0 + (u(rng) - 0.5) * 0.1 * static_cast<double>(w);
  const double cy = static_cast<double>(h) / 2.0 + (u(rng) - 0.5) * 0.1 * static_cast<double>(h);
  const double base_r = 150 + 60 * u(rng);
  const double base_g = 60 + 40 * u(rng);
  const double base_b = 20 + 30 * u(rng);

  struct Dot {
    double x, y, radius;
  };
  std::vector<Dot> dots;
  for (int i = 0; i < 12; ++i) {
    const double a = 2 * M_PI * u(rng);
    const double d = r * 0.8 * std::sqrt(u(rng));
    dots.push_back({cx + d * std::cos(a), cy + d * std::sin(a), 2.0 + 4.0 * u(rng)});
  }
  struct Vessel {
    double phase, amp, freq, y0;
  };
  std::vector<Vessel> vessels;
  for (int i = 0; i < 4; ++i) vessels.push_back({2 * M_PI * u(rng), 0.2 * r * u(rng), 2.0 + 3.0 * u(rng), cy + (u(rng) - 0.5) * r});

  RasterImage img(w, h, Rgb{3, 2, 1});
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y);
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x);
      const double d2 = (fx - cx) * (fx - cx) + (fy - cy) * (fy - cy);
      if (d2 > r * r) continue;
      double shade = 1.0 - 0.35 * d2 / (r * r);
      for (const auto& v : vessels) {
        const double vy = v.y0 + v.amp * std::sin(v.freq * fx / r + v.phase);
        if (std::abs(fy - vy) < 2.5) shade *= 0.7;
      }
      for (const auto& dot : dots) {
        if ((fx - dot.x) * (fx - dot.x) + (fy - dot.y) * (fy - dot.y) <= dot.radius * dot.radius) shade *= 0.5;
      }
      img.set_pixel(x, y,
                    Rgb{static_cast<std::uint8_t>(std::clamp(base_r * shade, 0.0, 255.0)),
                        static_cast<std::uint8_t>(std::clamp(base_g * shade, 0.0, 255.0)),
                        static_cast<std::uint8_t>(std::clamp(base_b * shade, 0.0, 255.0))});
    }
  }
  return img;
}

RasterImage random_image(std::size_t w, std::size_t h, std::mt19937_64& rng) {
  std::vector<std::uint8_t> data(w * h * 3);
  for (auto& v : data) v = static_cast<std::uint8_t>(rng() & 0xFF);
  return RasterImage(w, h, std::move(data));
}

ScoredSample binormal_sample(std::size_t n, double prevalence, double shift, std::mt19937_64& rng) {
  std::bernoulli_distribution is_pos(prevalence);
  std::normal_distribution<double> noise(0.0, 1.0);
  ScoredSample s;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = is_pos(rng) ? 1 : 0;
    s.labels.push_back(label);
    s.scores.push_back(noise(rng) + (label ? shift : 0.0));
  }
  return s;
}

std::vector<stats::PredictionRecord> predictions_from_scores(const std::vector<double>& prob_ref,
                                                             const std::string& prefix) {
  std::vector<stats::PredictionRecord> out;
  for (std::size_t i = 0; i < prob_ref.size(); ++i) {
    out.push_back({prefix + std::to_string(i), 1.0 - prob_ref[i], prob_ref[i]});
  }
  return out;
}

TempDir::TempDir(const std::string& tag) {
  static int counter = 0;
  path_ = std::filesystem::temp_directory_path() /
          ("fpe_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fpe::testing

namespace fpe::testing {

namespace {

cohort::ManifestRecord cohort_record(const std::string& id, const std::string& patient, cohort::Laterality side,
                                     int referable) {
  cohort::ManifestRecord r;
  r.image_id = id;
  r.path = id + ".png";
  r.dataset = "synthetic";
  r.split = cohort::Split::Test;
  r.patient_id = patient;
  r.laterality = side;
  r.referable = referable;
  return r;
}

}  // namespace

Cohort deepdrid_like_cohort(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> hi(0.55, 0.99), lo(0.01, 0.45);
  // misses per referable patient: one patient missed entirely, 20 missed once
  std::vector<int> misses(50, 0);
  misses[0] = 4;
  for (int i = 1; i <= 20; ++i) misses[i] = 1;
  // false alarms per non-referable patient: 8 x 3 and 1 x 2
  std::vector<int> alarms(50, 0);
  for (int i = 0; i < 8; ++i) alarms[i] = 3;
  alarms[8] = 2;
  std::shuffle(misses.begin(), misses.end(), rng);
  std::shuffle(alarms.begin(), alarms.end(), rng);

  Cohort c;
  auto add_patient = [&](const std::string& pid, int label, int wrong) {
    std::vector<int> flags{0, 0, 0, 0};
    for (int k = 0; k < wrong; ++k) flags[k] = 1;
    std::shuffle(flags.begin(), flags.end(), rng);
    for (int k = 0; k < 4; ++k) {
      const std::string id = pid + "_" + std::to_string(k);
      c.manifest.push_back(
          cohort_record(id, pid, k < 2 ? cohort::Laterality::Left : cohort::Laterality::Right, label));
      const bool predict_ref = (label == 1) != (flags[k] == 1);
      const double p = predict_ref ? hi(rng) : lo(rng);
      c.predictions.push_back({id, 1.0 - p, p});
    }
  };
  for (int i = 0; i < 50; ++i) add_patient("R" + std::to_string(100 + i), 1, misses[i]);
  for (int i = 0; i < 50; ++i) add_patient("N" + std::to_string(100 + i), 0, alarms[i]);
  return c;
}

Cohort graded_corpus(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const char* qualities[] = {"reject", "usable", "good"};
  Cohort c;
  for (std::size_t i = 0; i < n; ++i) {
    cohort::ManifestRecord r;
    r.image_id = "g" + std::to_string(i);
    r.path = r.image_id + ".png";
    r.dataset = "graded";
    r.patient_id = "p" + std::to_string(i / 2);
    r.laterality = i % 2 ? cohort::Laterality::Right : cohort::Laterality::Left;
    r.dr_grade = static_cast<int>(rng() % 5);
    const std::size_t q = rng() % 10;
    if (q < 9) {
      r.quality = qualities[q % 3];
      r.quality_scheme = "eyeq";
    }
    const double logit = 0.9 * (*r.dr_grade - 1.5) + noise(rng) - (q % 3 == 0 ? 0.5 : 0.0);
    // quantize so ties occur
    const double p = std::round(1000.0 / (1.0 + std::exp(-logit))) / 1000.0;
    c.manifest.push_back(r);
    c.predictions.push_back({r.image_id, 1.0 - p, p});
  }
  return c;
}

}  // namespace fpe::testing
