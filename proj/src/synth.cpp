#include <array>
#include <cmath>
#include <cstdio>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "logonet/dataset.hpp"
#include "logonet/error.hpp"
#include "logonet/image.hpp"

namespace logonet {
namespace fs = std::filesystem;

namespace {

enum class StrokeKind { circle, bar, triangle, arc };
constexpr std::array<const char*, 4> kKindNames{"circle", "bar", "triangle", "arc"};

// Geometry in unit coordinates, (0,0) top left, (1,1) bottom right.
struct Stroke {
  StrokeKind kind = StrokeKind::circle;
  std::vector<cv::Point2d> points;
  double radius = 0.0;
  double start_deg = 0.0;
  double sweep_deg = 0.0;
};

constexpr int kSupersample = 4;
constexpr int kShift = 4;  // fractional bits for sub-pixel drawing
constexpr double kLogoThickness = 0.035;
constexpr double kJitter = 0.015;
constexpr std::array<double, 3> kDropout{0.0, 0.1, 0.3};

std::vector<Stroke> random_composition(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count_dist(2, 4);
  std::uniform_int_distribution<int> kind_dist(0, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const double pi = std::acos(-1.0);

  std::vector<Stroke> strokes(static_cast<std::size_t>(count_dist(rng)));
  for (auto& s : strokes) {
    s.kind = static_cast<StrokeKind>(kind_dist(rng));
    switch (s.kind) {
      case StrokeKind::circle:
        s.points = {{in(0.3, 0.7), in(0.3, 0.7)}};
        s.radius = in(0.1, 0.28);
        break;
      case StrokeKind::bar: {
        cv::Point2d a, b;
        do {
          a = {in(0.12, 0.88), in(0.12, 0.88)};
          b = {in(0.12, 0.88), in(0.12, 0.88)};
        } while (std::hypot(a.x - b.x, a.y - b.y) < 0.3);
        s.points = {a, b};
        break;
      }
      case StrokeKind::triangle: {
        const cv::Point2d c{in(0.35, 0.65), in(0.35, 0.65)};
        const double r = in(0.15, 0.3);
        const double base = in(0.0, 2.0 * pi);
        for (int v = 0; v < 3; ++v) {
          const double angle = base + v * 2.0 * pi / 3.0 + in(-0.35, 0.35);
          s.points.push_back({c.x + r * std::cos(angle), c.y + r * std::sin(angle)});
        }
        break;
      }
      case StrokeKind::arc:
        s.points = {{in(0.3, 0.7), in(0.3, 0.7)}};
        s.radius = in(0.12, 0.3);
        s.start_deg = in(0.0, 360.0);
        s.sweep_deg = in(120.0, 270.0);
        break;
    }
  }
  return strokes;
}

Stroke jittered(const Stroke& stroke, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, kJitter);
  std::normal_distribution<double> scale(0.0, 0.05);
  std::normal_distribution<double> angle(0.0, 6.0);
  Stroke out = stroke;
  for (auto& p : out.points) {
    p.x += noise(rng);
    p.y += noise(rng);
  }
  out.radius *= 1.0 + scale(rng);
  out.start_deg += angle(rng);
  out.sweep_deg += angle(rng);
  return out;
}

cv::Point to_canvas(cv::Point2d p, int canvas) {
  const double f = canvas * (1 << kShift);
  return {static_cast<int>(std::lround(p.x * f)), static_cast<int>(std::lround(p.y * f))};
}

std::vector<std::uint8_t> render(const std::vector<Stroke>& strokes,
                                 const std::vector<double>& thickness, std::size_t size) {
  const int canvas = static_cast<int>(size) * kSupersample;
  cv::Mat img(canvas, canvas, CV_8U, cv::Scalar(255));
  const double fixed = canvas * (1 << kShift);
  for (std::size_t i = 0; i < strokes.size(); ++i) {
    const auto& s = strokes[i];
    const int t = std::max(1, static_cast<int>(std::lround(thickness[i] * canvas)));
    const cv::Scalar ink(0);
    switch (s.kind) {
      case StrokeKind::circle:
        cv::circle(img, to_canvas(s.points[0], canvas),
                   static_cast<int>(std::lround(s.radius * fixed)), ink, t, cv::LINE_AA, kShift);
        break;
      case StrokeKind::bar:
        cv::line(img, to_canvas(s.points[0], canvas), to_canvas(s.points[1], canvas), ink, t,
                 cv::LINE_AA, kShift);
        break;
      case StrokeKind::triangle: {
        std::vector<cv::Point> poly;
        for (const auto& p : s.points) poly.push_back(to_canvas(p, canvas));
        cv::polylines(img, poly, true, ink, t, cv::LINE_AA, kShift);
        break;
      }
      case StrokeKind::arc: {
        const int r = static_cast<int>(std::lround(s.radius * fixed));
        cv::ellipse(img, to_canvas(s.points[0], canvas), cv::Size(r, r), 0.0, s.start_deg,
                    s.start_deg + s.sweep_deg, ink, t, cv::LINE_AA, kShift);
        break;
      }
    }
  }
  cv::Mat small;
  cv::resize(img, small, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0,
             cv::INTER_AREA);
  std::vector<std::uint8_t> png;
  if (!cv::imencode(".png", small, png)) throw Error("png encoding failed");
  return png;
}

std::mt19937_64 seeded(std::uint64_t seed, std::size_t instance, std::size_t sketch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(instance), static_cast<std::uint32_t>(sketch)};
  return std::mt19937_64(seq);
}

std::string numbered(const char* prefix, std::size_t i) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%s%04zu", prefix, i);
  return buffer;
}

}  // namespace

DatasetManifest synth_generate(const SynthOptions& options, const fs::path& root) {
  if (options.instances < 2) throw ConfigError("synth: need at least 2 instances");
  if (options.size < 8) throw ConfigError("synth: image size must be at least 8");
  fs::create_directories(root / "images");
  fs::create_directories(root / "sketches");

  DatasetManifest manifest;
  manifest.root = root;
  for (std::size_t i = 0; i < options.instances; ++i) {
    auto rng = seeded(options.seed, i, 0);
    const auto strokes = random_composition(rng);

    const std::string id = numbered("logo_", i);
    std::string label;
    for (const auto& s : strokes)
      label += (label.empty() ? "" : " ") + std::string(kKindNames[static_cast<int>(s.kind)]);
    const std::string image_path = "images/" + id + ".png";
    write_file_atomic(root / image_path,
                      render(strokes, std::vector<double>(strokes.size(), kLogoThickness),
                             options.size));
    manifest.logos.push_back({id, image_path, label});

    for (std::size_t j = 0; j < options.sketches_per_instance; ++j) {
      auto srng = seeded(options.seed, i, j + 1);
      const auto subset = static_cast<Subset>(j % 3);
      const double dropout = kDropout[j % 3];
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::uniform_real_distribution<double> thick(0.6 * kLogoThickness, 1.3 * kLogoThickness);

      std::vector<Stroke> kept;
      std::vector<double> thickness;
      std::vector<Stroke> all;
      for (const auto& s : strokes) all.push_back(jittered(s, srng));
      for (const auto& s : all) {
        const double t = thick(srng);
        if (u(srng) < dropout) continue;
        kept.push_back(s);
        thickness.push_back(t);
      }
      if (kept.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
        kept.push_back(all[pick(srng)]);
        thickness.push_back(kLogoThickness);
      }
      const std::string sketch_id = id + "_s" + std::to_string(j);
      const std::string path = "sketches/" + sketch_id + ".png";
      write_file_atomic(root / path, render(kept, thickness, options.size));
      manifest.sketches.push_back({sketch_id, id, path, subset, Split::unassigned});
    }
  }
  write_manifest(manifest);
  return manifest;
}

}  // namespace logonet
