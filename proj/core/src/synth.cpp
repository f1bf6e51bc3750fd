// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "segravir/error.hpp"
#include "segravir/rng.hpp"

namespace segravir {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
  if (height == 0 || width == 0) {
    throw InvalidArgument("synth: canvas must be non-empty");
  }
  if (channels != 1 && channels != 3) {
    throw InvalidArgument("synth: channels must be 1 or 3");
  }
  if (min_width_px < 3) throw InvalidArgument("synth: min_width_px must be >= 3");
  if (max_width_px < min_width_px) {
    throw InvalidArgument("synth: max_width_px must be >= min_width_px");
  }
  if (!(artery_fraction >= 0.0 && artery_fraction <= 1.0)) {
    throw InvalidArgument("synth: artery_fraction must be in [0,1]");
  }
  if (!(noise_level >= 0.0)) throw InvalidArgument("synth: noise_level must be >= 0");
  if (margin_px < 0) throw InvalidArgument("synth: margin_px must be >= 0");
  if (max_attempts < 1) throw InvalidArgument("synth: max_attempts must be >= 1");
  for (std::size_t v = 0; v < vessels.size(); ++v) {
    const VesselSpec& vs = vessels[v];
    const std::string where = "synth: vessel " + std::to_string(v);
    if (vs.label != kArtery && vs.label != kVein) {
      throw InvalidArgument(where + ": label must be 1 (artery) or 2 (vein)");
    }
    if (vs.width_px < 3) throw InvalidArgument(where + ": width_px must be >= 3");
    if (vs.control_points.size() < 2) {
      throw InvalidArgument(where + ": needs at least 2 control points");
    }
  }
}

namespace {

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const double dy = b.y - a.y;
  const double dx = b.x - a.x;
  const double len2 = dy * dy + dx * dx;
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp(((p.y - a.y) * dy + (p.x - a.x) * dx) / len2, 0.0, 1.0);
  }
  const double ey = a.y + t * dy - p.y;
  const double ex = a.x + t * dx - p.x;
  return std::sqrt(ey * ey + ex * ex);
}

double polyline_length(const std::vector<Point2>& line) {
  double total = 0.0;
  for (std::size_t k = 1; k < line.size(); ++k) {
    total += std::hypot(line[k].y - line[k - 1].y, line[k].x - line[k - 1].x);
  }
  return total;
}

// Pixels whose centre lies within width/2 of the polyline.
std::vector<std::size_t> rasterize(const std::vector<Point2>& line, int width_px,
                                   std::size_t height, std::size_t width) {
  const double r = width_px / 2.0;
  double y0 = line[0].y, y1 = line[0].y, x0 = line[0].x, x1 = line[0].x;
  for (const Point2& p : line) {
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
  }
  const auto lo = [](double v) { return static_cast<long>(std::floor(v)); };
  const auto hi = [](double v) { return static_cast<long>(std::ceil(v)); };
  const long i0 = std::max(0L, lo(y0 - r));
  const long i1 = std::min(static_cast<long>(height) - 1, hi(y1 + r));
  const long j0 = std::max(0L, lo(x0 - r));
  const long j1 = std::min(static_cast<long>(width) - 1, hi(x1 + r));
  std::vector<std::size_t> pixels;
  for (long i = i0; i <= i1; ++i) {
    for (long j = j0; j <= j1; ++j) {
      const Point2 p{static_cast<double>(i), static_cast<double>(j)};
      double best = std::numeric_limits<double>::infinity();
      if (line.size() == 1) {
        best = std::hypot(p.y - line[0].y, p.x - line[0].x);
      }
      for (std::size_t k = 1; k < line.size() && best > r; ++k) {
        best = std::min(best, segment_distance(p, line[k - 1], line[k]));
      }
      if (best <= r) pixels.push_back(static_cast<std::size_t>(i) * width + j);
    }
  }
  return pixels;
}

bool inside_canvas(const std::vector<Point2>& line, double clearance,
                   std::size_t height, std::size_t width) {
  for (const Point2& p : line) {
    if (p.y < clearance || p.x < clearance ||
        p.y > static_cast<double>(height) - 1.0 - clearance ||
        p.x > static_cast<double>(width) - 1.0 - clearance) {
      return false;
    }
  }
  return true;
}

VesselSpec random_vessel(const SynthSpec& spec, Rng& draw) {
  VesselSpec v;
  v.label = draw.uniform() < spec.artery_fraction ? kArtery : kVein;
  v.width_px = spec.min_width_px + static_cast<int>(draw.below(
                   static_cast<std::uint64_t>(spec.max_width_px - spec.min_width_px + 1)));
  const double extent =
      static_cast<double>(std::min(spec.height, spec.width));
  const double length = draw.uniform(0.3, 0.6) * extent;
  const double angle = draw.uniform(0.0, 2.0 * std::numbers::pi);
  const Point2 start{draw.uniform(0.0, spec.height - 1.0),
                     draw.uniform(0.0, spec.width - 1.0)};
  const Point2 end{start.y + length * std::sin(angle),
                   start.x + length * std::cos(angle)};
  const double bend = draw.uniform(-0.2, 0.2) * length;
  const Point2 mid{(start.y + end.y) / 2.0 + bend * std::cos(angle),
                   (start.x + end.x) / 2.0 - bend * std::sin(angle)};
  v.control_points = {start, mid, end};
  return v;
}

double texture(const std::vector<double>& waves, double i, double j) {
  double t = 0.0;
  for (std::size_t w = 0; w + 3 < waves.size(); w += 4) {
    t += waves[w] * std::sin(waves[w + 1] * i + waves[w + 2] * j + waves[w + 3]);
  }
  return t;
}

double quantize(double v) {
  return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

}  // namespace

std::vector<Point2> centerline(const VesselSpec& vessel) {
  const std::vector<Point2>& cp = vessel.control_points;
  if (cp.size() != 3) return cp;
  const double chord = std::hypot(cp[1].y - cp[0].y, cp[1].x - cp[0].x) +
                       std::hypot(cp[2].y - cp[1].y, cp[2].x - cp[1].x);
  const std::size_t steps =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(chord * 4.0)));
  std::vector<Point2> out;
  out.reserve(steps + 1);
  for (std::size_t s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(steps);
    const double a = (1 - t) * (1 - t), b = 2 * (1 - t) * t, c = t * t;
    out.push_back({a * cp[0].y + b * cp[1].y + c * cp[2].y,
                   a * cp[0].x + b * cp[1].x + c * cp[2].x});
  }
  return out;
}

SynthResult synth_generate(const SynthSpec& spec, std::uint64_t seed,
                           const std::string& id, double pixel_size_microns) {
  spec.validate();
  if (!(pixel_size_microns > 0.0)) {
    throw InvalidArgument("synth: pixel size must be > 0 microns");
  }
  const std::size_t H = spec.height, W = spec.width;
  Rng geometry(derive_seed(seed, "synth.geometry"));
  Rng noise(derive_seed(seed, "synth.noise"));
  Rng waves_draw(derive_seed(derive_seed(seed, "synth.texture"),
                              {spec.texture_seed}));

  SynthResult out;
  out.vessel_ids = Grid<std::int32_t>(H, W, 0);
  Grid<std::uint8_t> blocked(H, W, 0);
  std::vector<VesselSpec> placed;
  std::vector<std::vector<Point2>> lines;

  const auto place = [&](const VesselSpec& v, const std::vector<Point2>& line,
                         const std::vector<std::size_t>& pixels) {
    const std::int32_t tag = static_cast<std::int32_t>(placed.size()) + 1;
    const long m = spec.margin_px;
    for (std::size_t p : pixels) {
      out.vessel_ids.values[p] = tag;
      const long i = static_cast<long>(p / W), j = static_cast<long>(p % W);
      for (long di = -m; di <= m; ++di) {
        for (long dj = -m; dj <= m; ++dj) {
          const long a = i + di, b = j + dj;
          if (a >= 0 && b >= 0 && a < static_cast<long>(H) && b < static_cast<long>(W)) {
            blocked(a, b) = 1;
          }
        }
      }
    }
    placed.push_back(v);
    lines.push_back(line);
  };

  if (!spec.vessels.empty()) {
    for (std::size_t v = 0; v < spec.vessels.size(); ++v) {
      const std::vector<Point2> line = centerline(spec.vessels[v]);
      const std::vector<std::size_t> pixels =
          rasterize(line, spec.vessels[v].width_px, H, W);
      for (std::size_t p : pixels) {
        if (out.vessel_ids.values[p] != 0) {
          throw DataError("synth: vessel " + std::to_string(v) +
                          " overlaps vessel " +
                          std::to_string(out.vessel_ids.values[p] - 1));
        }
      }
      place(spec.vessels[v], line, pixels);
    }
  } else {
    for (std::size_t v = 0; v < spec.vessel_count; ++v) {
      bool ok = false;
      for (int attempt = 0; attempt < spec.max_attempts && !ok; ++attempt) {
        const VesselSpec cand = random_vessel(spec, geometry);
        const std::vector<Point2> line = centerline(cand);
        if (!inside_canvas(line, cand.width_px / 2.0 + 1.0, H, W)) continue;
        const std::vector<std::size_t> pixels = rasterize(line, cand.width_px, H, W);
        if (std::any_of(pixels.begin(), pixels.end(),
                        [&](std::size_t p) { return blocked.values[p] != 0; })) {
          continue;
        }
        place(cand, line, pixels);
        ok = true;
      }
      if (!ok) {
        throw DataError("synth: could not place vessel " + std::to_string(v) +
                        " after " + std::to_string(spec.max_attempts) +
                        " attempts");
      }
    }
  }

  LabeledSample& s = out.sample;
  s.id = id;
  s.pixel_size_microns = pixel_size_microns;
  s.labels = Grid<std::uint8_t>(H, W, kBackground);
  s.eval_mask = Grid<std::uint8_t>(H, W, 1);
  for (std::size_t p = 0; p < H * W; ++p) {
    if (out.vessel_ids.values[p] > 0) {
      s.labels.values[p] = placed[out.vessel_ids.values[p] - 1].label;
    }
  }

  std::vector<double> waves;
  for (int w = 0; w < 3; ++w) {
    waves.push_back(0.04);
    waves.push_back(waves_draw.uniform(0.05, 0.3));
    waves.push_back(waves_draw.uniform(0.05, 0.3));
    waves.push_back(waves_draw.uniform(0.0, 2.0 * std::numbers::pi));
  }
  // Background, artery and vein base colours per channel.
  const double grey[3][1] = {{0.45}, {0.78}, {0.2}};
  const double colour[3][3] = {
      {0.80, 0.45, 0.25}, {0.60, 0.22, 0.12}, {0.38, 0.10, 0.08}};
  s.image.channels = spec.channels;
  s.image.height = H;
  s.image.width = W;
  s.image.values.assign(spec.channels * H * W, 0.0);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) {
      const double t = texture(waves, static_cast<double>(i), static_cast<double>(j));
      const std::uint8_t label = s.labels(i, j);
      double profile = 0.0;
      if (label != kBackground) {
        const std::size_t v = out.vessel_ids(i, j) - 1;
        double d = std::numeric_limits<double>::infinity();
        const Point2 p{static_cast<double>(i), static_cast<double>(j)};
        for (std::size_t k = 1; k < lines[v].size(); ++k) {
          d = std::min(d, segment_distance(p, lines[v][k - 1], lines[v][k]));
        }
        const double r = placed[v].width_px / 2.0;
        profile = 1.0 - 0.3 * (d / r) * (d / r);
      }
      for (std::size_t c = 0; c < spec.channels; ++c) {
        const double bg = spec.channels == 1 ? grey[0][0] : colour[0][c];
        const double fg = spec.channels == 1 ? grey[label][0] : colour[label][c];
        double v = bg + t;
        if (label != kBackground) v += (fg - bg) * profile;
        v += spec.noise_level * noise.normal();
        s.image.at(c, i, j) = quantize(v);
      }
    }
  }

  double weighted[3] = {0, 0, 0}, lengths[3] = {0, 0, 0};
  for (std::size_t v = 0; v < placed.size(); ++v) {
    VesselTruth vt;
    vt.index = v;
    vt.label = placed[v].label;
    vt.width_px = placed[v].width_px;
    vt.width_um = placed[v].width_px * pixel_size_microns;
    vt.length_px = polyline_length(lines[v]);
    weighted[vt.label] += vt.width_um * vt.length_px;
    lengths[vt.label] += vt.length_px;
    out.truth.vessels.push_back(vt);
  }
  if (lengths[kArtery] > 0) out.truth.artery_mean_um = weighted[kArtery] / lengths[kArtery];
  if (lengths[kVein] > 0) out.truth.vein_mean_um = weighted[kVein] / lengths[kVein];
  return out;
}

void write_width_truth(const fs::path& path,
                       const std::vector<std::pair<std::string, WidthTruth>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "id\tvessel\tclass\twidth_px\twidth_um\tlength_px\n";
  char buf[64];
  for (const auto& [id, truth] : rows) {
    for (const VesselTruth& v : truth.vessels) {
      std::snprintf(buf, sizeof buf, "%.6f", v.length_px);
      out << id << '\t' << v.index << '\t'
          << (v.label == kArtery ? "artery" : "vein") << '\t' << v.width_px
          << '\t' << v.width_um << '\t' << buf << '\n';
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<std::pair<std::string, WidthTruth>> read_width_truth(
    const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open width reference " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "id\tvessel\tclass\twidth_px\twidth_um\tlength_px") {
    throw DataError(path.string() + ": unexpected header");
  }
  std::map<std::string, WidthTruth> by_id;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, cls;
    VesselTruth v;
    if (!(ss >> id >> v.index >> cls >> v.width_px >> v.width_um >> v.length_px) ||
        (cls != "artery" && cls != "vein")) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": malformed row");
    }
    v.label = cls == "artery" ? kArtery : kVein;
    by_id[id].vessels.push_back(v);
  }
  std::vector<std::pair<std::string, WidthTruth>> out;
  for (auto& [id, truth] : by_id) {
    double weighted[3] = {0, 0, 0}, lengths[3] = {0, 0, 0};
    for (const VesselTruth& v : truth.vessels) {
      weighted[v.label] += v.width_um * v.length_px;
      lengths[v.label] += v.length_px;
    }
    if (lengths[kArtery] > 0) truth.artery_mean_um = weighted[kArtery] / lengths[kArtery];
    if (lengths[kVein] > 0) truth.vein_mean_um = weighted[kVein] / lengths[kVein];
    out.emplace_back(id, std::move(truth));
  }
  return out;
}

}  // namespace segravir
