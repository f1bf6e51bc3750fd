// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/morphology.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace segravir {

const char* to_string(VesselClass tag) {
  switch (tag) {
    case VesselClass::kArtery:
      return "artery";
    case VesselClass::kVein:
      return "vein";
    case VesselClass::kVessel:
      return "vessel";
  }
  return "unknown";
}

Grid<double> ProbabilityMap::channel(std::size_t k) const {
  Grid<double> out(height, width);
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) out(i, j) = at(k, i, j);
  }
  return out;
}

namespace {

// Ring order P2..P9: N, NE, E, SE, S, SW, W, NW.
constexpr std::array<int, 8> kRingDi = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr std::array<int, 8> kRingDj = {0, 1, 1, 1, 0, -1, -1, -1};

std::array<bool, 8> ring(const BinaryMask& m, std::size_t i, std::size_t j) {
  std::array<bool, 8> p{};
  for (int k = 0; k < 8; ++k) {
    const long ii = static_cast<long>(i) + kRingDi[k];
    const long jj = static_cast<long>(j) + kRingDj[k];
    p[k] = ii >= 0 && jj >= 0 && ii < static_cast<long>(m.height) &&
           jj < static_cast<long>(m.width) && m(ii, jj) != 0;
  }
  return p;
}

// Lam-Lee-Suen deletion conditions for the two-subiteration parallel scheme.
// x[0..7] are the neighbours E, NE, N, NW, W, SW, S, SE.
bool deletable(const std::array<bool, 8>& p, int pass) {
  const std::array<bool, 8> x = {p[2], p[1], p[0], p[7], p[6], p[5], p[4], p[3]};
  int crossings = 0;
  for (int k = 0; k < 8; k += 2) {
    crossings += !x[k] && (x[k + 1] || x[(k + 2) % 8]);
  }
  if (crossings != 1) return false;
  int n1 = 0;
  int n2 = 0;
  for (int k = 1; k < 8; k += 2) {
    n1 += x[k] || x[k - 1];
    n2 += x[k] || x[(k + 1) % 8];
  }
  const int n = std::min(n1, n2);
  if (n < 2 || n > 3) return false;
  if (pass == 0) return !((x[1] || x[2] || !x[7]) && x[0]);
  return !((x[5] || x[6] || !x[3]) && x[4]);
}

}  // namespace

int neighbour_count(const BinaryMask& mask, std::size_t i, std::size_t j) {
  int n = 0;
  for (bool v : ring(mask, i, j)) n += v;
  return n;
}

BinaryMask skeletonize(const BinaryMask& mask) {
  BinaryMask out = mask;
  for (auto& v : out.values) v = v ? 1 : 0;
  std::vector<std::size_t> doomed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      doomed.clear();
      for (std::size_t i = 0; i < out.height; ++i) {
        for (std::size_t j = 0; j < out.width; ++j) {
          if (out(i, j) && deletable(ring(out, i, j), pass)) {
            doomed.push_back(i * out.width + j);
          }
        }
      }
      for (std::size_t idx : doomed) out.values[idx] = 0;
      changed = changed || !doomed.empty();
    }
  }
  return out;
}

namespace {

constexpr double kUnreached = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (q - p)^2 + f[p]; writes the minimum and its
// argmin for every q. Entries with f = inf never enter the envelope.
void envelope_1d(const std::vector<double>& f, std::vector<double>& d,
                 std::vector<std::int64_t>& arg) {
  const std::size_t n = f.size();
  std::vector<std::int64_t> v(n);
  std::vector<double> z(n + 1);
  std::int64_t k = -1;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == kUnreached) continue;
    const double fq = f[q] + static_cast<double>(q) * static_cast<double>(q);
    while (k >= 0) {
      const double p = static_cast<double>(v[k]);
      const double s =
          (fq - (f[v[k]] + p * p)) / (2.0 * (static_cast<double>(q) - p));
      if (s <= z[k]) {
        --k;
      } else {
        ++k;
        v[k] = static_cast<std::int64_t>(q);
        z[k] = s;
        z[k + 1] = kUnreached;
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = static_cast<std::int64_t>(q);
      z[0] = -kUnreached;
      z[1] = kUnreached;
    }
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kUnreached);
    std::fill(arg.begin(), arg.end(), -1);
    return;
  }
  std::int64_t j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[j + 1] < static_cast<double>(q)) ++j;
    const double diff = static_cast<double>(q) - static_cast<double>(v[j]);
    d[q] = diff * diff + f[v[j]];
    arg[q] = v[j];
  }
}

}  // namespace

FeatureTransform feature_transform(const BinaryMask& mask) {
  const std::size_t h = mask.height;
  const std::size_t w = mask.width;
  Grid<double> column_sq(h, w, kUnreached);
  Grid<std::int64_t> column_arg(h, w, -1);

  std::vector<double> f(h), d(h);
  std::vector<std::int64_t> arg(h);
  for (std::size_t j = 0; j < w; ++j) {
    for (std::size_t i = 0; i < h; ++i) f[i] = mask(i, j) ? 0.0 : kUnreached;
    envelope_1d(f, d, arg);
    for (std::size_t i = 0; i < h; ++i) {
      column_sq(i, j) = d[i];
      column_arg(i, j) = arg[i];
    }
  }

  FeatureTransform out{Grid<double>(h, w, kUnreached),
                       Grid<std::int64_t>(h, w, -1)};
  f.resize(w);
  d.resize(w);
  arg.resize(w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) f[j] = column_sq(i, j);
    envelope_1d(f, d, arg);
    for (std::size_t j = 0; j < w; ++j) {
      if (arg[j] < 0) continue;
      out.distance(i, j) = std::sqrt(d[j]);
      out.nearest(i, j) =
          column_arg(i, static_cast<std::size_t>(arg[j])) *
              static_cast<std::int64_t>(w) +
          arg[j];
    }
  }
  return out;
}

Grid<double> distance_transform(const BinaryMask& mask) {
  return feature_transform(mask).distance;
}

Components label_components(const BinaryMask& mask) {
  Components out{Grid<std::int32_t>(mask.height, mask.width, 0), 0};
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask.values[start] || out.labels.values[start]) continue;
    const std::int32_t id = ++out.count;
    out.labels.values[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t idx = stack.back();
      stack.pop_back();
      const long i = static_cast<long>(idx / mask.width);
      const long j = static_cast<long>(idx % mask.width);
      for (long di = -1; di <= 1; ++di) {
        for (long dj = -1; dj <= 1; ++dj) {
          const long ii = i + di;
          const long jj = j + dj;
          if (ii < 0 || jj < 0 || ii >= static_cast<long>(mask.height) ||
              jj >= static_cast<long>(mask.width)) {
            continue;
          }
          const std::size_t n = ii * mask.width + jj;
          if (mask.values[n] && !out.labels.values[n]) {
            out.labels.values[n] = id;
            stack.push_back(n);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace segravir
