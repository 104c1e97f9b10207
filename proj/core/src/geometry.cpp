// SPDX-License-Identifier: Apache-2.0
#include "homer/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "homer/error.hpp"
#include "homer/random.hpp"

namespace homer::geometry {

namespace {

using Mat3 = Eigen::Matrix3d;

Mat3 to_eigen(const std::array<double, 9>& h) {
  Mat3 m;
  m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  return m;
}

std::array<double, 9> from_eigen(const Mat3& m) {
  return {m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2), m(2, 0), m(2, 1), m(2, 2)};
}

// Similarity taking a point set to zero centroid and mean distance sqrt(2).
struct Normalizer {
  Mat3 transform = Mat3::Identity();
  std::vector<Eigen::Vector2d> points;
};

Normalizer normalize_points(std::span<const Correspondence> c, bool use_target) {
  Normalizer out;
  out.points.reserve(c.size());
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& corr : c) {
    const Point2 p = use_target ? corr.p_prime : corr.p;
    out.points.emplace_back(p.x, p.y);
    centroid += out.points.back();
  }
  centroid /= static_cast<double>(c.size());
  double mean_dist = 0.0;
  for (const auto& p : out.points) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(c.size());
  if (!(mean_dist > 1e-12)) {
    fail(ErrorCode::degenerate_configuration, "correspondence points coincide");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  for (auto& p : out.points) p = (p - centroid) * s;
  out.transform << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return out;
}

bool collinear(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const Eigen::Vector2d u = b - a;
  const Eigen::Vector2d v = c - a;
  return std::abs(u.x() * v.y() - u.y() * v.x()) <= 1e-8;
}

void check_configuration(const std::vector<Eigen::Vector2d>& pts, const char* which) {
  if (pts.size() == 4) {
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = i + 1; j < 4; ++j) {
        for (std::size_t k = j + 1; k < 4; ++k) {
          if (collinear(pts[i], pts[j], pts[k])) {
            fail(ErrorCode::degenerate_configuration,
                 std::string("three collinear ") + which + " points in a minimal set");
          }
        }
      }
    }
    return;
  }
  // Larger sets: reject only if every point lies on one line.
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += p * p.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  if (es.eigenvalues()(0) <= 1e-8 * std::max(es.eigenvalues()(1), 1e-300)) {
    fail(ErrorCode::degenerate_configuration, std::string("all ") + which + " points collinear");
  }
}

}  // namespace

Homography::Homography() : h_{1, 0, 0, 0, 1, 0, 0, 0, 1} {
  const double n = std::sqrt(3.0);
  for (auto& v : h_) v /= n;
}

Homography Homography::from_row_major(const std::array<double, 9>& m) {
  double norm2 = 0.0;
  for (double v : m) {
    if (!std::isfinite(v)) fail(ErrorCode::degenerate_homography, "non-finite homography entry");
    norm2 += v * v;
  }
  const double norm = std::sqrt(norm2);
  if (!(norm > 0.0)) fail(ErrorCode::degenerate_homography, "zero homography");
  std::array<double, 9> h{};
  const double sign = m[8] < 0.0 ? -1.0 : 1.0;
  for (std::size_t i = 0; i < 9; ++i) h[i] = sign * m[i] / norm;
  Homography out(h);
  if (!(std::abs(out.determinant()) > kDeterminantEpsilon)) {
    fail(ErrorCode::degenerate_homography,
         "homography is singular (|det| = " + std::to_string(std::abs(out.determinant())) + ")");
  }
  return out;
}

Homography Homography::translation(double dx, double dy) {
  return from_row_major({1, 0, dx, 0, 1, dy, 0, 0, 1});
}

double Homography::determinant() const noexcept {
  const auto& h = h_;
  return h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6]) +
         h[2] * (h[3] * h[7] - h[4] * h[6]);
}

std::optional<Point2> Homography::try_apply(Point2 p) const noexcept {
  const auto& h = h_;
  const double w = h[6] * p.x + h[7] * p.y + h[8];
  if (!(std::abs(w) > kDepthEpsilon)) return std::nullopt;
  return Point2{(h[0] * p.x + h[1] * p.y + h[2]) / w, (h[3] * p.x + h[4] * p.y + h[5]) / w};
}

Point2 Homography::apply(Point2 p) const {
  auto q = try_apply(p);
  if (!q) {
    fail(ErrorCode::degenerate_point,
         "point (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") has zero projective depth");
  }
  return *q;
}

Homography Homography::inverse() const {
  const auto& h = h_;
  // Adjugate; the determinant's scale drops out under normalization.
  std::array<double, 9> adj{
      h[4] * h[8] - h[5] * h[7], h[2] * h[7] - h[1] * h[8], h[1] * h[5] - h[2] * h[4],
      h[5] * h[6] - h[3] * h[8], h[0] * h[8] - h[2] * h[6], h[2] * h[3] - h[0] * h[5],
      h[3] * h[7] - h[4] * h[6], h[1] * h[6] - h[0] * h[7], h[0] * h[4] - h[1] * h[3]};
  if (determinant() < 0.0) {
    for (auto& v : adj) v = -v;
  }
  return from_row_major(adj);
}

Homography chain(const Homography& h_ab, const Homography& h_bc) {
  const Mat3 m = to_eigen(h_bc.row_major()) * to_eigen(h_ab.row_major());
  return Homography::from_row_major(from_eigen(m));
}

double max_entry_difference(const Homography& a, const Homography& b) noexcept {
  double d = 0.0;
  for (std::size_t i = 0; i < 9; ++i) {
    d = std::max(d, std::abs(a.row_major()[i] - b.row_major()[i]));
  }
  return d;
}

double reprojection_error(const Homography& h, const Correspondence& c) noexcept {
  const auto q = h.try_apply(c.p);
  if (!q) return std::numeric_limits<double>::infinity();
  return std::hypot(q->x - c.p_prime.x, q->y - c.p_prime.y);
}

Homography estimate_dlt(std::span<const Correspondence> correspondences) {
  const std::size_t n = correspondences.size();
  if (n < 4) {
    fail(ErrorCode::too_few_correspondences,
         "need at least 4 correspondences, got " + std::to_string(n));
  }
  for (const auto& c : correspondences) {
    if (!std::isfinite(c.p.x) || !std::isfinite(c.p.y) || !std::isfinite(c.p_prime.x) ||
        !std::isfinite(c.p_prime.y)) {
      fail(ErrorCode::invalid_argument, "non-finite correspondence coordinate");
    }
  }
  const Normalizer src = normalize_points(correspondences, false);
  const Normalizer dst = normalize_points(correspondences, true);
  check_configuration(src.points, "source");
  check_configuration(dst.points, "target");

  const Eigen::Index rows = std::max<Eigen::Index>(static_cast<Eigen::Index>(2 * n), 9);
  Eigen::Matrix<double, Eigen::Dynamic, 9> a = Eigen::Matrix<double, Eigen::Dynamic, 9>::Zero(rows, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = src.points[i].x(), y = src.points[i].y();
    const double u = dst.points[i].x(), v = dst.points[i].y();
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << -x, -y, -1, 0, 0, 0, x * u, y * u, u;
    a.row(r + 1) << 0, 0, 0, -x, -y, -1, x * v, y * v, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s(7) <= 1e-10 * s(0)) {
    fail(ErrorCode::degenerate_configuration, "correspondences do not determine a unique homography");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 full = dst.transform.inverse() * hn * src.transform;
  try {
    return Homography::from_row_major(from_eigen(full));
  } catch (const Error& e) {
    fail(ErrorCode::degenerate_configuration, std::string("DLT produced a singular matrix: ") + e.what());
  }
}

void validate(const RansacConfig& cfg) {
  if (!(cfg.inlier_threshold_px > 0.0)) fail(ErrorCode::invalid_argument, "inlier_threshold_px must be > 0");
  if (cfg.max_iterations < 1) fail(ErrorCode::invalid_argument, "max_iterations must be positive");
  if (!(cfg.min_inlier_ratio > 0.0 && cfg.min_inlier_ratio <= 1.0)) {
    fail(ErrorCode::invalid_argument, "min_inlier_ratio must be in (0, 1]");
  }
  if (!(cfg.confidence > 0.0 && cfg.confidence <= 1.0)) {
    fail(ErrorCode::invalid_argument, "confidence must be in (0, 1]");
  }
}

namespace {

struct Score {
  std::size_t inliers = 0;
  double mean_error = std::numeric_limits<double>::infinity();

  bool better_than(const Score& o) const {
    return inliers > o.inliers || (inliers == o.inliers && mean_error < o.mean_error);
  }
};

Score score(const Homography& h, std::span<const Correspondence> c, double thr,
            std::vector<std::size_t>* inliers) {
  Score s;
  double sum = 0.0;
  const double thr2 = thr * thr;
  if (inliers) inliers->clear();
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto q = h.try_apply(c[i].p);
    if (!q) continue;
    const double dx = q->x - c[i].p_prime.x;
    const double dy = q->y - c[i].p_prime.y;
    const double e2 = dx * dx + dy * dy;
    if (e2 <= thr2) {
      ++s.inliers;
      sum += std::sqrt(e2);
      if (inliers) inliers->push_back(i);
    }
  }
  if (s.inliers > 0) s.mean_error = sum / static_cast<double>(s.inliers);
  return s;
}

int adaptive_iterations(double inlier_ratio, double confidence, int cap) {
  if (confidence >= 1.0) return cap;
  if (inlier_ratio >= 1.0) return 1;
  const double miss = 1.0 - std::pow(inlier_ratio, 4.0);
  if (miss <= 0.0) return 1;
  const double needed = std::ceil(std::log(1.0 - confidence) / std::log(miss));
  if (!std::isfinite(needed) || needed >= cap) return cap;
  return std::max(1, static_cast<int>(needed));
}

}  // namespace

RansacResult ransac_estimate(std::span<const Correspondence> correspondences,
                             const RansacConfig& cfg) {
  validate(cfg);
  const std::size_t n = correspondences.size();
  if (n < 4) {
    fail(ErrorCode::too_few_correspondences,
         "need at least 4 correspondences, got " + std::to_string(n));
  }

  Rng rng(cfg.rng_seed);
  std::optional<Homography> best_h;
  Score best;
  std::string last_error;
  int limit = cfg.max_iterations;
  int it = 0;
  std::array<Correspondence, 4> sample;
  for (; it < limit; ++it) {
    std::array<std::size_t, 4> idx{};
    for (std::size_t k = 0; k < 4; ++k) {
      std::size_t v = 0;
      bool dup = true;
      while (dup) {
        v = rng.below(n);
        dup = std::find(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), v) !=
              idx.begin() + static_cast<std::ptrdiff_t>(k);
      }
      idx[k] = v;
      sample[k] = correspondences[v];
    }
    Homography candidate;
    try {
      candidate = estimate_dlt(sample);
    } catch (const Error& e) {
      last_error = e.what();
      continue;
    }
    const Score s = score(candidate, correspondences, cfg.inlier_threshold_px, nullptr);
    if (s.better_than(best)) {
      best = s;
      best_h = candidate;
      const double ratio = static_cast<double>(best.inliers) / static_cast<double>(n);
      limit = std::min(limit, adaptive_iterations(ratio, cfg.confidence, cfg.max_iterations));
    }
  }
  if (!best_h) {
    fail(ErrorCode::degenerate_configuration,
         "every RANSAC sample was degenerate" + (last_error.empty() ? "" : ": " + last_error));
  }
  const double ratio = static_cast<double>(best.inliers) / static_cast<double>(n);
  if (ratio < cfg.min_inlier_ratio) {
    fail(ErrorCode::no_consensus, "best inlier ratio " + std::to_string(ratio) +
                                      " below minimum " + std::to_string(cfg.min_inlier_ratio));
  }

  RansacResult result;
  result.iterations_used = it;
  std::vector<std::size_t> inliers;
  score(*best_h, correspondences, cfg.inlier_threshold_px, &inliers);

  Homography final_h = *best_h;
  std::vector<std::size_t> final_inliers = inliers;
  Score final_score = best;
  try {
    std::vector<Correspondence> subset;
    subset.reserve(inliers.size());
    for (auto i : inliers) subset.push_back(correspondences[i]);
    const Homography refit = estimate_dlt(subset);
    std::vector<std::size_t> refit_inliers;
    const Score rs = score(refit, correspondences, cfg.inlier_threshold_px, &refit_inliers);
    if (rs.inliers >= best.inliers) {
      final_h = refit;
      final_inliers = std::move(refit_inliers);
      final_score = rs;
    }
  } catch (const Error&) {
    // keep the minimal-sample model
  }
  result.homography = final_h;
  result.inlier_indices = std::move(final_inliers);
  result.mean_inlier_error_px = final_score.inliers > 0 ? final_score.mean_error : 0.0;
  return result;
}

BinaryMask warp_mask(const BinaryMask& mask, const Homography& h, Size target_size) {
  const Homography inv = h.inverse();
  BinaryMask out(target_size);
  const Size src = mask.size();
  for (int y = 0; y < target_size.height; ++y) {
    for (int x = 0; x < target_size.width; ++x) {
      const auto s = inv.try_apply({static_cast<double>(x), static_cast<double>(y)});
      if (!s) continue;
      const double fx = std::floor(s->x + 0.5);
      const double fy = std::floor(s->y + 0.5);
      if (fx < 0.0 || fy < 0.0 || fx >= src.width || fy >= src.height) continue;
      if (mask.get(static_cast<int>(fx), static_cast<int>(fy))) out.set(x, y);
    }
  }
  return out;
}

namespace {

constexpr double kSnap = 1e-6;

// Splits a coordinate into base index and fraction, snapping near-integers so
// exact integer lookups need only one neighbour.
void split(double v, int& base, double& frac) {
  double fl = std::floor(v);
  double f = v - fl;
  if (f < kSnap) {
    f = 0.0;
  } else if (f > 1.0 - kSnap) {
    fl += 1.0;
    f = 0.0;
  }
  base = fl < -1e9 ? -1000000000 : (fl > 1e9 ? 1000000000 : static_cast<int>(fl));
  frac = f;
}

}  // namespace

WarpedImage warp_image(const RgbImage& image, const Homography& h, Size target_size) {
  const Homography inv = h.inverse();
  WarpedImage out{RgbImage(target_size), BinaryMask(target_size)};
  const int sw = image.width();
  const int sh = image.height();
  for (int y = 0; y < target_size.height; ++y) {
    for (int x = 0; x < target_size.width; ++x) {
      const auto s = inv.try_apply({static_cast<double>(x), static_cast<double>(y)});
      if (!s) continue;
      int x0 = 0, y0 = 0;
      double fx = 0.0, fy = 0.0;
      split(s->x, x0, fx);
      split(s->y, y0, fy);
      const int x1 = fx > 0.0 ? x0 + 1 : x0;
      const int y1 = fy > 0.0 ? y0 + 1 : y0;
      if (x0 < 0 || y0 < 0 || x1 >= sw || y1 >= sh) continue;
      const auto* p00 = image.pixel(x0, y0);
      const auto* p10 = image.pixel(x1, y0);
      const auto* p01 = image.pixel(x0, y1);
      const auto* p11 = image.pixel(x1, y1);
      const double w00 = (1.0 - fx) * (1.0 - fy);
      const double w10 = fx * (1.0 - fy);
      const double w01 = (1.0 - fx) * fy;
      const double w11 = fx * fy;
      auto* dst = out.image.pixel(x, y);
      for (int c = 0; c < 3; ++c) {
        const double v = w00 * p00[c] + w10 * p10[c] + w01 * p01[c] + w11 * p11[c];
        dst[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
      out.validity.set(x, y);
    }
  }
  return out;
}

}  // namespace homer::geometry
