#include "fetal/mask_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "fetal/errors.hpp"

namespace fetal {

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    // Keep the smaller index as root so roots follow row-major order.
    if (a < b) parent_[b] = a;
    else if (b < a) parent_[a] = b;
  }

 private:
  std::vector<std::size_t> parent_;
};

double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
Point2 operator-(const Point2& a, const Point2& b) { return {a.x - b.x, a.y - b.y}; }
double norm(const Point2& a) { return std::hypot(a.x, a.y); }

struct Moments {
  Point2 centroid;
  Eigen::Matrix2d covariance;
  std::uint64_t count = 0;
};

Moments pixel_moments(const Mask& m) {
  Moments mo;
  double sx = 0, sy = 0;
  for (const auto& seg : m.row_segments()) {
    const double n = seg.x_end - seg.x_begin;
    // Sum of x over [x_begin, x_end).
    sx += n * (seg.x_begin + seg.x_end - 1) / 2.0;
    sy += n * seg.y;
    mo.count += seg.x_end - seg.x_begin;
  }
  if (mo.count == 0) return mo;
  const double n = static_cast<double>(mo.count);
  mo.centroid = {sx / n, sy / n};
  double cxx = 0, cxy = 0, cyy = 0;
  for (const auto& seg : m.row_segments()) {
    const double dy = seg.y - mo.centroid.y;
    for (std::uint32_t x = seg.x_begin; x < seg.x_end; ++x) {
      const double dx = x - mo.centroid.x;
      cxx += dx * dx;
      cxy += dx * dy;
      cyy += dy * dy;
    }
  }
  mo.covariance << cxx / n, cxy / n, cxy / n, cyy / n;
  return mo;
}

}  // namespace

Mask largest_component(const Mask& m) {
  if (m.empty()) return m;
  const auto segs = m.row_segments();
  DisjointSet sets(segs.size());
  // [begin, end) index ranges of segments sharing a row, in row order.
  std::vector<std::pair<std::size_t, std::size_t>> rows;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (i == 0 || segs[i].y != segs[i - 1].y) rows.emplace_back(i, i);
    rows.back().second = i + 1;
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    auto [i, i_end] = rows[r - 1];
    auto [j, j_end] = rows[r];
    if (segs[i].y + 1 != segs[j].y) continue;
    while (i < i_end && j < j_end) {
      if (segs[i].x_begin < segs[j].x_end && segs[j].x_begin < segs[i].x_end) sets.unite(i, j);
      if (segs[i].x_end < segs[j].x_end) ++i;
      else ++j;
    }
  }
  std::vector<std::uint64_t> area(segs.size(), 0);
  for (std::size_t i = 0; i < segs.size(); ++i) area[sets.find(i)] += segs[i].x_end - segs[i].x_begin;
  std::size_t best = 0;
  for (std::size_t i = 1; i < segs.size(); ++i)
    if (area[i] > area[best]) best = i;

  std::vector<Mask::Run> runs;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (sets.find(i) != best) continue;
    const std::uint64_t start = std::uint64_t{segs[i].y} * m.width() + segs[i].x_begin;
    const std::uint64_t len = segs[i].x_end - segs[i].x_begin;
    if (!runs.empty() && runs.back().start + runs.back().length == start) runs.back().length += len;
    else runs.push_back({start, len});
  }
  return Mask::from_runs(m.width(), m.height(), std::move(runs));
}

std::vector<Point2> boundary_points(const Mask& m) {
  if (m.empty()) throw GeometryError("boundary of an empty mask");
  const Raster r = m.to_raster();
  std::vector<Point2> out;
  for (const auto& seg : m.row_segments()) {
    const std::uint32_t y = seg.y;
    for (std::uint32_t x = seg.x_begin; x < seg.x_end; ++x) {
      const bool edge = x == 0 || y == 0 || x + 1 == r.width || y + 1 == r.height || !r.at(x - 1, y) ||
                        !r.at(x + 1, y) || !r.at(x, y - 1) || !r.at(x, y + 1);
      if (edge) out.push_back({static_cast<double>(x), static_cast<double>(y)});
    }
  }
  return out;
}

std::vector<Point2> edge_midpoints(const Mask& m) {
  if (m.empty()) throw GeometryError("contour of an empty mask");
  const Raster r = m.to_raster();
  std::vector<Point2> out;
  for (const auto& seg : m.row_segments()) {
    const std::uint32_t y = seg.y;
    const double fy = y;
    for (std::uint32_t x = seg.x_begin; x < seg.x_end; ++x) {
      const double fx = x;
      if (y == 0 || !r.at(x, y - 1)) out.push_back({fx, fy - 0.5});
      if (x == 0 || !r.at(x - 1, y)) out.push_back({fx - 0.5, fy});
      if (x + 1 == r.width || !r.at(x + 1, y)) out.push_back({fx + 0.5, fy});
      if (y + 1 == r.height || !r.at(x, y + 1)) out.push_back({fx, fy + 0.5});
    }
  }
  return out;
}

EllipseFit fit_ellipse(const std::vector<Point2>& points) {
  if (points.size() < 6) throw FitError("ellipse fit needs at least 6 points, got " + std::to_string(points.size()));

  const double n = static_cast<double>(points.size());
  double mx = 0, my = 0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= n;
  my /= n;
  double spread = 0;
  for (const auto& p : points) spread += (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
  const double scale = std::sqrt(spread / n);
  if (!(scale > 0)) throw FitError("degenerate point scatter");

  Eigen::MatrixXd d1(points.size(), 3), d2(points.size(), 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double u = (points[i].x - mx) / scale;
    const double v = (points[i].y - my) / scale;
    d1.row(static_cast<Eigen::Index>(i)) << u * u, u * v, v * v;
    d2.row(static_cast<Eigen::Index>(i)) << u, v, 1.0;
  }
  const Eigen::Matrix3d s1 = d1.transpose() * d1;
  const Eigen::Matrix3d s2 = d1.transpose() * d2;
  const Eigen::Matrix3d s3 = d2.transpose() * d2;

  Eigen::FullPivLU<Eigen::Matrix3d> lu(s3);
  lu.setThreshold(1e-10);
  if (lu.rank() < 3) throw FitError("collinear or degenerate point scatter");

  const Eigen::Matrix3d t = -lu.solve(s2.transpose());
  const Eigen::Matrix3d reduced = s1 + s2 * t;
  // Premultiply by the inverse of the constraint block [[0,0,2],[0,-1,0],[2,0,0]].
  Eigen::Matrix3d m;
  m.row(0) = reduced.row(2) / 2.0;
  m.row(1) = -reduced.row(1);
  m.row(2) = reduced.row(0) / 2.0;

  Eigen::EigenSolver<Eigen::Matrix3d> es(m);
  int chosen = -1;
  double best_eval = 0;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d v = es.eigenvectors().col(k).real();
    const double c = 4.0 * v(0) * v(2) - v(1) * v(1);
    if (!(c > 0)) continue;
    const double ev = std::abs(es.eigenvalues()(k).real());
    if (chosen < 0 || ev < best_eval) {
      chosen = k;
      best_eval = ev;
    }
  }
  if (chosen < 0) throw FitError("no elliptical solution for the point scatter");

  Eigen::Vector3d a1 = es.eigenvectors().col(chosen).real();
  Eigen::Vector3d a2 = t * a1;
  const double k = 1.0 / std::sqrt(4.0 * a1(0) * a1(2) - a1(1) * a1(1));
  a1 *= k;
  a2 *= k;
  const double A = a1(0), B = a1(1), C = a1(2), D = a2(0), E = a2(1), F = a2(2);

  double sq = 0;
  for (Eigen::Index i = 0; i < d1.rows(); ++i) {
    const double r = d1.row(i).dot(a1) + d2.row(i).dot(a2);
    sq += r * r;
  }

  Eigen::Matrix2d quad;
  quad << A, B / 2.0, B / 2.0, C;
  const Eigen::Vector2d c = quad.ldlt().solve(Eigen::Vector2d(-D / 2.0, -E / 2.0));
  const double f0 = F + 0.5 * (D * c(0) + E * c(1));

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> qs(quad);
  double l1 = qs.eigenvalues()(0), l2 = qs.eigenvalues()(1);
  Eigen::Vector2d major = qs.eigenvectors().col(0);
  double g = f0;
  if (l1 < 0) {
    // Normalize the conic sign so the quadratic form is positive definite.
    l1 = -qs.eigenvalues()(1);
    l2 = -qs.eigenvalues()(0);
    major = qs.eigenvectors().col(1);
    g = -f0;
  }
  if (!(l1 > 0) || !(g < 0)) throw FitError("fitted conic is not a real ellipse");

  EllipseFit fit;
  fit.ellipse.center = {mx + scale * c(0), my + scale * c(1)};
  fit.ellipse.semi_major = scale * std::sqrt(-g / l1);
  fit.ellipse.semi_minor = scale * std::sqrt(-g / l2);
  double theta = 0.0;
  if ((l2 - l1) > 1e-12 * l2) {
    theta = std::atan2(major(1), major(0));
    if (theta < 0) theta += std::numbers::pi;
    if (theta >= std::numbers::pi) theta -= std::numbers::pi;
  }
  fit.ellipse.rotation = theta;
  fit.residual = std::sqrt(sq / n);
  return fit;
}

double ellipse_perimeter(double a, double b) {
  const double h = ((a - b) / (a + b)) * ((a - b) / (a + b));
  return std::numbers::pi * (a + b) * (1.0 + 3.0 * h / (10.0 + std::sqrt(4.0 - 3.0 * h)));
}

BiometryValue circumference(const EllipseParams& e, double spacing_mm, Measure measure) {
  if (!(spacing_mm > 0)) throw ValidationError("pixel spacing must be positive");
  if (!(e.semi_major >= e.semi_minor && e.semi_minor > 0)) throw ValidationError("ellipse axes must satisfy a >= b > 0");
  BiometryValue v;
  v.measure = measure;
  v.value = ellipse_perimeter(e.semi_major, e.semi_minor) * spacing_mm;
  v.unit = Unit::Millimeters;
  v.method = "ellipse_fit";
  v.confidence = 1.0;
  return v;
}

BiometryValue measure_hc_ac(const Mask& m, std::optional<double> spacing_mm, Measure measure) {
  if (measure != Measure::HC && measure != Measure::AC) throw ValidationError("circumference measure must be HC or AC");
  if (m.empty()) throw GeometryError("cannot measure an empty mask");
  const EllipseFit fit = fit_ellipse(edge_midpoints(largest_component(m)));
  BiometryValue v;
  if (spacing_mm) {
    v = circumference(fit.ellipse, *spacing_mm, measure);
  } else {
    v.measure = measure;
    v.value = ellipse_perimeter(fit.ellipse.semi_major, fit.ellipse.semi_minor);
    v.unit = Unit::Pixels;
    v.method = "ellipse_fit";
  }
  v.confidence = 1.0 / (1.0 + fit.residual);
  return v;
}

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

AoPGeometry aop_geometry(const AoPInputs& in) {
  if (in.symphysis.empty()) throw GeometryError("symphysis mask is empty");
  if (in.head.empty()) throw GeometryError("head mask is empty");
  if (!in.symphysis.same_dims(in.head)) throw DimensionError("AoP masks must share dimensions");
  const std::uint64_t overlap = mask_intersection(in.symphysis, in.head).area();
  const std::uint64_t smaller = std::min(in.symphysis.area(), in.head.area());
  if (overlap * 20 >= smaller && overlap > 0) throw GeometryError("symphysis and head masks overlap by 5% or more");

  const Moments sym = pixel_moments(in.symphysis);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym.covariance);
  const double lmin = es.eigenvalues()(0), lmax = es.eigenvalues()(1);
  if (!(lmax > 0) || lmax - lmin <= 1e-12 * lmax) throw GeometryError("symphysis has no dominant long axis");
  const Point2 axis{es.eigenvectors()(0, 1), es.eigenvectors()(1, 1)};

  double tmin = 0, tmax = 0;
  bool first = true;
  for (const auto& seg : in.symphysis.row_segments()) {
    for (std::uint32_t x = seg.x_begin; x < seg.x_end; ++x) {
      const double t = dot(Point2{double(x), double(seg.y)} - sym.centroid, axis);
      if (first || t < tmin) tmin = t;
      if (first || t > tmax) tmax = t;
      first = false;
    }
  }
  const Point2 lo{sym.centroid.x + tmin * axis.x, sym.centroid.y + tmin * axis.y};
  const Point2 hi{sym.centroid.x + tmax * axis.x, sym.centroid.y + tmax * axis.y};

  const Point2 head_centroid = pixel_moments(in.head).centroid;
  const bool hi_nearer = norm(head_centroid - hi) < norm(head_centroid - lo);
  const Point2 endpoint = hi_nearer ? hi : lo;
  const Point2 outward = hi_nearer ? axis : Point2{-axis.x, -axis.y};

  const Point2 to_head = head_centroid - endpoint;
  const double dist = norm(to_head);
  if (dist < 1e-9) throw GeometryError("head centroid coincides with the symphysis endpoint");
  double side = cross(outward, to_head);
  if (std::abs(side) < 1e-9 * dist) side = 0.0;

  const auto hull = convex_hull(boundary_points(in.head));
  AoPGeometry g;
  g.inferior_endpoint = endpoint;
  g.axis_direction = outward;
  bool found = false;
  for (const auto& p : hull) {
    const Point2 w = p - endpoint;
    if (norm(w) < 1e-12) continue;
    const double c = cross(outward, w);
    if (side > 0 && c < 0) continue;
    if (side < 0 && c > 0) continue;
    const double angle = std::atan2(std::abs(c), dot(outward, w));
    if (!found || angle > g.angle_deg) {
      g.angle_deg = angle;
      g.tangent_point = p;
      found = true;
    }
  }
  if (!found) throw GeometryError("no head contour point on the advancing side");
  g.angle_deg *= 180.0 / std::numbers::pi;
  if (!(g.angle_deg > 0.0 && g.angle_deg < 180.0)) throw GeometryError("degenerate angle of progression");
  return g;
}

BiometryValue compute_aop(const AoPInputs& in) {
  const AoPGeometry g = aop_geometry(in);
  BiometryValue v;
  v.measure = Measure::AoP;
  v.value = g.angle_deg;
  v.unit = Unit::Degrees;
  v.method = "symphysis_head_tangent";
  v.confidence = 1.0;
  return v;
}

}  // namespace fetal
