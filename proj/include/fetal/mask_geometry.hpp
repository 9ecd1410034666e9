#pragma once

#include <optional>
#include <vector>

#include "fetal/domain.hpp"
#include "fetal/mask.hpp"

namespace fetal {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

struct EllipseParams {
  Point2 center;
  double semi_major = 0.0;
  double semi_minor = 0.0;
  // Direction of the major axis, radians in [0, pi).
  double rotation = 0.0;
};

struct EllipseFit {
  EllipseParams ellipse;
  // RMS algebraic distance of the input points, evaluated in the normalized
  // frame (centroid at origin, unit RMS radius) with the conic scaled so
  // that 4AC - B^2 = 1.
  double residual = 0.0;
};

struct AoPInputs {
  Mask symphysis;
  Mask head;
};

// Largest 4-connected foreground component. Ties go to the component whose
// first pixel comes earliest in row-major order.
Mask largest_component(const Mask& m);

// Foreground pixels with a 4-neighbour that is background or off-image,
// in row-major order. Throws GeometryError on an empty mask.
std::vector<Point2> boundary_points(const Mask& m);

// Midpoints of the pixel edges separating foreground from background or
// the image border, in row-major pixel order (top, left, right, bottom).
// Throws GeometryError on an empty mask.
std::vector<Point2> edge_midpoints(const Mask& m);

// Direct least-squares ellipse fit (numerically stable variant of the
// constrained 4AC - B^2 = 1 formulation). Throws FitError for fewer than six
// points or a degenerate scatter.
EllipseFit fit_ellipse(const std::vector<Point2>& points);

// Ramanujan's second approximation of the ellipse perimeter, in pixels.
double ellipse_perimeter(double semi_major, double semi_minor);

// Perimeter scaled by pixel spacing into a millimetre BiometryValue.
BiometryValue circumference(const EllipseParams& e, double spacing_mm, Measure measure);

// largest_component -> edge_midpoints -> fit_ellipse -> circumference.
// Without spacing the value is reported in pixels.
BiometryValue measure_hc_ac(const Mask& m, std::optional<double> spacing_mm, Measure measure);

struct AoPGeometry {
  double angle_deg = 0.0;
  Point2 inferior_endpoint;
  Point2 tangent_point;
  Point2 axis_direction;
};

// Angle of progression in degrees between the outward symphysis long axis at
// its inferior endpoint and the tangent from that endpoint to the head.
AoPGeometry aop_geometry(const AoPInputs& in);
BiometryValue compute_aop(const AoPInputs& in);

// Convex hull (counter-clockwise, no collinear points) of a point set.
std::vector<Point2> convex_hull(std::vector<Point2> pts);

}  // namespace fetal
