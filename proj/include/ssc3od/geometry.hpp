#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <array>
#include <vector>

namespace ssc3od::geom {

/// Normalizes an angle to (-pi, pi].
double normalize_angle(double a);

/// Rigid placement in the world frame: translation plus roll/pitch/yaw
/// (ZYX convention). Planar scenes keep z = roll = pitch = 0, in which
/// case every transform below reduces to SE(2).
struct Pose {
  double x = 0.0, y = 0.0, z = 0.0;
  double roll = 0.0, pitch = 0.0, yaw = 0.0;

  static Pose identity() { return {}; }

  Eigen::Isometry3d isometry() const;
  static Pose from_isometry(const Eigen::Isometry3d& iso);

  Pose inverse() const;
  bool is_finite() const;
  Pose normalized() const;  // angles wrapped to (-pi, pi]
};

/// Composition: the result applies `b` first, then `a`.
Pose pose_compose(const Pose& a, const Pose& b);

/// Oriented bird's-eye-view box. length runs along the heading (yaw),
/// width across it. z_center/height are carried for rendering only and
/// ignored by all BEV geometry.
struct BoxBEV {
  double cx = 0.0, cy = 0.0;
  double length = 1.0, width = 1.0;
  double yaw = 0.0;
  double score = 1.0;
  double z_center = 0.0, height = 0.0;

  double area() const { return length * width; }
  std::array<Eigen::Vector2d, 4> corners() const;
  bool contains(double px, double py) const;
};

// Rows are (x, y, z, intensity).
using PointCloud = Eigen::Matrix<double, Eigen::Dynamic, 4>;

/// Re-expresses points given in the `src` frame in the `dst` frame.
PointCloud transform_points(const Pose& src, const Pose& dst, const PointCloud& pts);

/// Re-expresses a box given in the `src` frame in the `dst` frame.
/// Center moves as a point, yaw follows the heading direction, dimensions
/// and score are untouched.
BoxBEV transform_box(const Pose& src, const Pose& dst, const BoxBEV& box);

/// Intersection-over-union of two oriented BEV boxes via convex polygon
/// clipping. Degenerate boxes (area <= 1e-12) score 0.
double rotated_iou(const BoxBEV& a, const BoxBEV& b);

/// Greedy non-maximum suppression: highest score first, suppress anything
/// with IoU > iou_thr against a retained box. Equal scores keep the lower
/// insertion index. Output is sorted by descending score.
std::vector<BoxBEV> nms(const std::vector<BoxBEV>& dets, double iou_thr);

/// Area of a convex polygon (shoelace).
double polygon_area(const std::vector<Eigen::Vector2d>& poly);

/// Sutherland-Hodgman clip of a convex polygon against another convex
/// polygon given in counter-clockwise order.
std::vector<Eigen::Vector2d> clip_polygon(const std::vector<Eigen::Vector2d>& subject,
                                          const std::vector<Eigen::Vector2d>& clip);

}  // namespace ssc3od::geom
