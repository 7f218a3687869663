#include "ssc3od/geometry.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ssc3od::geom {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kAreaEps = 1e-12;  // intersections below this count as 0
}  // namespace

double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

Eigen::Isometry3d Pose::isometry() const {
  Eigen::Isometry3d iso = Eigen::Isometry3d::Identity();
  iso.linear() = (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                  Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                  Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
                     .toRotationMatrix();
  iso.translation() = Eigen::Vector3d(x, y, z);
  return iso;
}

Pose Pose::from_isometry(const Eigen::Isometry3d& iso) {
  Pose p;
  p.x = iso.translation().x();
  p.y = iso.translation().y();
  p.z = iso.translation().z();
  const Eigen::Matrix3d& r = iso.rotation();
  // ZYX Euler extraction; gimbal-safe enough for the near-planar poses here.
  p.pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  if (std::abs(r(2, 0)) < 1.0 - 1e-12) {
    p.yaw = std::atan2(r(1, 0), r(0, 0));
    p.roll = std::atan2(r(2, 1), r(2, 2));
  } else {
    p.yaw = std::atan2(-r(0, 1), r(1, 1));
    p.roll = 0.0;
  }
  return p.normalized();
}

Pose Pose::inverse() const { return from_isometry(isometry().inverse()); }

bool Pose::is_finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) &&
         std::isfinite(roll) && std::isfinite(pitch) && std::isfinite(yaw);
}

Pose Pose::normalized() const {
  Pose p = *this;
  p.roll = normalize_angle(p.roll);
  p.pitch = normalize_angle(p.pitch);
  p.yaw = normalize_angle(p.yaw);
  return p;
}

Pose pose_compose(const Pose& a, const Pose& b) {
  return Pose::from_isometry(a.isometry() * b.isometry());
}

std::array<Eigen::Vector2d, 4> BoxBEV::corners() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double hl = 0.5 * length, hw = 0.5 * width;
  // counter-clockwise for positive area
  const std::array<Eigen::Vector2d, 4> local = {
      Eigen::Vector2d(hl, hw), Eigen::Vector2d(-hl, hw),
      Eigen::Vector2d(-hl, -hw), Eigen::Vector2d(hl, -hw)};
  std::array<Eigen::Vector2d, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[static_cast<std::size_t>(i)] =
        Eigen::Vector2d(cx + c * local[static_cast<std::size_t>(i)].x() -
                            s * local[static_cast<std::size_t>(i)].y(),
                        cy + s * local[static_cast<std::size_t>(i)].x() +
                            c * local[static_cast<std::size_t>(i)].y());
  }
  return out;
}

bool BoxBEV::contains(double px, double py) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double dx = px - cx, dy = py - cy;
  const double u = c * dx + s * dy;   // along heading
  const double v = -s * dx + c * dy;  // across
  return std::abs(u) <= 0.5 * length && std::abs(v) <= 0.5 * width;
}

PointCloud transform_points(const Pose& src, const Pose& dst, const PointCloud& pts) {
  const Eigen::Isometry3d rel = dst.isometry().inverse() * src.isometry();
  PointCloud out = pts;
  if (pts.rows() == 0) return out;
  out.leftCols<3>() =
      (pts.leftCols<3>() * rel.rotation().transpose()).rowwise() +
      rel.translation().transpose();
  return out;
}

BoxBEV transform_box(const Pose& src, const Pose& dst, const BoxBEV& box) {
  const Eigen::Isometry3d rel = dst.isometry().inverse() * src.isometry();
  BoxBEV out = box;
  const Eigen::Vector3d center =
      rel * Eigen::Vector3d(box.cx, box.cy, box.z_center);
  out.cx = center.x();
  out.cy = center.y();
  out.z_center = center.z();
  // yaw follows the rotated heading direction; exact under planar motion
  const Eigen::Vector3d heading =
      rel.rotation() * Eigen::Vector3d(std::cos(box.yaw), std::sin(box.yaw), 0.0);
  out.yaw = std::atan2(heading.y(), heading.x());
  return out;
}

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(twice);
}

std::vector<Eigen::Vector2d> clip_polygon(const std::vector<Eigen::Vector2d>& subject,
                                          const std::vector<Eigen::Vector2d>& clip) {
  std::vector<Eigen::Vector2d> output = subject;
  for (std::size_t i = 0; i < clip.size(); ++i) {
    if (output.empty()) break;
    const Eigen::Vector2d a = clip[i];
    const Eigen::Vector2d b = clip[(i + 1) % clip.size()];
    const Eigen::Vector2d edge = b - a;
    const std::vector<Eigen::Vector2d> input = std::move(output);
    output.clear();
    auto inside = [&](const Eigen::Vector2d& p) {
      return edge.x() * (p.y() - a.y()) - edge.y() * (p.x() - a.x()) >= 0.0;
    };
    auto intersect = [&](const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
      const Eigen::Vector2d d = q - p;
      const double denom = edge.x() * d.y() - edge.y() * d.x();
      const double t =
          (edge.x() * (a.y() - p.y()) - edge.y() * (a.x() - p.x())) / denom;
      return Eigen::Vector2d(p + t * d);
    };
    for (std::size_t j = 0; j < input.size(); ++j) {
      const Eigen::Vector2d& cur = input[j];
      const Eigen::Vector2d& prev = input[(j + input.size() - 1) % input.size()];
      const bool cur_in = inside(cur);
      const bool prev_in = inside(prev);
      if (cur_in) {
        if (!prev_in) output.push_back(intersect(prev, cur));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(intersect(prev, cur));
      }
    }
  }
  return output;
}

double rotated_iou(const BoxBEV& a, const BoxBEV& b) {
  const double area_a = a.area();
  const double area_b = b.area();
  if (area_a <= kAreaEps || area_b <= kAreaEps) return 0.0;

  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::vector<Eigen::Vector2d> pa(ca.begin(), ca.end());
  const std::vector<Eigen::Vector2d> pb(cb.begin(), cb.end());
  double inter = polygon_area(clip_polygon(pa, pb));
  if (inter <= kAreaEps) return 0.0;
  const double uni = area_a + area_b - inter;
  if (inter > uni) inter = uni;  // guard fp overshoot on identical boxes
  return inter / uni;
}

std::vector<BoxBEV> nms(const std::vector<BoxBEV>& dets, double iou_thr) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return dets[i].score > dets[j].score;
  });
  std::vector<BoxBEV> kept;
  for (const std::size_t i : order) {
    bool suppressed = false;
    for (const BoxBEV& k : kept) {
      if (rotated_iou(dets[i], k) > iou_thr) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(dets[i]);
  }
  return kept;
}

}  // namespace ssc3od::geom
