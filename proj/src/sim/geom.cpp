#include "hns/sim/geom.hpp"

#include <algorithm>

namespace hns {

bool point_in_obb(const Vec2& p, const Obb& box) {
  Vec2 l = box.to_local(p);
  return std::fabs(l.x) <= box.half.x && std::fabs(l.y) <= box.half.y;
}

bool circle_obb_overlap(const Vec2& c, double r, const Obb& box) {
  Vec2 l = box.to_local(c);
  double qx = std::clamp(l.x, -box.half.x, box.half.x);
  double qy = std::clamp(l.y, -box.half.y, box.half.y);
  double dx = l.x - qx, dy = l.y - qy;
  return dx * dx + dy * dy <= r * r;
}

std::optional<Mtv> circle_obb_mtv(const Vec2& c, double r, const Obb& box) {
  Vec2 l = box.to_local(c);
  double qx = std::clamp(l.x, -box.half.x, box.half.x);
  double qy = std::clamp(l.y, -box.half.y, box.half.y);
  if (l.x == qx && l.y == qy) {
    // Center inside the box: exit along the shallower axis.
    double exit_x = box.half.x - std::fabs(l.x);
    double exit_y = box.half.y - std::fabs(l.y);
    Vec2 dir_local;
    double depth;
    if (exit_x <= exit_y) {
      dir_local = {l.x >= 0.0 ? 1.0 : -1.0, 0.0};
      depth = exit_x + r;
    } else {
      dir_local = {0.0, l.y >= 0.0 ? 1.0 : -1.0};
      depth = exit_y + r;
    }
    return Mtv{rotate(dir_local, box.angle), depth};
  }
  double dx = l.x - qx, dy = l.y - qy;
  double d2 = dx * dx + dy * dy;
  if (d2 >= r * r) return std::nullopt;
  double d = std::sqrt(d2);
  Vec2 dir_local = d > 0.0 ? Vec2{dx / d, dy / d} : Vec2{1.0, 0.0};
  return Mtv{rotate(dir_local, box.angle), r - d};
}

std::optional<Mtv> circle_circle_mtv(const Vec2& a, double ra, const Vec2& b, double rb) {
  Vec2 d = b - a;
  double dist2 = d.norm2();
  double rsum = ra + rb;
  if (dist2 >= rsum * rsum) return std::nullopt;
  double dist = std::sqrt(dist2);
  Vec2 dir = dist > 0.0 ? d * (1.0 / dist) : Vec2{1.0, 0.0};
  return Mtv{dir, rsum - dist};
}

std::optional<Mtv> obb_obb_mtv(const Obb& a, const Obb& b) {
  // Separating axes: face normals of both boxes.
  Vec2 ax = rotate({1, 0}, a.angle), ay = rotate({0, 1}, a.angle);
  Vec2 bx = rotate({1, 0}, b.angle), by = rotate({0, 1}, b.angle);
  Vec2 axes[4] = {ax, ay, bx, by};
  Vec2 d = b.center - a.center;
  double best_depth = 1e300;
  Vec2 best_axis;
  for (const Vec2& n : axes) {
    double ra = a.half.x * std::fabs(n.dot(ax)) + a.half.y * std::fabs(n.dot(ay));
    double rb = b.half.x * std::fabs(n.dot(bx)) + b.half.y * std::fabs(n.dot(by));
    double dist = std::fabs(d.dot(n));
    double overlap = ra + rb - dist;
    if (overlap <= 0.0) return std::nullopt;
    if (overlap < best_depth) {
      best_depth = overlap;
      best_axis = d.dot(n) >= 0.0 ? n : n * -1.0;
    }
  }
  return Mtv{best_axis, best_depth};
}

std::optional<double> ray_circle(const Vec2& origin, const Vec2& dir, double max_t, const Vec2& c, double r) {
  Vec2 oc = origin - c;
  if (oc.norm2() <= r * r) return 0.0;
  double b = oc.dot(dir);
  double disc = b * b - (oc.norm2() - r * r);
  if (disc < 0.0) return std::nullopt;
  double t = -b - std::sqrt(disc);
  if (t < 0.0 || t > max_t) return std::nullopt;
  return t;
}

std::optional<double> ray_obb(const Vec2& origin, const Vec2& dir, double max_t, const Obb& box) {
  Vec2 o = box.to_local(origin);
  Vec2 v = rotate(dir, -box.angle);
  if (std::fabs(o.x) <= box.half.x && std::fabs(o.y) <= box.half.y) return 0.0;
  double tmin = 0.0, tmax = max_t;
  for (int axis = 0; axis < 2; ++axis) {
    double oi = axis == 0 ? o.x : o.y;
    double vi = axis == 0 ? v.x : v.y;
    double h = axis == 0 ? box.half.x : box.half.y;
    if (std::fabs(vi) < 1e-12) {
      if (std::fabs(oi) > h) return std::nullopt;
      continue;
    }
    double t1 = (-h - oi) / vi;
    double t2 = (h - oi) / vi;
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return std::nullopt;
  }
  return tmin;
}

}  // namespace hns
