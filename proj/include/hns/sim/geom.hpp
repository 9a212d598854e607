#pragma once

#include <cmath>
#include <optional>

namespace hns {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm2()); }
};

inline Vec2 rotate(const Vec2& v, double angle) {
  double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

// Oriented rectangle: center, half extents, rotation.
struct Obb {
  Vec2 center;
  Vec2 half;
  double angle = 0.0;

  Vec2 to_local(const Vec2& p) const { return rotate(p - center, -angle); }
  Vec2 to_world(const Vec2& p) const { return rotate(p, angle) + center; }
};

// Minimum translation to separate two overlapping shapes: push `dir * depth`
// applied to the second shape (or the circle) moves it out of contact.
struct Mtv {
  Vec2 dir;  // unit
  double depth = 0.0;
};

bool point_in_obb(const Vec2& p, const Obb& box);
bool circle_obb_overlap(const Vec2& c, double r, const Obb& box);
// MTV pushing the circle out of the box.
std::optional<Mtv> circle_obb_mtv(const Vec2& c, double r, const Obb& box);
// MTV pushing circle b out of circle a.
std::optional<Mtv> circle_circle_mtv(const Vec2& a, double ra, const Vec2& b, double rb);
// MTV pushing box b out of box a (separating-axis test over both frames).
std::optional<Mtv> obb_obb_mtv(const Obb& a, const Obb& b);

// Ray origin + t*dir for t in [0, max_t]; dir must be unit length.
// Origin inside the shape reports t = 0.
std::optional<double> ray_circle(const Vec2& origin, const Vec2& dir, double max_t, const Vec2& c, double r);
std::optional<double> ray_obb(const Vec2& origin, const Vec2& dir, double max_t, const Obb& box);

}  // namespace hns
