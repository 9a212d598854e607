#include "hns/env/layout.hpp"

#include <algorithm>
#include <stdexcept>

namespace hns::env {

Vec2 Rect::sample(Rng& rng, double margin) const {
  return {rng.uniform(x0 + margin, x1 - margin),
          rng.uniform(y0 + margin, y1 - margin)};
}

std::vector<WallPiece> exterior_walls(double bounds) {
  double h = bounds / 2.0;
  double t = kWallHalfThickness;
  double span = h + 2.0 * t;  // long enough to close the corners
  return {
      {{0.0, h + t}, {span, t}},
      {{0.0, -h - t}, {span, t}},
      {{h + t, 0.0}, {t, span}},
      {{-h - t, 0.0}, {t, span}},
  };
}

namespace {

// Appends the slabs of a straight wall running from lo to hi at the fixed
// coordinate, with [gap_lo, gap_hi] cut out. Degenerate slabs are dropped.
void add_wall_with_gap(std::vector<WallPiece>& out, bool vertical, double fixed,
                       double lo, double hi, double gap_lo, double gap_hi) {
  auto piece = [&](double a, double b) {
    if (b - a < 1e-6) return;
    double mid = (a + b) / 2.0, half = (b - a) / 2.0;
    if (vertical)
      out.push_back({{fixed, mid}, {kWallHalfThickness, half}});
    else
      out.push_back({{mid, fixed}, {half, kWallHalfThickness}});
  };
  piece(lo, gap_lo);
  piece(gap_hi, hi);
}

}  // namespace

RoomLayout make_rooms(double bounds, int n_rooms, bool exterior, bool with_doors,
                      Rng& rng) {
  double h = bounds / 2.0;
  RoomLayout lay;
  lay.exterior = exterior;
  if (exterior) lay.walls = exterior_walls(bounds);
  lay.rooms = {{-h, -h, h, h}};
  const double min_side = 3.0;  // keeps every cell usable and door-sized
  while ((int)lay.rooms.size() < n_rooms) {
    int best = -1;
    double best_area = 0.0;
    for (int i = 0; i < (int)lay.rooms.size(); ++i) {
      const Rect& r = lay.rooms[i];
      if (std::max(r.width(), r.height()) < 2.0 * min_side) continue;
      if (r.area() > best_area) {
        best_area = r.area();
        best = i;
      }
    }
    if (best < 0)
      throw std::runtime_error("make_rooms: cells too small for room count");
    Rect r = lay.rooms[best];
    bool vertical = r.width() >= r.height();  // cut across the longer axis
    double lo = vertical ? r.x0 : r.y0;
    double hi = vertical ? r.x1 : r.y1;
    double cut = rng.uniform(lo + min_side, hi - min_side);
    double seg_lo = vertical ? r.y0 : r.x0;
    double seg_hi = vertical ? r.y1 : r.x1;
    if (with_doors) {
      double margin = kDoorWidth / 2.0 + 0.5;
      double door = rng.uniform(seg_lo + margin, seg_hi - margin);
      add_wall_with_gap(lay.walls, vertical, cut, seg_lo, seg_hi,
                        door - kDoorWidth / 2.0, door + kDoorWidth / 2.0);
      lay.doors.push_back(vertical ? Vec2{cut, door} : Vec2{door, cut});
    } else {
      add_wall_with_gap(lay.walls, vertical, cut, seg_lo, seg_hi, seg_hi, seg_hi);
    }
    Rect a = r, b = r;
    if (vertical) {
      a.x1 = cut;
      b.x0 = cut;
    } else {
      a.y1 = cut;
      b.y0 = cut;
    }
    lay.rooms[best] = a;
    lay.rooms.push_back(b);
  }
  return lay;
}

RoomLayout make_quadrant(double bounds, Rng& rng) {
  double h = bounds / 2.0;
  RoomLayout lay;
  lay.exterior = true;
  lay.walls = exterior_walls(bounds);
  Rect room{0.0, -h, h, 0.0};
  Rect left{-h, -h, 0.0, h};
  Rect upper_right{0.0, 0.0, h, h};
  lay.rooms = {room, left, upper_right};
  double margin = kDoorWidth / 2.0 + 0.5;
  int n_doors = rng.randint(1, 2);
  bool door_top = n_doors == 2 || rng.chance(0.5);
  bool door_left = n_doors == 2 || !door_top;
  if (door_top) {
    double d = rng.uniform(margin, h - margin);
    add_wall_with_gap(lay.walls, false, 0.0, 0.0, h, d - kDoorWidth / 2.0,
                      d + kDoorWidth / 2.0);
    lay.doors.push_back({d, 0.0});
  } else {
    add_wall_with_gap(lay.walls, false, 0.0, 0.0, h, h, h);
  }
  if (door_left) {
    double d = rng.uniform(-h + margin, 0.0 - margin);
    add_wall_with_gap(lay.walls, true, 0.0, -h, 0.0, d - kDoorWidth / 2.0,
                      d + kDoorWidth / 2.0);
    lay.doors.push_back({0.0, d});
  } else {
    add_wall_with_gap(lay.walls, true, 0.0, -h, 0.0, 0.0, 0.0);
  }
  lay.spawn.boxes = {room};
  lay.spawn.seekers = {left, upper_right};
  return lay;
}

}  // namespace hns::env
