#pragma once

#include <vector>

#include "hns/common/rng.hpp"
#include "hns/sim/geom.hpp"

namespace hns::env {

// Axis-aligned region used for partition cells and spawn sampling.
struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  Vec2 center() const { return {(x0 + x1) * 0.5, (y0 + y1) * 0.5}; }
  bool contains(const Vec2& p, double margin = 0.0) const {
    return p.x >= x0 + margin && p.x <= x1 - margin && p.y >= y0 + margin &&
           p.y <= y1 - margin;
  }
  Vec2 sample(Rng& rng, double margin = 0.0) const;
};

// Thin axis-aligned slab, instantiated as an immovable wall body.
struct WallPiece {
  Vec2 center;
  Vec2 half;
};

// Spawn regions per body role; an empty list means the whole interior.
struct SpawnRegions {
  std::vector<Rect> hiders, seekers, boxes, ramps, pellets;
};

struct RoomLayout {
  std::vector<WallPiece> walls;  // exterior and interior slabs, door gaps cut
  std::vector<Rect> rooms;       // partition cells (wall-free interiors)
  std::vector<Vec2> doors;       // door gap centers
  SpawnRegions spawn;
  bool exterior = true;
};

inline constexpr double kWallHalfThickness = 0.15;
inline constexpr double kDoorWidth = 1.5;

// Four slabs whose inner faces lie on the +-bounds/2 square.
std::vector<WallPiece> exterior_walls(double bounds);

// Recursive binary partition into n_rooms cells. Every partition wall gets one
// door unless with_doors is false; doors form a tree over the cells, so with
// doors every room stays reachable from every other at ground level.
RoomLayout make_rooms(double bounds, int n_rooms, bool exterior, bool with_doors,
                      Rng& rng);

// Fixed room covering the lower-right quadrant, connected to the rest of the
// arena by 1 or 2 doors at random positions. rooms[0] is the quadrant room,
// rooms[1..2] cover the outside.
RoomLayout make_quadrant(double bounds, Rng& rng);

}  // namespace hns::env
