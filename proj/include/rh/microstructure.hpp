#pragma once

// Finite random rod configurations: one uniform lattice shift y per draw and
// i.i.d. triples on the cells eta (j - y + Y) contained in the obstacle.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "rh/laws.hpp"

namespace rh {

struct DiskObstacle {
  Point2 center{0.0, 0.0};
  double radius = 1.0;
};

struct RectObstacle {
  Point2 lo{0.0, 0.0};
  Point2 hi{1.0, 1.0};
};

using Obstacle = std::variant<DiskObstacle, RectObstacle>;

void validate_obstacle(const Obstacle& obstacle);
bool obstacle_contains(const Obstacle& obstacle, Point2 p);
// Closed axis-aligned square [corner, corner + side]^2 inside the obstacle.
bool obstacle_contains_square(const Obstacle& obstacle, Point2 corner, double side);
double obstacle_area(const Obstacle& obstacle);

struct Rod {
  Point2 center;
  double radius = 0.0;  // already scaled by eta
  cplx eps;
  std::int64_t cell_x = 0;
  std::int64_t cell_y = 0;
};

struct RodSet {
  double eta = 0.0;
  Obstacle obstacle;
  std::vector<Rod> rods;
  std::uint64_t seed = 0;
  Point2 lattice_shift;

  // Lower-left corner of the generating cell of a rod.
  Point2 cell_corner(const Rod& rod) const;
};

// Returns an empty set (not an error) when no cell fits.
RodSet sample_microstructure(const RodLaw& law, double eta, const Obstacle& obstacle, std::uint64_t seed);

// CSV `x,y,radius,re_eps,im_eps` with full precision, one row per rod.
void write_rodset_csv(std::ostream& out, const RodSet& set);
// `{eta, seed, obstacle}` sidecar.
std::string rodset_sidecar_json(const RodSet& set);

}  // namespace rh
