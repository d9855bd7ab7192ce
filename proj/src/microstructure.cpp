#include "rh/microstructure.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "rh/rng.hpp"

namespace rh {

void validate_obstacle(const Obstacle& obstacle) {
  if (const auto* d = std::get_if<DiskObstacle>(&obstacle)) {
    if (!(d->radius > 0.0) || !std::isfinite(d->radius)) throw DomainError("obstacle: disk radius must be positive");
  } else {
    const auto& r = std::get<RectObstacle>(obstacle);
    if (!(r.hi.x > r.lo.x && r.hi.y > r.lo.y)) throw DomainError("obstacle: rectangle needs lo < hi");
  }
}

bool obstacle_contains(const Obstacle& obstacle, Point2 p) {
  if (const auto* d = std::get_if<DiskObstacle>(&obstacle)) return norm(p - d->center) <= d->radius;
  const auto& r = std::get<RectObstacle>(obstacle);
  return p.x >= r.lo.x && p.x <= r.hi.x && p.y >= r.lo.y && p.y <= r.hi.y;
}

bool obstacle_contains_square(const Obstacle& obstacle, Point2 corner, double side) {
  // Both shapes are convex, so the four corners decide.
  const Point2 c[] = {corner, corner + Point2{side, 0.0}, corner + Point2{0.0, side}, corner + Point2{side, side}};
  for (const auto& p : c) {
    if (!obstacle_contains(obstacle, p)) return false;
  }
  return true;
}

double obstacle_area(const Obstacle& obstacle) {
  if (const auto* d = std::get_if<DiskObstacle>(&obstacle)) return kPi * d->radius * d->radius;
  const auto& r = std::get<RectObstacle>(obstacle);
  return (r.hi.x - r.lo.x) * (r.hi.y - r.lo.y);
}

Point2 RodSet::cell_corner(const Rod& rod) const {
  return eta * Point2{static_cast<double>(rod.cell_x) - lattice_shift.x,
                      static_cast<double>(rod.cell_y) - lattice_shift.y};
}

RodSet sample_microstructure(const RodLaw& law, double eta, const Obstacle& obstacle, std::uint64_t seed) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("sample_microstructure: eta must be positive");
  validate_obstacle(obstacle);
  RodSet set;
  set.eta = eta;
  set.obstacle = obstacle;
  set.seed = seed;
  CounterRng shift_rng(seed, kLatticeShiftStream);
  set.lattice_shift.x = shift_rng.uniform();
  set.lattice_shift.y = shift_rng.uniform();

  Point2 lo;
  Point2 hi;
  if (const auto* d = std::get_if<DiskObstacle>(&obstacle)) {
    lo = d->center - Point2{d->radius, d->radius};
    hi = d->center + Point2{d->radius, d->radius};
  } else {
    lo = std::get<RectObstacle>(obstacle).lo;
    hi = std::get<RectObstacle>(obstacle).hi;
  }
  // Cell j spans eta (j - y) .. eta (j - y + 1) in each coordinate.
  const auto jlo_x = static_cast<std::int64_t>(std::floor(lo.x / eta + set.lattice_shift.x));
  const auto jhi_x = static_cast<std::int64_t>(std::ceil(hi.x / eta + set.lattice_shift.x));
  const auto jlo_y = static_cast<std::int64_t>(std::floor(lo.y / eta + set.lattice_shift.y));
  const auto jhi_y = static_cast<std::int64_t>(std::ceil(hi.y / eta + set.lattice_shift.y));
  for (std::int64_t jy = jlo_y; jy <= jhi_y; ++jy) {
    for (std::int64_t jx = jlo_x; jx <= jhi_x; ++jx) {
      const Point2 corner = eta * Point2{static_cast<double>(jx) - set.lattice_shift.x,
                                         static_cast<double>(jy) - set.lattice_shift.y};
      if (!obstacle_contains_square(obstacle, corner, eta)) continue;
      CounterRng rng(seed, cell_stream(jx, jy));
      const Triple t = sample_triple(law, rng);
      Rod rod;
      rod.center = corner + eta * t.center;
      rod.radius = eta * t.radius;
      rod.eps = t.eps;
      rod.cell_x = jx;
      rod.cell_y = jy;
      set.rods.push_back(rod);
    }
  }
  return set;
}

void write_rodset_csv(std::ostream& out, const RodSet& set) {
  out << "x,y,radius,re_eps,im_eps\n";
  char buf[160];
  for (const auto& r : set.rods) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.center.x, r.center.y, r.radius,
                  r.eps.real(), r.eps.imag());
    out << buf;
  }
}

std::string rodset_sidecar_json(const RodSet& set) {
  char buf[256];
  std::string obstacle;
  if (const auto* d = std::get_if<DiskObstacle>(&set.obstacle)) {
    std::snprintf(buf, sizeof buf, R"({"type":"disk","center":[%.17g,%.17g],"radius":%.17g})", d->center.x,
                  d->center.y, d->radius);
  } else {
    const auto& r = std::get<RectObstacle>(set.obstacle);
    std::snprintf(buf, sizeof buf, R"({"type":"rectangle","lo":[%.17g,%.17g],"hi":[%.17g,%.17g]})", r.lo.x, r.lo.y,
                  r.hi.x, r.hi.y);
  }
  obstacle = buf;
  std::snprintf(buf, sizeof buf, R"({"eta":%.17g,"seed":%llu,"obstacle":)", set.eta,
                static_cast<unsigned long long>(set.seed));
  return std::string(buf) + obstacle + "}\n";
}

}  // namespace rh
