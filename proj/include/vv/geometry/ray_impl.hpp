#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace vv::geo {

template <typename Visit>
void traverse_ray(const GridDims& dims, const Vec3& origin, const Vec3& direction, double t_min,
                  double t_max, Visit&& visit) {
  const double inf = std::numeric_limits<double>::infinity();
  const double extent[3] = {static_cast<double>(dims.x), static_cast<double>(dims.y),
                            static_cast<double>(dims.z)};
  // Slab clip against [0, extent].
  double t0 = t_min, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    if (direction[a] == 0.0) {
      if (origin[a] < 0.0 || origin[a] >= extent[a]) return;
      continue;
    }
    double ta = (0.0 - origin[a]) / direction[a];
    double tb = (extent[a] - origin[a]) / direction[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return;

  int cell[3], step[3];
  double t_next[3], t_delta[3];
  const double t_probe = t0 + 1e-9 * std::max(1.0, t1 - t0);
  for (int a = 0; a < 3; ++a) {
    const double p = origin[a] + t_probe * direction[a];
    cell[a] = std::clamp(static_cast<int>(std::floor(p)), 0, (a == 0 ? dims.x : a == 1 ? dims.y : dims.z) - 1);
    if (direction[a] > 0.0) {
      step[a] = 1;
      t_delta[a] = 1.0 / direction[a];
      t_next[a] = (cell[a] + 1 - origin[a]) / direction[a];
    } else if (direction[a] < 0.0) {
      step[a] = -1;
      t_delta[a] = -1.0 / direction[a];
      t_next[a] = (cell[a] - origin[a]) / direction[a];
    } else {
      step[a] = 0;
      t_delta[a] = inf;
      t_next[a] = inf;
    }
  }
  double t_enter = t0;
  while (t_enter < t1) {
    int axis = 0;
    if (t_next[1] < t_next[axis]) axis = 1;
    if (t_next[2] < t_next[axis]) axis = 2;
    const double t_exit = std::min(t_next[axis], t1);
    if (t_exit > t_enter) {
      if (!visit(RayCell{cell[0], cell[1], cell[2], t_enter, t_exit})) return;
    }
    t_enter = std::max(t_enter, t_exit);
    cell[axis] += step[axis];
    t_next[axis] += t_delta[axis];
    if (!dims.contains(cell[0], cell[1], cell[2])) return;
  }
}

}  // namespace vv::geo
