#pragma once

#include <cmath>

namespace constellation {

// Cartesian triple in an Earth-centered inertial frame. Kilometers / km-per-second.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm_squared() const { return dot(*this); }
  double norm() const { return std::sqrt(norm_squared()); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double euclidean_distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

}  // namespace constellation
