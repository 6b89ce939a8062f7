#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "constellation/errors.hpp"
#include "constellation/vec3.hpp"

namespace constellation {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kMuKm3PerS2 = 398600.4418;        // Earth gravitational parameter
inline constexpr double kSpeedOfLightKmPerS = 299792.458;

// One circular-orbit parking slot: which plane, where along it.
// Angles in radians, radius in km (orbit radius, not altitude).
struct OrbitalSlot {
  int plane_index = 0;
  int slot_index = 0;
  double inclination_rad = 0.0;
  double raan_rad = 0.0;         // right ascension of ascending node
  double phase_angle_rad = 0.0;  // argument of latitude at epoch
  double radius_km = 0.0;
};

inline double wrap_two_pi(double angle) {
  const double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, two_pi);
  if (a < 0.0) a += two_pi;
  return a;
}

// Evenly spaced Walker-style layout: `planes` planes separated in RAAN,
// num_sats/planes satellites per plane separated in phase. Satellite id
// (plane * per_plane + slot) indexes the returned vector.
inline std::vector<OrbitalSlot> build_constellation_geometry(int num_sats, int planes,
                                                             double inclination_rad,
                                                             double radius_km) {
  if (num_sats < 1) throw ConfigError("build_constellation_geometry: num_sats must be >= 1");
  if (planes < 1) throw ConfigError("build_constellation_geometry: planes must be >= 1");
  if (num_sats % planes != 0)
    throw ConfigError("build_constellation_geometry: num_sats (" + std::to_string(num_sats) +
                      ") not divisible by planes (" + std::to_string(planes) + ")");
  if (radius_km <= kEarthRadiusKm)
    throw ConfigError("build_constellation_geometry: radius_km must exceed Earth radius");

  const int per_plane = num_sats / planes;
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<OrbitalSlot> slots;
  slots.reserve(num_sats);
  for (int p = 0; p < planes; ++p) {
    for (int k = 0; k < per_plane; ++k) {
      OrbitalSlot s;
      s.plane_index = p;
      s.slot_index = k;
      s.inclination_rad = inclination_rad;
      s.raan_rad = two_pi * p / planes;
      s.phase_angle_rad = two_pi * k / per_plane;
      s.radius_km = radius_km;
      slots.push_back(s);
    }
  }
  return slots;
}

// Circular mean motion sqrt(mu/r^3), rad/s.
inline double mean_motion_rad_per_s(double radius_km) {
  if (radius_km <= 0.0) throw std::invalid_argument("mean_motion: radius must be > 0");
  return std::sqrt(kMuKm3PerS2 / (radius_km * radius_km * radius_km));
}

// Inertial position/velocity of a slot advanced by `true_anomaly_offset_rad`
// past its epoch phase. Circular orbit: in-plane position (r cos u, r sin u, 0)
// and velocity sqrt(mu/r)(-sin u, cos u, 0), both rotated by R_z(raan) R_x(incl).
inline std::pair<Vec3, Vec3> slot_to_cartesian(const OrbitalSlot& slot,
                                               double true_anomaly_offset_rad) {
  const double u = slot.phase_angle_rad + true_anomaly_offset_rad;
  const double r = slot.radius_km;
  const double speed = std::sqrt(kMuKm3PerS2 / r);

  const Vec3 pos_pf{r * std::cos(u), r * std::sin(u), 0.0};
  const Vec3 vel_pf{-speed * std::sin(u), speed * std::cos(u), 0.0};

  const double ci = std::cos(slot.inclination_rad), si = std::sin(slot.inclination_rad);
  const double co = std::cos(slot.raan_rad), so = std::sin(slot.raan_rad);
  auto rotate = [&](const Vec3& v) {
    // R_x(inclination) then R_z(raan)
    const Vec3 tilted{v.x, v.y * ci - v.z * si, v.y * si + v.z * ci};
    return Vec3{tilted.x * co - tilted.y * so, tilted.x * so + tilted.y * co, tilted.z};
  };
  return {rotate(pos_pf), rotate(vel_pf)};
}

// One explicit-Euler step: p += v dt, then v += a dt.
inline std::pair<Vec3, Vec3> propagate(const Vec3& position, const Vec3& velocity,
                                       const Vec3& acceleration, double dt_s) {
  if (dt_s < 0.0) throw std::invalid_argument("propagate: dt must be >= 0");
  return {position + velocity * dt_s, velocity + acceleration * dt_s};
}

// One-way light-time for a straight-line path, seconds.
inline double propagation_delay_s(double distance_km) {
  if (distance_km < 0.0) throw std::invalid_argument("propagation_delay: distance must be >= 0");
  return distance_km / kSpeedOfLightKmPerS;
}

}  // namespace constellation
