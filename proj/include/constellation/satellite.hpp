#pragma once

#include <vector>

#include "constellation/orbital.hpp"
#include "constellation/vec3.hpp"

namespace constellation {

enum class SatStatus { Operational, Failed };

// Downlink band the payload transmits on. Stored metadata; does not affect dynamics.
enum class FrequencyBand { L1, L2, L5 };

enum class Modulation { BPSK, QPSK };

// Full per-satellite state carried by the environment.
struct SatelliteState {
  int id = 0;
  Vec3 position;            // km, inertial
  Vec3 velocity;            // km/s
  SatStatus status = SatStatus::Operational;
  double energy = 0.0;      // abstract energy units, floor 0
  double task_load = 0.0;   // queued task units
  double capacity = 0.0;    // max queued task units
  double reliability = 1.0; // in [0.9, 1.0]; scales failure probability
  std::vector<double> bandwidth_mbps;  // link bandwidth toward each satellite id
  FrequencyBand frequency = FrequencyBand::L1;
  Modulation modulation = Modulation::BPSK;
  OrbitalSlot slot;
};

inline bool is_operational(const SatelliteState& s) { return s.status == SatStatus::Operational; }

}  // namespace constellation
