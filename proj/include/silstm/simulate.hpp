#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "silstm/tracks.hpp"

namespace silstm {

struct ScenarioConfig {
  int n_arms = 4;  // 3, 4 or 7
  bool signalized = true;
  std::map<VehicleClass, int> counts{{VehicleClass::two_wheeler, 22},
                                     {VehicleClass::auto_rickshaw, 10},
                                     {VehicleClass::car, 6},
                                     {VehicleClass::bus, 2}};
  double aggressive_fraction = 0.5;
  int duration_steps = 240;
  double sample_rate = 3.0;  // output steps per second
  int substeps = 5;
  double arm_length = 40.0;       // m, center to arm entry
  double road_half_width = 6.0;   // m
  double spawn_window = 0.3;      // fraction of the duration during which agents enter
  std::string intersection = "S";
  VehicleId id_offset = 0;  // emitted ids are id_offset + 1 .. id_offset + n
  std::uint64_t seed = 1;

  void validate() const;
  int total_agents() const;
};

/// Per-agent behavior drawn by the generator.
struct AgentProfile {
  VehicleId id = 0;
  VehicleClass cls = VehicleClass::car;
  bool aggressive = false;
  double preferred_distance = 0.0;  // m; no move may bring the agent closer than this
  double repulsion_gain = 0.0;      // m/s^2
  double repulsion_range = 0.0;     // m
  double desired_speed = 0.0;       // m/s
  double max_speed = 0.0;           // m/s
};

struct Scenario {
  TrackDataset tracks;
  std::map<VehicleId, bool> aggressive;  // ground truth for emitted tracks
  std::map<VehicleId, AgentProfile> profiles;
  double bound = 0.0;  // scene box is [-bound, bound]^2
};

/// Speed cap of a vehicle class in m/s: two-wheeler > car > auto-rickshaw > bus.
double class_speed_cap(VehicleClass cls);

/// Lane-less intersection traffic under social-force steering: goal
/// attraction plus pairwise exponential repulsion with a per-agent preferred
/// distance. Aggressive agents keep small gaps and brake late.
Scenario generate(const ScenarioConfig& cfg);

/// `vehicle_id,aggressive`
void write_truth_csv(std::ostream& out, const Scenario& sc);
std::map<VehicleId, bool> read_truth_csv(std::istream& in);

}  // namespace silstm
