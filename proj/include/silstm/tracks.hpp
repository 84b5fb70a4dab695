#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "silstm/common.hpp"

namespace silstm {

enum class VehicleClass { car, bus, two_wheeler, auto_rickshaw, other };

std::string to_string(VehicleClass c);
VehicleClass parse_vehicle_class(std::string_view s);

/// One observation of a vehicle. `t` is a dataset-wide time-step index, `p` is
/// in meters and `v` in meters per time-step.
struct TrackPoint {
  int t = 0;
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
};

struct VehicleTrack {
  VehicleId id = 0;
  VehicleClass cls = VehicleClass::other;
  std::string intersection;
  std::vector<TrackPoint> points;  // sorted by t, at least two

  int first_t() const { return points.front().t; }
  int last_t() const { return points.back().t; }
  /// Point at time t, or nullptr if the vehicle is not observed at t.
  const TrackPoint* at(int t) const;
};

struct TrackDataset {
  std::vector<VehicleTrack> tracks;
  double sample_rate = 3.0;  // time-steps per second

  const VehicleTrack* find(VehicleId id) const;
};

enum class TrackFormat { csv, json };

/// Backward finite difference; the first point copies the second point's velocity.
void recompute_velocities(VehicleTrack& track);

/// Reads a track file. Tracks with fewer than two points are dropped with a warning.
TrackDataset ingest_tracks(const std::filesystem::path& path, TrackFormat format);
TrackDataset read_tracks_csv(std::istream& in);
TrackDataset read_tracks_json(std::istream& in);

/// Writes the CSV track format (`vehicle_id,class,intersection,frame,x_m,y_m`).
void write_tracks_csv(std::ostream& out, const TrackDataset& ds);

/// Decimates every track to `target_rate` by nearest-frame selection. Output
/// step m corresponds to source frame round(m * source_fps / target_rate), so
/// co-presence across tracks is preserved; velocities are recomputed.
TrackDataset resample(const TrackDataset& raw, double source_fps, double target_rate);

}  // namespace silstm
