#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "silstm/tracks.hpp"

namespace silstm {

/// Distance written into neighbor slots that no vehicle occupies (meters).
inline constexpr double kPaddingDistance = 100.0;
/// Neighbor id written into unoccupied slots.
inline constexpr VehicleId kNoNeighbor = -1;

enum class SafetyLabel { unsafe, safe, unlabeled };

std::string to_string(SafetyLabel l);
SafetyLabel parse_safety_label(std::string_view s);

/// Neighborhood of one vehicle at one time-step. Slots are ordered nearest first.
struct InteractionFeature {
  int t = 0;
  std::vector<VehicleId> neighbor_ids;
  std::vector<double> d;
  double v_self = 0.0;
  std::vector<double> v_nbr;

  std::size_t k() const { return d.size(); }
  /// [d_1..d_k, v_self, v_1..v_k]
  Eigen::VectorXd flatten() const;
  static InteractionFeature unflatten(const Eigen::Ref<const Eigen::VectorXd>& x, int t = 0);
};

struct InteractionTrajectory {
  VehicleId vehicle_id = 0;
  std::string intersection;
  std::vector<InteractionFeature> features;
  SafetyLabel label = SafetyLabel::unlabeled;

  std::size_t n_steps() const { return features.size(); }
  std::size_t feature_dim() const { return features.empty() ? 0 : 2 * features.front().k() + 1; }
  /// Column n holds the flattened feature vector of step n.
  Eigen::MatrixXd sequence() const;
};

/// One trajectory per track; neighbors are co-present vehicles of the same
/// intersection ranked by center distance (ties: lower id first).
std::vector<InteractionTrajectory> build_interactions(const TrackDataset& ds, int k);

/// Per-dimension z-score normalization fitted on training trajectories.
struct FeatureScaler {
  static constexpr double kMinStd = 1e-8;
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  Eigen::MatrixXd transform(const Eigen::MatrixXd& seq) const;
  Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& seq) const;
};

FeatureScaler fit_scaler(const std::vector<InteractionTrajectory>& train);
/// Replaces every feature with its z-score. Applying twice is not the identity.
InteractionTrajectory apply_scaler(const FeatureScaler& sc, const InteractionTrajectory& traj);
InteractionTrajectory invert_scaler(const FeatureScaler& sc, const InteractionTrajectory& traj);

/// `{"mean": [...], "std": [...]}`
void save_scaler(std::ostream& out, const FeatureScaler& sc);
FeatureScaler load_scaler(std::istream& in);

/// JSON-lines dump: `{vehicle_id, intersection, n_steps, k, label, t, neighbor_ids, features}`.
void write_interactions_jsonl(std::ostream& out, const std::vector<InteractionTrajectory>& trajs);
std::vector<InteractionTrajectory> read_interactions_jsonl(std::istream& in);

}  // namespace silstm
