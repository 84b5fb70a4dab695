#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "silstm/interaction.hpp"
#include "silstm/tracks.hpp"

namespace silstm {

struct AgentState {
  Eigen::Vector2d p = Eigen::Vector2d::Zero();  // m
  Eigen::Vector2d v = Eigen::Vector2d::Zero();  // m / step
};

/// Collision-energy parameters. Search bounds are the closed boxes below.
struct CollisionParams {
  double sigma_d = 1.0;  // preferred distance (m)
  double sigma_w = 1.0;  // reaction distance (m)
  double beta = 1.0;     // peakiness of the angular weight

  static constexpr double kSigmaMin = 0.1, kSigmaMax = 20.0;
  static constexpr double kBetaMin = 0.1, kBetaMax = 10.0;
  bool within_bounds() const;
};

/// Sign of the distance kernel in the neighbor weight. `decaying` uses
/// exp(-|dp| / (2 sigma_w)); `as_printed` uses exp(+|dp| / (2 sigma_w)).
enum class DistanceKernel { decaying, as_printed };

inline constexpr double kEnergyEps = 1e-9;

/// Squared closest-approach distance of the pair if i moved with `v_cand`
/// and j kept its velocity. Falls back to |dp|^2 when there is no relative motion.
double closest_approach_sq(const Eigen::Vector2d& v_cand, const AgentState& self, const AgentState& other);

/// Neighbor weight w(s_i, s_j): distance kernel times the half-cosine heading
/// term raised to beta. The heading term is 0.5 when dp or v_i vanishes.
double neighbor_weight(const AgentState& self, const AgentState& other, const CollisionParams& params,
                       DistanceKernel kernel = DistanceKernel::decaying);

/// Collision energy of agent `self` choosing velocity `v_cand` among `others`.
double collision_energy(const Eigen::Vector2d& v_cand, const AgentState& self,
                        std::span<const AgentState> others, const CollisionParams& params,
                        DistanceKernel kernel = DistanceKernel::decaying);

// ---- genetic algorithm ------------------------------------------------------

struct GaConfig {
  int population = 64;
  int generations = 100;
  int tournament = 3;
  double blend_alpha = 0.5;      // BLX-alpha crossover
  double mutation_scale = 0.05;  // gaussian sigma as a fraction of each gene's range
  double mutation_prob = 0.2;    // per gene
  int elitism = 2;
  std::uint64_t seed = 7;
};

struct GaResult {
  std::vector<double> best;
  double best_value = 0.0;
  std::vector<double> history;  // best objective after each generation (index 0 = initial population)
};

using Objective = std::function<double(std::span<const double>)>;

/// Real-valued GA minimizer over the box [lower, upper]. Non-finite objective
/// values rank last.
GaResult minimize_ga(const Objective& f, std::span<const double> lower, std::span<const double> upper,
                     const GaConfig& cfg, std::uint64_t seed);

// ---- per-vehicle fitting ----------------------------------------------------

struct EnergyFitConfig {
  GaConfig ga;
  /// Weight of the comfort prior
  ///   prior_weight * (L_d/sigma_d + L_w/sigma_w + beta/beta_max)
  /// added to the mean collision energy.
  double prior_weight = 0.01;
  double prior_length_d = 5.0;  // L_d, meters
  double prior_length_w = 0.2;  // L_w, meters
  DistanceKernel kernel = DistanceKernel::decaying;
};

/// Time-averaged collision energy of one vehicle over its observed steps, with
/// every parameter-independent quantity precomputed.
class EnergyObjective {
 public:
  EnergyObjective(const VehicleTrack& vehicle, const TrackDataset& ds, EnergyFitConfig cfg = {});

  /// Mean over steps of E_c(v_i; s_i, s_-i) at the given parameters.
  double mean_energy(const CollisionParams& p) const;
  /// mean_energy plus the comfort prior; this is what the GA minimizes.
  double operator()(const CollisionParams& p) const;

  bool isolated() const { return terms_.empty(); }
  std::size_t steps() const { return steps_; }

 private:
  struct Term {
    double dist;     // |dp_ij|
    double heading;  // half-cosine term, in [0, 1]
    double approach_sq;
  };
  std::vector<Term> terms_;
  std::size_t steps_ = 0;
  EnergyFitConfig cfg_;
};

struct FitResult {
  VehicleId vehicle_id = 0;
  CollisionParams params;
  double objective = 0.0;
  bool isolated = false;
};

/// Isolated vehicles get the boundary parameters sigma_d = sigma_w = 20, beta = 0.1.
FitResult fit_params(const VehicleTrack& vehicle, const TrackDataset& ds, const EnergyFitConfig& cfg = {});
/// Fits every track in parallel; results are ordered by vehicle id.
std::vector<FitResult> fit_all(const TrackDataset& ds, const EnergyFitConfig& cfg = {});

// ---- labeling ---------------------------------------------------------------

struct SafetyLabeling {
  std::vector<FitResult> fits;
  std::vector<SafetyLabel> labels;
  std::vector<int> cluster;               // k-means index, -1 for isolated vehicles
  std::vector<Eigen::Vector2d> standardized;  // (z_sigma_d, z_sigma_w)
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d stddev = Eigen::Vector2d::Ones();
  std::array<Eigen::Vector2d, 2> centroids;  // standardized space
  int unsafe_cluster = 0;

  SafetyLabel label_of(VehicleId id) const;
};

/// 2-means on standardized (sigma_d, sigma_w). The cluster whose mean raw
/// parameters lie closer to the origin is unsafe; isolated vehicles are safe.
SafetyLabeling label_dataset(const std::vector<FitResult>& fits);

/// `vehicle_id,sigma_d,sigma_w,beta,objective,label,isolated`
void write_params_csv(std::ostream& out, const std::vector<FitResult>& fits,
                      const std::vector<SafetyLabel>* labels = nullptr);
struct ParamsTable {
  std::vector<FitResult> fits;
  std::vector<SafetyLabel> labels;
};
ParamsTable read_params_csv(std::istream& in);
/// `vehicle_id,z_sigma_w,z_sigma_d,cluster,label`
void write_scatter_csv(std::ostream& out, const SafetyLabeling& lab);

}  // namespace silstm
