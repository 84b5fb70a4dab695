#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "silstm/interaction.hpp"
#include "silstm/recurrent.hpp"

namespace silstm {

/// max(|ci - cj|^2 - |ci - ck|^2 + margin, 0)
double triplet_loss(const Eigen::VectorXd& ci, const Eigen::VectorXd& cj, const Eigen::VectorXd& ck, double margin);

struct TripletGrad {
  double loss = 0.0;
  Eigen::VectorXd d_anchor, d_positive, d_negative;
};
/// Loss and its gradient w.r.t. each context vector (zero when the hinge is inactive).
TripletGrad triplet_loss_grad(const Eigen::VectorXd& ci, const Eigen::VectorXd& cj, const Eigen::VectorXd& ck,
                              double margin);

/// Indices into a trajectory list.
struct Triplet {
  std::size_t anchor, positive, negative;
};

enum class Mining { random, semi_hard };
enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  double margin = 1.0;
  int epochs = 200;
  int batch_triplets = 32;
  int triplets_per_epoch = 0;  // 0: one triplet per training trajectory
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double train_ratio = 0.70, test_ratio = 0.20, val_ratio = 0.10;
  Mining mining = Mining::random;
  int semi_hard_pool = 8;
  std::uint64_t seed = 42;
  int k_neighbors = 8;

  void validate() const;
};

/// Seeds of the three standard splits.
inline constexpr std::array<std::uint64_t, 3> kSplitSeeds{20190101, 20190202, 20190303};

struct Split {
  std::vector<std::size_t> train, test, validation;  // indices into the input list
};

/// Label-stratified train/test/validation partition; sizes are round(ratio * n)
/// overall with largest-remainder allocation per label.
Split split_dataset(const std::vector<InteractionTrajectory>& trajs, const TrainConfig& cfg, std::uint64_t seed);

/// Uniform random triplets over labeled trajectories.
std::vector<Triplet> sample_triplets(const std::vector<InteractionTrajectory>& trajs, std::size_t count,
                                     std::mt19937_64& rng);

struct BatchResult {
  double mean_loss = 0.0;
  EncoderModel grad;  // mean over triplets
};

/// Mean triplet loss over `triplets` and its parameter gradient. Each distinct
/// trajectory is encoded once; in train mode it gets one dropout mask per batch.
BatchResult batch_gradient(const EncoderModel& model, const std::vector<Eigen::MatrixXd>& seqs,
                           const std::vector<Triplet>& triplets, double margin, Mode mode, std::mt19937_64* rng);

/// Mean triplet loss in inference mode.
double mean_triplet_loss(const EncoderModel& model, const std::vector<Eigen::MatrixXd>& seqs,
                         const std::vector<Triplet>& triplets, double margin);

class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& cfg, const EncoderModel& model);
  void step(EncoderModel& model, const EncoderModel& grad);

 private:
  TrainConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

struct HistoryRow {
  int epoch;
  double train_loss, val_loss;
  bool saved;
};

struct TrainResult {
  EncoderModel model;  // best validation checkpoint
  std::vector<HistoryRow> history;
  double best_val_loss = 0.0;
  int best_epoch = 0;
};

/// Trains with triplet loss; keeps the checkpoint with the lowest validation
/// loss. Both labels must be present in train and validation sets.
TrainResult train(const EncoderModel& init, const std::vector<InteractionTrajectory>& train_set,
                  const std::vector<InteractionTrajectory>& val_set, const TrainConfig& cfg);

/// `epoch,train_loss,val_loss,saved`
void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history);

}  // namespace silstm
