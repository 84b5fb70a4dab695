#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "silstm/interaction.hpp"
#include "silstm/recurrent.hpp"
#include "silstm/siamese.hpp"

namespace silstm {

/// Majority label among the knn_k nearest training embeddings (Euclidean,
/// distance ties broken by training index). `train` holds one embedding per column.
SafetyLabel knn_classify(const Eigen::MatrixXd& train, const std::vector<SafetyLabel>& labels,
                         const Eigen::VectorXd& query, int knn_k);

/// Confusion counts for the unsafe class.
struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double recall() const;
  double precision() const;
  double f1() const;
  Confusion& operator+=(const Confusion& o);
};

struct ScopeMetrics {
  std::string scope;  // "overall" or an intersection tag
  Confusion counts;
  double recall = 0, precision = 0, f1 = 0;
};

struct RetrievalReport {
  std::string arch;
  int k_neighbors = 0;
  int knn_k = 5;
  std::string split;
  std::vector<ScopeMetrics> scopes;  // overall first, then intersections in name order

  const ScopeMetrics& overall() const { return scopes.front(); }
};

struct Prediction {
  VehicleId vehicle_id = 0;
  std::string intersection;
  SafetyLabel truth = SafetyLabel::unlabeled;
  SafetyLabel pred = SafetyLabel::unlabeled;
  double dist_to_1nn = 0.0;
};

std::vector<ScopeMetrics> summarize(const std::vector<Prediction>& preds);

struct Evaluation {
  RetrievalReport report;
  std::vector<Prediction> predictions;
};

/// Embeds train and test sets in inference mode and classifies each test item by kNN.
Evaluation evaluate(const EncoderModel& model, const std::vector<InteractionTrajectory>& train_set,
                    const std::vector<InteractionTrajectory>& test_set, int knn_k);

/// Embeds every trajectory (one column each) in inference mode.
Eigen::MatrixXd embed_all(const EncoderModel& model, const std::vector<InteractionTrajectory>& set);

struct AblationConfig {
  std::vector<Architecture> architectures{Architecture::blstm2l_a};
  std::vector<int> neighbor_counts{8};
  std::vector<std::uint64_t> split_seeds{kSplitSeeds.begin(), kSplitSeeds.end()};
  TrainConfig train;
  EncoderOptions encoder;
  int knn_k = 5;
};

struct AblationResult {
  std::vector<RetrievalReport> runs;     // one per (arch, k, split)
  std::vector<RetrievalReport> averaged;  // one per (arch, k); split = "mean"
};

/// Full grid: split, scale, train and evaluate for every architecture,
/// neighbor count and split seed. Metrics are averaged over splits per scope.
AblationResult ablate(const TrackDataset& ds, const std::map<VehicleId, SafetyLabel>& labels,
                      const AblationConfig& cfg);

/// Shared single-run path: split by `split_seed`, fit the scaler on train,
/// train on train/validation and evaluate on test.
struct RunOutput {
  Evaluation eval;
  TrainResult trained;
  Split split;
  FeatureScaler scaler;
};
RunOutput run_experiment(const std::vector<InteractionTrajectory>& trajs, Architecture arch,
                         const TrainConfig& train_cfg, const EncoderOptions& enc_opts, std::uint64_t split_seed,
                         int knn_k);

/// `arch,k_neighbors,knn_k,split,scope,recall,precision,f1`
void write_report_csv(std::ostream& out, const std::vector<RetrievalReport>& reports, bool header = true);
/// `vehicle_id,true,pred,dist_to_1nn`
void write_predictions_csv(std::ostream& out, const std::vector<Prediction>& preds);

}  // namespace silstm
