#include <doctest.h>

#include <random>
#include <sstream>

#include <Eigen/QR>

#include "oracles.hpp"
#include "silstm/eval.hpp"

using namespace silstm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_points(int dim, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return MatrixXd(dim, n).unaryExpr([&](double) { return g(rng); });
}

std::vector<SafetyLabel> random_labels(int n, std::mt19937_64& rng) {
  std::vector<SafetyLabel> v;
  for (int i = 0; i < n; ++i) v.push_back(rng() % 2 ? SafetyLabel::unsafe : SafetyLabel::safe);
  return v;
}

InteractionTrajectory constant_traj(VehicleId id, SafetyLabel label, double value, const std::string& at) {
  InteractionTrajectory t;
  t.vehicle_id = id;
  t.intersection = at;
  t.label = label;
  for (int n = 0; n < 3; ++n) t.features.push_back(InteractionFeature::unflatten(VectorXd::Constant(5, value), n));
  return t;
}

Prediction pred(VehicleId id, const std::string& at, SafetyLabel truth, SafetyLabel p) {
  return {id, at, truth, p, 0.0};
}

}  // namespace

TEST_CASE("query on a training point with k = 1") {
  std::mt19937_64 rng(51);
  const auto train = random_points(4, 20, rng);
  const auto labels = random_labels(20, rng);
  for (int i = 0; i < 20; ++i) CHECK(knn_classify(train, labels, train.col(i), 1) == labels[i]);
}

TEST_CASE("three near unsafe beat four far safe") {
  MatrixXd train(2, 7);
  train << 1, -1, 0, 10, -10, 0, 0, 0, 0, 1, 0, 0, 10, -10;
  const std::vector<SafetyLabel> labels{SafetyLabel::unsafe, SafetyLabel::unsafe, SafetyLabel::unsafe,
                                        SafetyLabel::safe,   SafetyLabel::safe,   SafetyLabel::safe,
                                        SafetyLabel::safe};
  CHECK(knn_classify(train, labels, VectorXd::Zero(2), 5) == SafetyLabel::unsafe);
  CHECK(knn_classify(train, labels, VectorXd::Zero(2), 7) == SafetyLabel::safe);
}

TEST_CASE("knn agrees with a brute-force sort on 200 points") {
  std::mt19937_64 rng(52);
  const auto train = random_points(6, 200, rng);
  const auto labels = random_labels(200, rng);
  const auto queries = random_points(6, 200, rng);
  for (int k : {1, 3, 5, 9}) {
    int agree = 0;
    for (int q = 0; q < 200; ++q)
      agree += knn_classify(train, labels, queries.col(q), k) == oracle::knn(train, labels, queries.col(q), k);
    CHECK(agree == 200);
  }
}

TEST_CASE("distance ties go to the lower index") {
  MatrixXd train(1, 3);
  train << 1, -1, 1;
  const std::vector<SafetyLabel> labels{SafetyLabel::unsafe, SafetyLabel::safe, SafetyLabel::safe};
  CHECK(knn_classify(train, labels, VectorXd::Zero(1), 1) == SafetyLabel::unsafe);
}

TEST_CASE("knn argument errors") {
  std::mt19937_64 rng(53);
  const auto train = random_points(2, 4, rng);
  const auto labels = random_labels(4, rng);
  CHECK_THROWS_AS(knn_classify(train, labels, VectorXd::Zero(2), 2), Error);
  CHECK_THROWS_AS(knn_classify(train, labels, VectorXd::Zero(2), 5), Error);
  CHECK_THROWS_AS(knn_classify(MatrixXd(2, 0), {}, VectorXd::Zero(2), 1), Error);
  CHECK_THROWS_AS(knn_classify(train, labels, VectorXd::Zero(3), 1), Error);
}

TEST_CASE("property: knn is invariant to a joint isometry") {
  std::mt19937_64 rng(54);
  const auto train = random_points(3, 60, rng);
  const auto labels = random_labels(60, rng);
  const auto queries = random_points(3, 40, rng);
  const Eigen::Matrix3d Q = Eigen::HouseholderQR<MatrixXd>(random_points(3, 3, rng)).householderQ();
  const VectorXd t = random_points(3, 1, rng).col(0) * 10.0;
  const MatrixXd train2 = (Q * train).colwise() + t;
  for (int q = 0; q < 40; ++q)
    CHECK(knn_classify(train, labels, queries.col(q), 5) ==
          knn_classify(train2, labels, Q * queries.col(q) + t, 5));
}

TEST_CASE("metrics from confusion counts") {
  Confusion c{3, 1, 2, 4};
  CHECK(c.recall() == doctest::Approx(0.6));
  CHECK(c.precision() == doctest::Approx(0.75));
  CHECK(c.f1() == doctest::Approx(2 * 0.6 * 0.75 / 1.35));
  Confusion none{0, 0, 5, 5};
  CHECK(none.precision() == 0.0);
  CHECK(none.f1() == 0.0);
}

TEST_CASE("property: per-intersection counts sum to overall") {
  std::mt19937_64 rng(55);
  std::vector<Prediction> preds;
  const char* names[] = {"A", "B", "V"};
  for (int i = 0; i < 300; ++i)
    preds.push_back(pred(i, names[rng() % 3], rng() % 2 ? SafetyLabel::unsafe : SafetyLabel::safe,
                         rng() % 2 ? SafetyLabel::unsafe : SafetyLabel::safe));
  const auto scopes = summarize(preds);
  REQUIRE(scopes.size() == 4);
  CHECK(scopes[0].scope == "overall");
  Confusion sum;
  for (std::size_t s = 1; s < scopes.size(); ++s) sum += scopes[s].counts;
  CHECK(sum.tp == scopes[0].counts.tp);
  CHECK(sum.fp == scopes[0].counts.fp);
  CHECK(sum.fn == scopes[0].counts.fn);
  CHECK(sum.tn == scopes[0].counts.tn);
  for (const auto& s : scopes) {
    CHECK(s.recall >= 0.0);
    CHECK(s.recall <= 1.0);
    CHECK(s.precision <= 1.0);
    CHECK(s.f1 <= 1.0);
  }
}

TEST_CASE("perfect embedding gives perfect metrics") {
  EncoderOptions o;
  o.hidden = {3, 3};
  o.attention_units = 3;
  const auto model = make_encoder(Architecture::lstm2l_a, 5, o);
  std::vector<InteractionTrajectory> train, test;
  for (int i = 0; i < 10; ++i) {
    train.push_back(constant_traj(i, i % 2 ? SafetyLabel::unsafe : SafetyLabel::safe, i % 2 ? 3.0 : -3.0, "A"));
    test.push_back(constant_traj(100 + i, i % 2 ? SafetyLabel::unsafe : SafetyLabel::safe, i % 2 ? 3.0 : -3.0,
                                 i < 5 ? "A" : "B"));
  }
  const auto ev = evaluate(model, train, test, 3);
  CHECK(ev.report.overall().recall == 1.0);
  CHECK(ev.report.overall().precision == 1.0);
  CHECK(ev.report.overall().f1 == 1.0);
  CHECK(ev.report.k_neighbors == 2);
  CHECK(ev.report.scopes.size() == 3);
  for (const auto& p : ev.predictions) CHECK(p.dist_to_1nn == doctest::Approx(0.0));
}

TEST_CASE("recall recomputed from the prediction dump") {
  std::mt19937_64 rng(56);
  std::vector<Prediction> preds;
  for (int i = 0; i < 50; ++i)
    preds.push_back(pred(i, "A", rng() % 3 ? SafetyLabel::unsafe : SafetyLabel::safe,
                         rng() % 2 ? SafetyLabel::unsafe : SafetyLabel::safe));
  std::ostringstream out;
  write_predictions_csv(out, preds);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "vehicle_id,true,pred,dist_to_1nn");
  double tp = 0, fn = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    REQUIRE(cols.size() == 4);
    tp += cols[1] == "unsafe" && cols[2] == "unsafe";
    fn += cols[1] == "unsafe" && cols[2] == "safe";
  }
  CHECK(summarize(preds)[0].recall == doctest::Approx(tp / (tp + fn)).epsilon(1e-15));
}

TEST_CASE("report csv layout") {
  RetrievalReport r;
  r.arch = "blstm2l_a";
  r.k_neighbors = 8;
  r.knn_k = 5;
  r.split = "20190101";
  r.scopes = summarize({pred(1, "A", SafetyLabel::unsafe, SafetyLabel::unsafe)});
  std::ostringstream out;
  write_report_csv(out, {r});
  CHECK(out.str() ==
        "arch,k_neighbors,knn_k,split,scope,recall,precision,f1\n"
        "blstm2l_a,8,5,20190101,overall,1,1,1\n"
        "blstm2l_a,8,5,20190101,A,1,1,1\n");
}

TEST_CASE("degenerate ablation grid reduces to a single run") {
  std::mt19937_64 rng(57);
  std::normal_distribution<double> g(0.0, 1.0);
  TrackDataset ds;
  std::map<VehicleId, SafetyLabel> labels;
  for (int id = 1; id <= 40; ++id) {
    VehicleTrack tr;
    tr.id = id;
    tr.intersection = "A";
    const Eigen::Vector2d p0(g(rng) * 10, g(rng) * 10), v(g(rng), g(rng));
    for (int n = 0; n < 5; ++n) tr.points.push_back({n, p0 + v * n, {}});
    recompute_velocities(tr);
    ds.tracks.push_back(tr);
    labels[id] = id % 2 ? SafetyLabel::unsafe : SafetyLabel::safe;
  }
  AblationConfig cfg;
  cfg.architectures = {Architecture::gru2l};
  cfg.neighbor_counts = {2};
  cfg.split_seeds = {kSplitSeeds[1]};
  cfg.train.epochs = 2;
  cfg.encoder.hidden = {3, 3};
  cfg.knn_k = 3;
  const auto ab = ablate(ds, labels, cfg);
  REQUIRE(ab.runs.size() == 1);
  REQUIRE(ab.averaged.size() == 1);

  auto trajs = build_interactions(ds, 2);
  for (auto& t : trajs) t.label = labels.at(t.vehicle_id);
  const auto single = run_experiment(trajs, Architecture::gru2l, cfg.train, cfg.encoder, kSplitSeeds[1], 3);
  CHECK(ab.runs[0].overall().recall == single.eval.report.overall().recall);
  CHECK(ab.runs[0].overall().precision == single.eval.report.overall().precision);
  CHECK(ab.averaged[0].overall().f1 == single.eval.report.overall().f1);
  CHECK(ab.averaged[0].split == "mean");
}
