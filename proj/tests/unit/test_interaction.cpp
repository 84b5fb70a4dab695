#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "silstm/interaction.hpp"

using namespace silstm;

namespace {

VehicleTrack track(VehicleId id, std::vector<Eigen::Vector2d> ps, int t0 = 0, const std::string& at = "A") {
  VehicleTrack tr;
  tr.id = id;
  tr.intersection = at;
  for (std::size_t n = 0; n < ps.size(); ++n) tr.points.push_back({t0 + static_cast<int>(n), ps[n], {}});
  recompute_velocities(tr);
  return tr;
}

TrackDataset random_scene(std::mt19937_64& rng, int vehicles, int steps) {
  std::uniform_real_distribution<double> pos(-30.0, 30.0), vel(-2.0, 2.0);
  std::uniform_int_distribution<int> start(0, steps / 2);
  TrackDataset ds;
  for (int id = 1; id <= vehicles; ++id) {
    Eigen::Vector2d p(pos(rng), pos(rng)), v(vel(rng), vel(rng));
    std::vector<Eigen::Vector2d> ps;
    const int len = 2 + static_cast<int>(rng() % static_cast<unsigned>(steps));
    for (int n = 0; n < len; ++n) ps.push_back(p + v * n);
    ds.tracks.push_back(track(id, ps, start(rng)));
  }
  return ds;
}

}  // namespace

TEST_CASE("3-4-5 geometry orders neighbors by distance") {
  TrackDataset ds;
  ds.tracks = {track(1, {{0, 0}, {0, 0}}), track(2, {{3, 0}, {3, 0}}), track(3, {{0, 4}, {0, 4}})};
  const auto trajs = build_interactions(ds, 2);
  const auto& f = trajs.at(0).features.at(0);
  CHECK(f.d == std::vector<double>{3.0, 4.0});
  CHECK(f.neighbor_ids == std::vector<VehicleId>{2, 3});
}

TEST_CASE("k = 8 gives 17 features per step") {
  std::mt19937_64 rng(1);
  const auto trajs = build_interactions(random_scene(rng, 12, 20), 8);
  for (const auto& tr : trajs) {
    CHECK(tr.feature_dim() == 17);
    CHECK(tr.sequence().rows() == 17);
  }
}

TEST_CASE("a lone vehicle is padded") {
  TrackDataset ds;
  ds.tracks = {track(1, {{0, 0}, {1, 0}, {2, 0}})};
  const auto trajs = build_interactions(ds, 3);
  for (const auto& f : trajs[0].features) {
    CHECK(f.d == std::vector<double>(3, kPaddingDistance));
    CHECK(f.v_nbr == std::vector<double>(3, 0.0));
    CHECK(f.neighbor_ids == std::vector<VehicleId>(3, kNoNeighbor));
    CHECK(f.v_self == doctest::Approx(1.0));
  }
}

TEST_CASE("equal distances break ties by lower id") {
  TrackDataset ds;
  ds.tracks = {track(5, {{0, 0}, {0, 0}}), track(9, {{2, 0}, {2, 0}}), track(7, {{-2, 0}, {-2, 0}})};
  const auto trajs = build_interactions(ds, 2);
  const auto it = std::find_if(trajs.begin(), trajs.end(), [](const auto& t) { return t.vehicle_id == 5; });
  CHECK(it->features[0].neighbor_ids == std::vector<VehicleId>{7, 9});
}

TEST_CASE("vehicles at other intersections are not neighbors") {
  TrackDataset ds;
  ds.tracks = {track(1, {{0, 0}, {0, 0}}, 0, "A"), track(2, {{1, 0}, {1, 0}}, 0, "B")};
  const auto trajs = build_interactions(ds, 1);
  CHECK(trajs[0].features[0].d[0] == kPaddingDistance);
}

TEST_CASE("k must be positive") {
  TrackDataset ds;
  ds.tracks = {track(1, {{0, 0}, {1, 0}})};
  CHECK_THROWS_AS(build_interactions(ds, 0), Error);
}

TEST_CASE("features agree with a brute-force oracle") {
  std::mt19937_64 rng(2);
  const auto ds = random_scene(rng, 15, 25);
  const int k = 4;
  const auto trajs = build_interactions(ds, k);
  REQUIRE(trajs.size() == ds.tracks.size());
  for (std::size_t i = 0; i < ds.tracks.size(); ++i) {
    const auto& self = ds.tracks[i];
    const auto& tr = trajs[i];
    REQUIRE(tr.vehicle_id == self.id);
    REQUIRE(tr.n_steps() == self.points.size());
    for (std::size_t n = 0; n < self.points.size(); ++n) {
      const auto& p = self.points[n];
      std::vector<std::tuple<double, VehicleId, double>> cand;
      for (const auto& o : ds.tracks) {
        if (o.id == self.id) continue;
        for (const auto& q : o.points)
          if (q.t == p.t) cand.emplace_back((q.p - p.p).norm(), o.id, q.v.norm());
      }
      std::sort(cand.begin(), cand.end());
      const auto& f = tr.features[n];
      CHECK(f.t == p.t);
      CHECK(f.v_self == doctest::Approx(p.v.norm()).epsilon(1e-15));
      for (int s = 0; s < k; ++s) {
        if (static_cast<std::size_t>(s) < cand.size()) {
          CHECK(f.d[s] == std::get<0>(cand[s]));
          CHECK(f.neighbor_ids[s] == std::get<1>(cand[s]));
          CHECK(f.v_nbr[s] == std::get<2>(cand[s]));
        } else {
          CHECK(f.d[s] == kPaddingDistance);
          CHECK(f.v_nbr[s] == 0.0);
        }
      }
    }
  }
}

TEST_CASE("property: distances sorted, non-negative and 2k+1 long") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 1 + trial % 6;
    for (const auto& tr : build_interactions(random_scene(rng, 10, 15), k))
      for (const auto& f : tr.features) {
        CHECK(std::is_sorted(f.d.begin(), f.d.end()));
        CHECK(*std::min_element(f.d.begin(), f.d.end()) >= 0.0);
        CHECK(f.flatten().size() == 2 * k + 1);
      }
  }
}

TEST_CASE("property: neighbor distances are symmetric") {
  std::mt19937_64 rng(4);
  const auto ds = random_scene(rng, 12, 20);
  const auto trajs = build_interactions(ds, 3);
  std::map<VehicleId, const InteractionTrajectory*> by_id;
  for (const auto& t : trajs) by_id[t.vehicle_id] = &t;
  int checked = 0;
  for (const auto& ti : trajs)
    for (const auto& f : ti.features) {
      if (f.neighbor_ids[0] == kNoNeighbor) continue;
      const auto* tj = by_id.at(f.neighbor_ids[0]);
      for (const auto& g : tj->features) {
        if (g.t != f.t) continue;
        for (std::size_t s = 0; s < g.k(); ++s)
          if (g.neighbor_ids[s] == ti.vehicle_id) {
            CHECK(g.d[s] == f.d[0]);
            ++checked;
          }
      }
    }
  CHECK(checked > 0);
}

TEST_CASE("property: rigid motion leaves features unchanged") {
  std::mt19937_64 rng(5);
  const auto ds = random_scene(rng, 10, 20);
  const double a = 0.83;
  Eigen::Matrix2d R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  const Eigen::Vector2d shift(140.0, -35.0);
  auto moved = ds;
  for (auto& tr : moved.tracks) {
    for (auto& p : tr.points) p.p = R * p.p + shift;
    recompute_velocities(tr);
  }
  const auto x = build_interactions(ds, 4);
  const auto y = build_interactions(moved, 4);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK((x[i].sequence() - y[i].sequence()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("scaler standardizes the training data") {
  std::mt19937_64 rng(6);
  const auto trajs = build_interactions(random_scene(rng, 20, 30), 3);
  const auto sc = fit_scaler(trajs);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(7), sq = Eigen::VectorXd::Zero(7);
  double n = 0;
  for (const auto& t : trajs) {
    const auto z = apply_scaler(sc, t).sequence();
    sum += z.rowwise().sum();
    sq += z.cwiseAbs2().rowwise().sum();
    n += static_cast<double>(z.cols());
  }
  const Eigen::VectorXd mean = sum / n;
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-6);
  for (Eigen::Index d = 0; d < 7; ++d)
    if (sc.std[d] > FeatureScaler::kMinStd) CHECK(std::sqrt(sq[d] / n - mean[d] * mean[d]) == doctest::Approx(1.0));
}

TEST_CASE("applying a scaler twice is not the identity") {
  std::mt19937_64 rng(7);
  const auto trajs = build_interactions(random_scene(rng, 8, 10), 2);
  const auto sc = fit_scaler(trajs);
  const auto once = apply_scaler(sc, trajs[0]);
  const auto twice = apply_scaler(sc, once);
  CHECK((once.sequence() - twice.sequence()).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("scaler inverse reproduces 100 random trajectories") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 20.0);
  std::vector<InteractionTrajectory> trajs;
  for (int i = 0; i < 100; ++i) {
    InteractionTrajectory t;
    t.vehicle_id = i;
    for (int n = 0; n < 1 + i % 9; ++n) {
      Eigen::VectorXd x(5);
      for (auto& v : x) v = g(rng);
      t.features.push_back(InteractionFeature::unflatten(x, n));
    }
    trajs.push_back(t);
  }
  const auto sc = fit_scaler(trajs);
  for (const auto& t : trajs) {
    const auto back = invert_scaler(sc, apply_scaler(sc, t));
    CHECK((back.sequence() - t.sequence()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("constant dimension is clamped with a warning") {
  std::vector<std::string> warnings;
  log::set_warning_sink([&](std::string_view w) { warnings.emplace_back(w); });
  TrackDataset ds;
  ds.tracks = {track(1, {{0, 0}, {1, 0}, {2, 0}})};
  const auto sc = fit_scaler(build_interactions(ds, 2));
  log::set_warning_sink(nullptr);
  CHECK(sc.std.minCoeff() == FeatureScaler::kMinStd);
  CHECK(!warnings.empty());
}

TEST_CASE("scaler requires training data") {
  CHECK_THROWS_AS(fit_scaler({}), Error);
}

TEST_CASE("scaler json round trip is exact") {
  std::mt19937_64 rng(9);
  const auto sc = fit_scaler(build_interactions(random_scene(rng, 10, 10), 2));
  std::stringstream buf;
  save_scaler(buf, sc);
  const auto back = load_scaler(buf);
  CHECK(back.mean == sc.mean);
  CHECK(back.std == sc.std);
}

TEST_CASE("jsonl round trip is exact") {
  std::mt19937_64 rng(10);
  auto trajs = build_interactions(random_scene(rng, 6, 12), 3);
  trajs[0].label = SafetyLabel::unsafe;
  trajs[1].label = SafetyLabel::safe;
  std::stringstream buf;
  write_interactions_jsonl(buf, trajs);
  const auto back = read_interactions_jsonl(buf);
  REQUIRE(back.size() == trajs.size());
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    CHECK(back[i].vehicle_id == trajs[i].vehicle_id);
    CHECK(back[i].label == trajs[i].label);
    CHECK(back[i].sequence() == trajs[i].sequence());
    CHECK(back[i].features[0].neighbor_ids == trajs[i].features[0].neighbor_ids);
  }
}

TEST_CASE("jsonl errors name the line") {
  std::istringstream in("{\"vehicle_id\": 1}\n");
  CHECK_THROWS_WITH_AS(read_interactions_jsonl(in), doctest::Contains("line 1"), Error);
}
