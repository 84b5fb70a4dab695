#include "silstm/interaction.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include <json.hpp>

namespace silstm {

std::string to_string(SafetyLabel l) {
  switch (l) {
    case SafetyLabel::unsafe: return "unsafe";
    case SafetyLabel::safe: return "safe";
    case SafetyLabel::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

SafetyLabel parse_safety_label(std::string_view s) {
  if (s == "unsafe") return SafetyLabel::unsafe;
  if (s == "safe") return SafetyLabel::safe;
  if (s == "unlabeled" || s.empty()) return SafetyLabel::unlabeled;
  throw Error("unknown safety label '" + std::string(s) + "'");
}

Eigen::VectorXd InteractionFeature::flatten() const {
  const auto kk = static_cast<Eigen::Index>(k());
  Eigen::VectorXd x(2 * kk + 1);
  for (Eigen::Index j = 0; j < kk; ++j) {
    x[j] = d[j];
    x[kk + 1 + j] = v_nbr[j];
  }
  x[kk] = v_self;
  return x;
}

InteractionFeature InteractionFeature::unflatten(const Eigen::Ref<const Eigen::VectorXd>& x, int t) {
  if (x.size() < 1 || x.size() % 2 == 0) throw Error("feature vector length must be 2k+1");
  const auto kk = (x.size() - 1) / 2;
  InteractionFeature f;
  f.t = t;
  f.neighbor_ids.assign(kk, kNoNeighbor);
  f.d.resize(kk);
  f.v_nbr.resize(kk);
  for (Eigen::Index j = 0; j < kk; ++j) {
    f.d[j] = x[j];
    f.v_nbr[j] = x[kk + 1 + j];
  }
  f.v_self = x[kk];
  return f;
}

Eigen::MatrixXd InteractionTrajectory::sequence() const {
  if (features.empty()) throw Error("trajectory " + std::to_string(vehicle_id) + " has no steps");
  Eigen::MatrixXd m(feature_dim(), features.size());
  for (std::size_t n = 0; n < features.size(); ++n) m.col(n) = features[n].flatten();
  return m;
}

std::vector<InteractionTrajectory> build_interactions(const TrackDataset& ds, int k) {
  if (k < 1) throw Error("build_interactions: k must be >= 1");

  // time -> tracks present, per intersection
  std::map<std::string, std::map<int, std::vector<std::size_t>>> presence;
  for (std::size_t i = 0; i < ds.tracks.size(); ++i)
    for (const auto& p : ds.tracks[i].points) presence[ds.tracks[i].intersection][p.t].push_back(i);

  std::vector<InteractionTrajectory> out(ds.tracks.size());
  parallel_for(ds.tracks.size(), [&](std::size_t i) {
    const auto& self = ds.tracks[i];
    const auto& frames = presence.at(self.intersection);
    auto& traj = out[i];
    traj.vehicle_id = self.id;
    traj.intersection = self.intersection;
    traj.features.reserve(self.points.size());

    struct Candidate {
      double d;
      VehicleId id;
      double speed;
    };
    std::vector<Candidate> cands;
    for (const auto& p : self.points) {
      cands.clear();
      for (const auto j : frames.at(p.t)) {
        if (j == i) continue;
        const auto* q = ds.tracks[j].at(p.t);
        cands.push_back({(q->p - p.p).norm(), ds.tracks[j].id, q->v.norm()});
      }
      const auto take = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(k));
      std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take),
                        cands.end(), [](const Candidate& a, const Candidate& b) {
                          return a.d != b.d ? a.d < b.d : a.id < b.id;
                        });
      InteractionFeature f;
      f.t = p.t;
      f.v_self = p.v.norm();
      f.neighbor_ids.assign(k, kNoNeighbor);
      f.d.assign(k, kPaddingDistance);
      f.v_nbr.assign(k, 0.0);
      for (std::size_t s = 0; s < take; ++s) {
        f.neighbor_ids[s] = cands[s].id;
        f.d[s] = cands[s].d;
        f.v_nbr[s] = cands[s].speed;
      }
      traj.features.push_back(std::move(f));
    }
  });
  return out;
}

Eigen::MatrixXd FeatureScaler::transform(const Eigen::MatrixXd& seq) const {
  if (seq.rows() != mean.size()) throw Error("scaler dimension mismatch");
  return (seq.colwise() - mean).array().colwise() / std.array();
}

Eigen::MatrixXd FeatureScaler::inverse_transform(const Eigen::MatrixXd& seq) const {
  if (seq.rows() != mean.size()) throw Error("scaler dimension mismatch");
  return (seq.array().colwise() * std.array()).matrix().colwise() + mean;
}

FeatureScaler fit_scaler(const std::vector<InteractionTrajectory>& train) {
  if (train.empty()) throw Error("fit_scaler: empty training set");
  const auto dim = static_cast<Eigen::Index>(train.front().feature_dim());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  double count = 0;
  for (const auto& tr : train) {
    const auto s = tr.sequence();
    if (s.rows() != dim) throw Error("fit_scaler: inconsistent feature dimension");
    sum += s.rowwise().sum();
    count += static_cast<double>(s.cols());
  }
  FeatureScaler sc;
  sc.mean = sum / count;
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
  for (const auto& tr : train) sq += (tr.sequence().colwise() - sc.mean).array().square().matrix().rowwise().sum();
  sc.std = (sq / count).array().sqrt();
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (sc.std[j] < FeatureScaler::kMinStd) {
      log::warn("fit_scaler: feature dimension " + std::to_string(j) + " is constant; std clamped");
      sc.std[j] = FeatureScaler::kMinStd;
    }
  }
  return sc;
}

namespace {
InteractionTrajectory with_sequence(const InteractionTrajectory& traj, const Eigen::MatrixXd& m) {
  InteractionTrajectory out = traj;
  for (std::size_t n = 0; n < out.features.size(); ++n) {
    auto f = InteractionFeature::unflatten(m.col(static_cast<Eigen::Index>(n)), traj.features[n].t);
    f.neighbor_ids = traj.features[n].neighbor_ids;
    out.features[n] = std::move(f);
  }
  return out;
}
}  // namespace

InteractionTrajectory apply_scaler(const FeatureScaler& sc, const InteractionTrajectory& traj) {
  return with_sequence(traj, sc.transform(traj.sequence()));
}

InteractionTrajectory invert_scaler(const FeatureScaler& sc, const InteractionTrajectory& traj) {
  return with_sequence(traj, sc.inverse_transform(traj.sequence()));
}

void save_scaler(std::ostream& out, const FeatureScaler& sc) {
  nlohmann::json j;
  j["mean"] = std::vector<double>(sc.mean.data(), sc.mean.data() + sc.mean.size());
  j["std"] = std::vector<double>(sc.std.data(), sc.std.data() + sc.std.size());
  out << j.dump() << '\n';
}

FeatureScaler load_scaler(std::istream& in) {
  try {
    const auto j = nlohmann::json::parse(in);
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto sd = j.at("std").get<std::vector<double>>();
    if (mean.size() != sd.size() || mean.empty()) throw Error("scaler: mean and std must be non-empty and equal length");
    FeatureScaler sc;
    sc.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    sc.std = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    if ((sc.std.array() <= 0).any()) throw Error("scaler: std must be positive");
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("scaler: ") + e.what());
  }
}

void write_interactions_jsonl(std::ostream& out, const std::vector<InteractionTrajectory>& trajs) {
  for (const auto& tr : trajs) {
    nlohmann::json j;
    j["vehicle_id"] = tr.vehicle_id;
    j["intersection"] = tr.intersection;
    j["n_steps"] = tr.n_steps();
    j["k"] = tr.features.empty() ? 0 : tr.features.front().k();
    j["label"] = to_string(tr.label);
    auto& ts = j["t"] = nlohmann::json::array();
    auto& ids = j["neighbor_ids"] = nlohmann::json::array();
    auto& feats = j["features"] = nlohmann::json::array();
    for (const auto& f : tr.features) {
      ts.push_back(f.t);
      ids.push_back(f.neighbor_ids);
      const auto x = f.flatten();
      feats.push_back(std::vector<double>(x.data(), x.data() + x.size()));
    }
    out << j.dump() << '\n';
  }
}

std::vector<InteractionTrajectory> read_interactions_jsonl(std::istream& in) {
  std::vector<InteractionTrajectory> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      InteractionTrajectory tr;
      tr.vehicle_id = j.at("vehicle_id").get<VehicleId>();
      tr.intersection = j.at("intersection").get<std::string>();
      tr.label = parse_safety_label(j.value("label", std::string("unlabeled")));
      const auto& feats = j.at("features");
      const auto& ts = j.at("t");
      const auto& ids = j.at("neighbor_ids");
      for (std::size_t n = 0; n < feats.size(); ++n) {
        const auto v = feats[n].get<std::vector<double>>();
        auto f = InteractionFeature::unflatten(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())),
                                               ts.at(n).get<int>());
        f.neighbor_ids = ids.at(n).get<std::vector<VehicleId>>();
        tr.features.push_back(std::move(f));
      }
      if (tr.features.size() != j.at("n_steps").get<std::size_t>())
        throw Error("n_steps does not match feature count");
      out.push_back(std::move(tr));
    } catch (const nlohmann::json::exception& e) {
      throw Error("interactions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace silstm
