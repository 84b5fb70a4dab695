#include "silstm/eval.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

namespace silstm {

SafetyLabel knn_classify(const Eigen::MatrixXd& train, const std::vector<SafetyLabel>& labels,
                         const Eigen::VectorXd& query, int knn_k) {
  const auto n = static_cast<std::size_t>(train.cols());
  if (n == 0) throw Error("knn_classify: empty training set");
  if (labels.size() != n) throw Error("knn_classify: label count does not match embeddings");
  if (knn_k < 1 || knn_k % 2 == 0) throw Error("knn_classify: knn_k must be a positive odd integer");
  if (static_cast<std::size_t>(knn_k) > n)
    throw Error("knn_classify: knn_k (" + std::to_string(knn_k) + ") exceeds training size (" + std::to_string(n) + ")");
  if (query.size() != train.rows()) throw Error("knn_classify: query dimension mismatch");

  const Eigen::VectorXd d2 = (train.colwise() - query).colwise().squaredNorm().transpose();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + knn_k, idx.end(), [&](std::size_t a, std::size_t b) {
    return d2[static_cast<Eigen::Index>(a)] != d2[static_cast<Eigen::Index>(b)]
               ? d2[static_cast<Eigen::Index>(a)] < d2[static_cast<Eigen::Index>(b)]
               : a < b;
  });
  int unsafe = 0;
  for (int i = 0; i < knn_k; ++i) unsafe += labels[idx[i]] == SafetyLabel::unsafe ? 1 : 0;
  return 2 * unsafe > knn_k ? SafetyLabel::unsafe : SafetyLabel::safe;
}

double Confusion::recall() const { return tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
double Confusion::precision() const {
  return tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
}
double Confusion::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}
Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

std::vector<ScopeMetrics> summarize(const std::vector<Prediction>& preds) {
  std::map<std::string, Confusion> per;
  Confusion all;
  for (const auto& p : preds) {
    Confusion c;
    const bool t = p.truth == SafetyLabel::unsafe, y = p.pred == SafetyLabel::unsafe;
    if (t && y) c.tp = 1;
    if (!t && y) c.fp = 1;
    if (t && !y) c.fn = 1;
    if (!t && !y) c.tn = 1;
    per[p.intersection] += c;
    all += c;
  }
  std::vector<ScopeMetrics> out;
  const auto push = [&](std::string scope, const Confusion& c) {
    out.push_back({std::move(scope), c, c.recall(), c.precision(), c.f1()});
  };
  push("overall", all);
  for (const auto& [name, c] : per) push(name, c);
  return out;
}

Eigen::MatrixXd embed_all(const EncoderModel& model, const std::vector<InteractionTrajectory>& set) {
  Eigen::MatrixXd out(model.output_dim(), static_cast<Eigen::Index>(set.size()));
  parallel_for(set.size(), [&](std::size_t i) {
    out.col(static_cast<Eigen::Index>(i)) = encode(model, set[i], Mode::infer).context;
  });
  return out;
}

Evaluation evaluate(const EncoderModel& model, const std::vector<InteractionTrajectory>& train_set,
                    const std::vector<InteractionTrajectory>& test_set, int knn_k) {
  const auto train_emb = embed_all(model, train_set);
  const auto test_emb = embed_all(model, test_set);
  std::vector<SafetyLabel> labels;
  for (const auto& t : train_set) labels.push_back(t.label);

  Evaluation ev;
  ev.predictions.resize(test_set.size());
  parallel_for(test_set.size(), [&](std::size_t i) {
    const Eigen::VectorXd q = test_emb.col(static_cast<Eigen::Index>(i));
    auto& p = ev.predictions[i];
    p.vehicle_id = test_set[i].vehicle_id;
    p.intersection = test_set[i].intersection;
    p.truth = test_set[i].label;
    p.pred = knn_classify(train_emb, labels, q, knn_k);
    p.dist_to_1nn = std::sqrt((train_emb.colwise() - q).colwise().squaredNorm().minCoeff());
  });
  ev.report.arch = model.arch_tag;
  ev.report.knn_k = knn_k;
  ev.report.k_neighbors = static_cast<int>(model.input_dim - 1) / 2;
  ev.report.scopes = summarize(ev.predictions);
  return ev;
}

RunOutput run_experiment(const std::vector<InteractionTrajectory>& trajs, Architecture arch,
                         const TrainConfig& train_cfg, const EncoderOptions& enc_opts, std::uint64_t split_seed,
                         int knn_k) {
  std::vector<InteractionTrajectory> labeled;
  for (const auto& t : trajs)
    if (t.label != SafetyLabel::unlabeled) labeled.push_back(t);
  if (labeled.empty()) throw Error("run_experiment: no labeled trajectories");

  RunOutput out;
  out.split = split_dataset(labeled, train_cfg, split_seed);
  const auto gather = [&](const std::vector<std::size_t>& idx) {
    std::vector<InteractionTrajectory> v;
    for (auto i : idx) v.push_back(labeled[i]);
    return v;
  };
  auto tr = gather(out.split.train), te = gather(out.split.test), va = gather(out.split.validation);
  out.scaler = fit_scaler(tr);
  for (auto* set : {&tr, &te, &va})
    for (auto& t : *set) t = apply_scaler(out.scaler, t);

  const auto model = make_encoder(arch, static_cast<int>(labeled.front().feature_dim()), enc_opts);
  out.trained = train(model, tr, va, train_cfg);
  out.eval = evaluate(out.trained.model, tr, te, knn_k);
  return out;
}

AblationResult ablate(const TrackDataset& ds, const std::map<VehicleId, SafetyLabel>& labels,
                      const AblationConfig& cfg) {
  if (cfg.architectures.empty() || cfg.neighbor_counts.empty() || cfg.split_seeds.empty())
    throw Error("ablate: empty grid");
  AblationResult res;
  for (const int k : cfg.neighbor_counts) {
    auto trajs = build_interactions(ds, k);
    for (auto& t : trajs) {
      const auto it = labels.find(t.vehicle_id);
      t.label = it == labels.end() ? SafetyLabel::unlabeled : it->second;
    }
    for (const auto arch : cfg.architectures) {
      std::vector<RetrievalReport> runs;
      for (std::size_t s = 0; s < cfg.split_seeds.size(); ++s) {
        auto tc = cfg.train;
        tc.k_neighbors = k;
        auto run = run_experiment(trajs, arch, tc, cfg.encoder, cfg.split_seeds[s], cfg.knn_k);
        run.eval.report.split = std::to_string(s);
        run.eval.report.k_neighbors = k;
        runs.push_back(run.eval.report);
      }
      RetrievalReport avg = runs.front();
      avg.split = "mean";
      std::map<std::string, std::vector<const ScopeMetrics*>> by_scope;
      for (const auto& r : runs)
        for (const auto& sc : r.scopes) by_scope[sc.scope].push_back(&sc);
      avg.scopes.clear();
      const auto average = [&](const std::string& scope) {
        ScopeMetrics m;
        m.scope = scope;
        const auto& v = by_scope.at(scope);
        for (const auto* sc : v) {
          m.counts += sc->counts;
          m.recall += sc->recall / static_cast<double>(v.size());
          m.precision += sc->precision / static_cast<double>(v.size());
          m.f1 += sc->f1 / static_cast<double>(v.size());
        }
        avg.scopes.push_back(m);
      };
      average("overall");
      for (const auto& [scope, v] : by_scope)
        if (scope != "overall") average(scope);
      res.runs.insert(res.runs.end(), runs.begin(), runs.end());
      res.averaged.push_back(std::move(avg));
    }
  }
  return res;
}

namespace {
std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
}  // namespace

void write_report_csv(std::ostream& out, const std::vector<RetrievalReport>& reports, bool header) {
  if (header) out << "arch,k_neighbors,knn_k,split,scope,recall,precision,f1\n";
  for (const auto& r : reports)
    for (const auto& s : r.scopes)
      out << r.arch << ',' << r.k_neighbors << ',' << r.knn_k << ',' << r.split << ',' << s.scope << ','
          << num(s.recall) << ',' << num(s.precision) << ',' << num(s.f1) << '\n';
}

void write_predictions_csv(std::ostream& out, const std::vector<Prediction>& preds) {
  out << "vehicle_id,true,pred,dist_to_1nn\n";
  for (const auto& p : preds)
    out << p.vehicle_id << ',' << to_string(p.truth) << ',' << to_string(p.pred) << ',' << num(p.dist_to_1nn) << '\n';
}

}  // namespace silstm
