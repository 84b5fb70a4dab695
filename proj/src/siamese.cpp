#include "silstm/siamese.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <thread>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

namespace silstm {

double triplet_loss(const Eigen::VectorXd& ci, const Eigen::VectorXd& cj, const Eigen::VectorXd& ck, double margin) {
  if (ci.size() != cj.size() || ci.size() != ck.size()) throw Error("triplet_loss: dimension mismatch");
  return std::max((ci - cj).squaredNorm() - (ci - ck).squaredNorm() + margin, 0.0);
}

TripletGrad triplet_loss_grad(const Eigen::VectorXd& ci, const Eigen::VectorXd& cj, const Eigen::VectorXd& ck,
                              double margin) {
  TripletGrad g;
  g.loss = triplet_loss(ci, cj, ck, margin);
  if (g.loss > 0.0) {
    g.d_anchor = 2.0 * (ck - cj);
    g.d_positive = -2.0 * (ci - cj);
    g.d_negative = 2.0 * (ci - ck);
  } else {
    g.d_anchor = g.d_positive = g.d_negative = Eigen::VectorXd::Zero(ci.size());
  }
  return g;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("train config: epochs must be >= 1");
  if (batch_triplets < 1) throw Error("train config: batch_triplets must be >= 1");
  if (margin < 0) throw Error("train config: margin must be non-negative");
  if (learning_rate < 0) throw Error("train config: learning_rate must be non-negative");
  if (train_ratio < 0 || test_ratio < 0 || val_ratio < 0 ||
      std::abs(train_ratio + test_ratio + val_ratio - 1.0) > 1e-9)
    throw Error("train config: split ratios must be non-negative and sum to 1");
}

// ---- split ------------------------------------------------------------------

namespace {

// Largest-remainder apportionment of `total` slots given per-stratum quotas and capacities.
std::vector<std::size_t> apportion(const std::vector<double>& quota, const std::vector<std::size_t>& cap,
                                   std::size_t total) {
  std::vector<std::size_t> take(quota.size());
  std::size_t used = 0;
  for (std::size_t s = 0; s < quota.size(); ++s) {
    take[s] = std::min(cap[s], static_cast<std::size_t>(std::floor(quota[s])));
    used += take[s];
  }
  std::vector<std::size_t> order(quota.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]);
  });
  while (used < total) {
    bool progressed = false;
    for (auto s : order) {
      if (used == total) break;
      if (take[s] < cap[s]) {
        ++take[s];
        ++used;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return take;
}

}  // namespace

Split split_dataset(const std::vector<InteractionTrajectory>& trajs, const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = trajs.size();
  std::map<SafetyLabel, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < n; ++i) strata[trajs[i].label].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [label, idx] : strata) {
    std::shuffle(idx.begin(), idx.end(), rng);
    groups.push_back(idx);
  }

  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_ratio * static_cast<double>(n)));
  const auto n_test = std::min(n - n_train, static_cast<std::size_t>(std::llround(cfg.test_ratio * static_cast<double>(n))));

  std::vector<double> q_train, q_test;
  std::vector<std::size_t> cap;
  for (const auto& g : groups) {
    q_train.push_back(cfg.train_ratio * static_cast<double>(g.size()));
    q_test.push_back(cfg.test_ratio * static_cast<double>(g.size()));
    cap.push_back(g.size());
  }
  const auto t_train = apportion(q_train, cap, n_train);
  for (std::size_t s = 0; s < cap.size(); ++s) cap[s] -= t_train[s];
  const auto t_test = apportion(q_test, cap, n_test);

  Split sp;
  for (std::size_t s = 0; s < groups.size(); ++s) {
    const auto& g = groups[s];
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (j < t_train[s])
        sp.train.push_back(g[j]);
      else if (j < t_train[s] + t_test[s])
        sp.test.push_back(g[j]);
      else
        sp.validation.push_back(g[j]);
    }
  }
  for (auto* v : {&sp.train, &sp.test, &sp.validation}) std::sort(v->begin(), v->end());
  return sp;
}

// ---- triplets ---------------------------------------------------------------

std::vector<Triplet> sample_triplets(const std::vector<InteractionTrajectory>& trajs, std::size_t count,
                                     std::mt19937_64& rng) {
  std::vector<std::size_t> unsafe, safe;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    if (trajs[i].label == SafetyLabel::unsafe) unsafe.push_back(i);
    if (trajs[i].label == SafetyLabel::safe) safe.push_back(i);
  }
  if (unsafe.empty() || safe.empty()) throw Error("cannot form triplets: a label class is absent");
  const auto pick = [&](const std::vector<std::size_t>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  std::vector<std::size_t> labeled = unsafe;
  labeled.insert(labeled.end(), safe.begin(), safe.end());
  std::sort(labeled.begin(), labeled.end());

  std::vector<Triplet> out;
  out.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    const auto a = pick(labeled);
    const bool is_unsafe = trajs[a].label == SafetyLabel::unsafe;
    const auto& same = is_unsafe ? unsafe : safe;
    const auto& other = is_unsafe ? safe : unsafe;
    std::size_t p = a;
    if (same.size() > 1)
      while (p == a) p = pick(same);
    out.push_back({a, p, pick(other)});
  }
  return out;
}

// ---- gradients --------------------------------------------------------------

BatchResult batch_gradient(const EncoderModel& model, const std::vector<Eigen::MatrixXd>& seqs,
                           const std::vector<Triplet>& triplets, double margin, Mode mode, std::mt19937_64* rng) {
  if (triplets.empty()) throw Error("batch_gradient: empty batch");
  std::vector<std::size_t> uniq;
  std::map<std::size_t, std::size_t> slot;
  for (const auto& t : triplets)
    for (auto i : {t.anchor, t.positive, t.negative})
      if (slot.emplace(i, uniq.size()).second) uniq.push_back(i);

  // masks are drawn sequentially so the batch is reproducible regardless of threading
  std::vector<DropoutMasks> masks;
  masks.reserve(uniq.size());
  for (std::size_t u = 0; u < uniq.size(); ++u) {
    if (mode == Mode::train) {
      if (!rng) throw Error("batch_gradient: train mode needs a random engine");
      masks.push_back(sample_masks(model, *rng));
    } else {
      masks.push_back(identity_masks(model));
    }
  }
  std::vector<Encoding> enc(uniq.size());
  parallel_for(uniq.size(), [&](std::size_t u) { enc[u] = encode_with_masks(model, seqs.at(uniq[u]), masks[u]); });

  const auto dim = model.output_dim();
  std::vector<Eigen::VectorXd> dc(uniq.size(), Eigen::VectorXd::Zero(dim));
  BatchResult res;
  const double scale = 1.0 / static_cast<double>(triplets.size());
  for (const auto& t : triplets) {
    const auto ia = slot[t.anchor], ip = slot[t.positive], in = slot[t.negative];
    const auto g = triplet_loss_grad(enc[ia].context, enc[ip].context, enc[in].context, margin);
    res.mean_loss += g.loss * scale;
    dc[ia] += g.d_anchor * scale;
    dc[ip] += g.d_positive * scale;
    dc[in] += g.d_negative * scale;
  }

  res.grad = model.zeros_like();
  if (std::thread::hardware_concurrency() <= 1) {
    for (std::size_t u = 0; u < uniq.size(); ++u)
      if (dc[u].squaredNorm() > 0) backward(model, enc[u].cache, dc[u], res.grad);
  } else {
    std::vector<EncoderModel> parts(uniq.size());
    parallel_for(uniq.size(), [&](std::size_t u) {
      parts[u] = model.zeros_like();
      if (dc[u].squaredNorm() > 0) backward(model, enc[u].cache, dc[u], parts[u]);
    });
    for (auto& part : parts) {
      std::vector<std::span<const double>> src;
      part.for_each_parameter([&](const std::string&, std::span<const double> v) { src.push_back(v); });
      std::size_t k = 0;
      res.grad.for_each_parameter([&](const std::string&, std::span<double> v) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += src[k][i];
        ++k;
      });
    }
  }
  return res;
}

double mean_triplet_loss(const EncoderModel& model, const std::vector<Eigen::MatrixXd>& seqs,
                         const std::vector<Triplet>& triplets, double margin) {
  if (triplets.empty()) throw Error("mean_triplet_loss: no triplets");
  std::map<std::size_t, std::size_t> slot;
  std::vector<std::size_t> uniq;
  for (const auto& t : triplets)
    for (auto i : {t.anchor, t.positive, t.negative})
      if (slot.emplace(i, uniq.size()).second) uniq.push_back(i);
  std::vector<Eigen::VectorXd> c(uniq.size());
  parallel_for(uniq.size(), [&](std::size_t u) { c[u] = encode(model, seqs.at(uniq[u]), Mode::infer).context; });
  double sum = 0.0;
  for (const auto& t : triplets) sum += triplet_loss(c[slot[t.anchor]], c[slot[t.positive]], c[slot[t.negative]], margin);
  return sum / static_cast<double>(triplets.size());
}

// ---- optimizer --------------------------------------------------------------

Optimizer::Optimizer(const TrainConfig& cfg, const EncoderModel& model) : cfg_(cfg) {
  const auto n = model.parameter_count();
  if (cfg.optimizer == OptimizerKind::adam) {
    m_.assign(n, 0.0);
    v_.assign(n, 0.0);
  }
}

void Optimizer::step(EncoderModel& model, const EncoderModel& grad) {
  std::vector<std::span<const double>> g;
  grad.for_each_parameter([&](const std::string&, std::span<const double> v) { g.push_back(v); });
  const double lr = cfg_.learning_rate;
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  std::size_t k = 0, flat = 0;
  model.for_each_parameter([&](const std::string&, std::span<double> p) {
    const auto& gk = g.at(k++);
    if (gk.size() != p.size()) throw Error("optimizer: gradient shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i, ++flat) {
      if (cfg_.optimizer == OptimizerKind::sgd) {
        p[i] -= lr * gk[i];
        continue;
      }
      m_[flat] = cfg_.beta1 * m_[flat] + (1.0 - cfg_.beta1) * gk[i];
      v_[flat] = cfg_.beta2 * v_[flat] + (1.0 - cfg_.beta2) * gk[i] * gk[i];
      p[i] -= lr * (m_[flat] / bc1) / (std::sqrt(v_[flat] / bc2) + cfg_.adam_eps);
    }
  });
}

// ---- training loop ----------------------------------------------------------

namespace {

void choose_semi_hard(const EncoderModel& model, const std::vector<Eigen::MatrixXd>& seqs,
                      const std::vector<InteractionTrajectory>& set, std::vector<Triplet>& triplets,
                      const TrainConfig& cfg, std::mt19937_64& rng) {
  std::vector<Eigen::VectorXd> emb(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t i) { emb[i] = encode(model, seqs[i], Mode::infer).context; });
  std::vector<std::size_t> unsafe, safe;
  for (std::size_t i = 0; i < set.size(); ++i) (set[i].label == SafetyLabel::unsafe ? unsafe : safe).push_back(i);
  for (auto& t : triplets) {
    const auto& other = set[t.anchor].label == SafetyLabel::unsafe ? safe : unsafe;
    const double d_ap = (emb[t.anchor] - emb[t.positive]).squaredNorm();
    std::size_t hardest = t.negative;
    double hardest_d = (emb[t.anchor] - emb[t.negative]).squaredNorm();
    bool found = d_ap < hardest_d && hardest_d < d_ap + cfg.margin;
    for (int c = 0; c < cfg.semi_hard_pool && !found; ++c) {
      const auto j = other[std::uniform_int_distribution<std::size_t>(0, other.size() - 1)(rng)];
      const double d_an = (emb[t.anchor] - emb[j]).squaredNorm();
      if (d_ap < d_an && d_an < d_ap + cfg.margin) {
        t.negative = j;
        found = true;
      } else if (d_an < hardest_d) {
        hardest = j;
        hardest_d = d_an;
      }
    }
    if (!found) t.negative = hardest;
  }
}

}  // namespace

TrainResult train(const EncoderModel& init, const std::vector<InteractionTrajectory>& train_set,
                  const std::vector<InteractionTrajectory>& val_set, const TrainConfig& cfg) {
  cfg.validate();
  init.validate();
  const auto has_both = [](const std::vector<InteractionTrajectory>& v) {
    bool u = false, s = false;
    for (const auto& t : v) {
      u |= t.label == SafetyLabel::unsafe;
      s |= t.label == SafetyLabel::safe;
    }
    return u && s;
  };
  if (!has_both(train_set)) throw Error("cannot form triplets: training set lacks a label class");
  if (!has_both(val_set)) throw Error("cannot form triplets: validation set lacks a label class");

  std::vector<Eigen::MatrixXd> train_seqs, val_seqs;
  for (const auto& t : train_set) train_seqs.push_back(t.sequence());
  for (const auto& t : val_set) val_seqs.push_back(t.sequence());

  std::mt19937_64 rng(cfg.seed);
  std::mt19937_64 val_rng(mix_seed(cfg.seed, 1));
  const auto val_triplets = sample_triplets(val_set, std::max<std::size_t>(val_set.size(), 1), val_rng);
  const std::size_t per_epoch =
      cfg.triplets_per_epoch > 0 ? static_cast<std::size_t>(cfg.triplets_per_epoch) : train_set.size();

  TrainResult res;
  res.model = init;
  res.best_val_loss = std::numeric_limits<double>::infinity();
  EncoderModel model = init;
  Optimizer opt(cfg, model);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto triplets = sample_triplets(train_set, per_epoch, rng);
    if (cfg.mining == Mining::semi_hard) choose_semi_hard(model, train_seqs, train_set, triplets, cfg, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < triplets.size(); start += static_cast<std::size_t>(cfg.batch_triplets)) {
      const auto end = std::min(triplets.size(), start + static_cast<std::size_t>(cfg.batch_triplets));
      const std::vector<Triplet> batch(triplets.begin() + static_cast<std::ptrdiff_t>(start),
                                       triplets.begin() + static_cast<std::ptrdiff_t>(end));
      const auto br = batch_gradient(model, train_seqs, batch, cfg.margin, Mode::train, &rng);
      loss_sum += br.mean_loss * static_cast<double>(batch.size());
      opt.step(model, br.grad);
    }
    const double val_loss = mean_triplet_loss(model, val_seqs, val_triplets, cfg.margin);
    const bool saved = val_loss < res.best_val_loss;
    if (saved) {
      res.best_val_loss = val_loss;
      res.best_epoch = epoch;
      res.model = model;
    }
    res.history.push_back({epoch, loss_sum / static_cast<double>(triplets.size()), val_loss, saved});
  }
  return res;
}

void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history) {
  char buf[64];
  const auto num = [&](double v) {
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  };
  out << "epoch,train_loss,val_loss,saved\n";
  for (const auto& h : history)
    out << h.epoch << ',' << num(h.train_loss) << ',' << num(h.val_loss) << ',' << (h.saved ? 1 : 0) << '\n';
}

}  // namespace silstm
