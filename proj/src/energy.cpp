#include "silstm/energy.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace silstm {

bool CollisionParams::within_bounds() const {
  return sigma_d >= kSigmaMin && sigma_d <= kSigmaMax && sigma_w >= kSigmaMin &&
         sigma_w <= kSigmaMax && beta >= kBetaMin && beta <= kBetaMax;
}

double closest_approach_sq(const Eigen::Vector2d& v_cand, const AgentState& self, const AgentState& other) {
  const Eigen::Vector2d dp = self.p - other.p;
  const Eigen::Vector2d q = v_cand - other.v;
  const double qq = q.squaredNorm();
  if (std::sqrt(qq) < kEnergyEps) return dp.squaredNorm();
  return (dp - (dp.dot(q) / qq) * q).squaredNorm();
}

namespace {

double heading_term(const AgentState& self, const AgentState& other) {
  const Eigen::Vector2d dp = self.p - other.p;
  const double dn = dp.norm(), vn = self.v.norm();
  if (dn < kEnergyEps || vn < kEnergyEps) return 0.5;
  const double c = dp.dot(self.v) / (dn * vn);
  return std::clamp(0.5 * (1.0 - c), 0.0, 1.0);
}

double distance_kernel(double dist, double sigma_w, DistanceKernel kernel) {
  const double e = dist / (2.0 * sigma_w);
  return kernel == DistanceKernel::decaying ? std::exp(-e) : std::exp(e);
}

}  // namespace

double neighbor_weight(const AgentState& self, const AgentState& other, const CollisionParams& params,
                       DistanceKernel kernel) {
  return distance_kernel((self.p - other.p).norm(), params.sigma_w, kernel) *
         std::pow(heading_term(self, other), params.beta);
}

double collision_energy(const Eigen::Vector2d& v_cand, const AgentState& self,
                        std::span<const AgentState> others, const CollisionParams& params,
                        DistanceKernel kernel) {
  if (others.empty()) throw Error("collision_energy: no other agents");
  const double denom = 2.0 * params.sigma_d * params.sigma_d;
  double e = 0.0;
  for (const auto& o : others)
    e += neighbor_weight(self, o, params, kernel) * std::exp(-closest_approach_sq(v_cand, self, o) / denom);
  return e;
}

// ---- GA ---------------------------------------------------------------------

GaResult minimize_ga(const Objective& f, std::span<const double> lower, std::span<const double> upper,
                     const GaConfig& cfg, std::uint64_t seed) {
  const std::size_t genes = lower.size();
  if (genes == 0 || upper.size() != genes) throw Error("minimize_ga: bad bounds");
  if (cfg.population < 2 || cfg.generations < 0 || cfg.tournament < 1 || cfg.elitism < 0 ||
      cfg.elitism >= cfg.population)
    throw Error("minimize_ga: invalid GA configuration");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto pop_size = static_cast<std::size_t>(cfg.population);

  const auto score = [&](const std::vector<double>& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<std::vector<double>> pop(pop_size, std::vector<double>(genes));
  std::vector<double> fit(pop_size);
  for (std::size_t i = 0; i < pop_size; ++i) {
    for (std::size_t g = 0; g < genes; ++g) pop[i][g] = lower[g] + unit(rng) * (upper[g] - lower[g]);
    fit[i] = score(pop[i]);
  }

  std::vector<std::size_t> order(pop_size);
  const auto rank = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });
  };
  const auto tournament = [&]() -> const std::vector<double>& {
    std::size_t best = static_cast<std::size_t>(unit(rng) * pop_size) % pop_size;
    for (int r = 1; r < cfg.tournament; ++r) {
      const std::size_t c = static_cast<std::size_t>(unit(rng) * pop_size) % pop_size;
      if (fit[c] < fit[best]) best = c;
    }
    return pop[best];
  };

  GaResult res;
  rank();
  res.history.push_back(fit[order[0]]);

  std::vector<std::vector<double>> next(pop_size, std::vector<double>(genes));
  std::vector<double> next_fit(pop_size);
  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::size_t n = 0;
    for (; n < static_cast<std::size_t>(cfg.elitism); ++n) {
      next[n] = pop[order[n]];
      next_fit[n] = fit[order[n]];
    }
    for (; n < pop_size; ++n) {
      const auto& a = tournament();
      const auto& b = tournament();
      auto& child = next[n];
      for (std::size_t g = 0; g < genes; ++g) {
        const double lo = std::min(a[g], b[g]), hi = std::max(a[g], b[g]);
        const double span = hi - lo;
        double x = lo - cfg.blend_alpha * span + unit(rng) * (1.0 + 2.0 * cfg.blend_alpha) * span;
        if (unit(rng) < cfg.mutation_prob) x += gauss(rng) * cfg.mutation_scale * (upper[g] - lower[g]);
        child[g] = std::clamp(x, lower[g], upper[g]);
      }
      next_fit[n] = score(child);
    }
    pop.swap(next);
    fit.swap(next_fit);
    rank();
    res.history.push_back(fit[order[0]]);
  }
  res.best = pop[order[0]];
  res.best_value = fit[order[0]];
  return res;
}

// ---- objective --------------------------------------------------------------

EnergyObjective::EnergyObjective(const VehicleTrack& vehicle, const TrackDataset& ds, EnergyFitConfig cfg)
    : steps_(vehicle.points.size()), cfg_(cfg) {
  for (const auto& p : vehicle.points) {
    const AgentState self{p.p, p.v};
    for (const auto& other : ds.tracks) {
      if (other.id == vehicle.id || other.intersection != vehicle.intersection) continue;
      const auto* q = other.at(p.t);
      if (!q) continue;
      const AgentState o{q->p, q->v};
      terms_.push_back({(self.p - o.p).norm(), heading_term(self, o), closest_approach_sq(self.v, self, o)});
    }
  }
}

double EnergyObjective::mean_energy(const CollisionParams& prm) const {
  if (terms_.empty()) return 0.0;
  const double denom = 2.0 * prm.sigma_d * prm.sigma_d;
  double e = 0.0;
  for (const auto& t : terms_)
    e += distance_kernel(t.dist, prm.sigma_w, cfg_.kernel) * std::pow(t.heading, prm.beta) *
         std::exp(-t.approach_sq / denom);
  return e / static_cast<double>(steps_);
}

double EnergyObjective::operator()(const CollisionParams& prm) const {
  const double prior = cfg_.prior_length_d / prm.sigma_d + cfg_.prior_length_w / prm.sigma_w +
                       prm.beta / CollisionParams::kBetaMax;
  return mean_energy(prm) + cfg_.prior_weight * prior;
}

FitResult fit_params(const VehicleTrack& vehicle, const TrackDataset& ds, const EnergyFitConfig& cfg) {
  FitResult r;
  r.vehicle_id = vehicle.id;
  const EnergyObjective obj(vehicle, ds, cfg);
  if (obj.isolated()) {
    r.params = {CollisionParams::kSigmaMax, CollisionParams::kSigmaMax, CollisionParams::kBetaMin};
    r.isolated = true;
    r.objective = 0.0;
    return r;
  }
  constexpr std::array<double, 3> lo{CollisionParams::kSigmaMin, CollisionParams::kSigmaMin,
                                     CollisionParams::kBetaMin};
  constexpr std::array<double, 3> hi{CollisionParams::kSigmaMax, CollisionParams::kSigmaMax,
                                     CollisionParams::kBetaMax};
  const auto ga = minimize_ga(
      [&](std::span<const double> x) { return obj({x[0], x[1], x[2]}); }, lo, hi, cfg.ga,
      mix_seed(cfg.ga.seed, static_cast<std::uint64_t>(vehicle.id)));
  r.params = {ga.best[0], ga.best[1], ga.best[2]};
  r.objective = ga.best_value;
  return r;
}

std::vector<FitResult> fit_all(const TrackDataset& ds, const EnergyFitConfig& cfg) {
  std::vector<FitResult> out(ds.tracks.size());
  parallel_for(ds.tracks.size(), [&](std::size_t i) { out[i] = fit_params(ds.tracks[i], ds, cfg); });
  std::sort(out.begin(), out.end(), [](const FitResult& a, const FitResult& b) { return a.vehicle_id < b.vehicle_id; });
  return out;
}

// ---- labeling ---------------------------------------------------------------

SafetyLabel SafetyLabeling::label_of(VehicleId id) const {
  for (std::size_t i = 0; i < fits.size(); ++i)
    if (fits[i].vehicle_id == id) return labels[i];
  throw Error("no label for vehicle " + std::to_string(id));
}

SafetyLabeling label_dataset(const std::vector<FitResult>& fits) {
  SafetyLabeling lab;
  lab.fits = fits;
  const std::size_t n = fits.size();
  lab.labels.assign(n, SafetyLabel::safe);
  lab.cluster.assign(n, -1);
  lab.standardized.assign(n, Eigen::Vector2d::Zero());

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < n; ++i)
    if (!fits[i].isolated) active.push_back(i);
  if (active.size() < 2) throw Error("label_dataset: need at least 2 non-isolated vehicles");

  const auto raw = [&](std::size_t i) { return Eigen::Vector2d(fits[i].params.sigma_d, fits[i].params.sigma_w); };
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (auto i : active) mean += raw(i);
  mean /= static_cast<double>(active.size());
  Eigen::Vector2d var = Eigen::Vector2d::Zero();
  for (auto i : active) var += (raw(i) - mean).cwiseAbs2();
  Eigen::Vector2d sd = (var / static_cast<double>(active.size())).cwiseSqrt();
  if (sd.maxCoeff() < 1e-12) throw Error("degenerate parameter distribution");
  for (int c = 0; c < 2; ++c)
    if (sd[c] < 1e-12) sd[c] = 1.0;
  lab.mean = mean;
  lab.stddev = sd;
  for (auto i : active) lab.standardized[i] = (raw(i) - mean).cwiseQuotient(sd);

  // deterministic init: lowest and highest (z_d + z_w)
  std::size_t lo = active[0], hi = active[0];
  for (auto i : active) {
    const double s = lab.standardized[i].sum();
    if (s < lab.standardized[lo].sum()) lo = i;
    if (s > lab.standardized[hi].sum()) hi = i;
  }
  if (lab.standardized[lo] == lab.standardized[hi]) {
    // equal sums; fall back to the two most distant points along z_d
    for (auto i : active) {
      if (lab.standardized[i].x() < lab.standardized[lo].x()) lo = i;
      if (lab.standardized[i].x() > lab.standardized[hi].x()) hi = i;
    }
  }
  std::array<Eigen::Vector2d, 2> cent{lab.standardized[lo], lab.standardized[hi]};
  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (auto i : active) {
      const auto& z = lab.standardized[i];
      const int c = (z - cent[1]).squaredNorm() < (z - cent[0]).squaredNorm() ? 1 : 0;
      if (c != assign[i]) {
        assign[i] = c;
        changed = true;
      }
    }
    std::array<Eigen::Vector2d, 2> sum{Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
    std::array<double, 2> cnt{0, 0};
    for (auto i : active) {
      sum[assign[i]] += lab.standardized[i];
      cnt[assign[i]] += 1;
    }
    for (int c = 0; c < 2; ++c)
      if (cnt[c] > 0) cent[c] = sum[c] / cnt[c];
    if (!changed) break;
  }

  std::array<Eigen::Vector2d, 2> raw_cent{Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  std::array<double, 2> cnt{0, 0};
  for (auto i : active) {
    raw_cent[assign[i]] += raw(i);
    cnt[assign[i]] += 1;
  }
  if (cnt[0] == 0 || cnt[1] == 0) throw Error("degenerate parameter distribution");
  for (int c = 0; c < 2; ++c) raw_cent[c] /= cnt[c];
  const double n0 = raw_cent[0].norm(), n1 = raw_cent[1].norm();
  const int unsafe = n0 != n1 ? (n1 < n0 ? 1 : 0) : (cent[1].sum() < cent[0].sum() ? 1 : 0);

  lab.centroids = cent;
  lab.unsafe_cluster = unsafe;
  for (auto i : active) {
    lab.cluster[i] = assign[i];
    lab.labels[i] = assign[i] == unsafe ? SafetyLabel::unsafe : SafetyLabel::safe;
  }
  return lab;
}

// ---- I/O --------------------------------------------------------------------

namespace {
std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
}  // namespace

void write_params_csv(std::ostream& out, const std::vector<FitResult>& fits, const std::vector<SafetyLabel>* labels) {
  out << "vehicle_id,sigma_d,sigma_w,beta,objective,label,isolated\n";
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    out << f.vehicle_id << ',' << fmt_double(f.params.sigma_d) << ',' << fmt_double(f.params.sigma_w) << ','
        << fmt_double(f.params.beta) << ',' << fmt_double(f.objective) << ','
        << to_string(labels ? (*labels)[i] : SafetyLabel::unlabeled) << ',' << (f.isolated ? 1 : 0) << '\n';
  }
}

ParamsTable read_params_csv(std::istream& in) {
  ParamsTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "vehicle_id,sigma_d,sigma_w,beta,objective,label,isolated")
        throw Error("params.csv: unexpected header");
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cols;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 7) throw Error("params.csv line " + std::to_string(line_no) + ": expected 7 columns");
    try {
      FitResult f;
      f.vehicle_id = std::stoll(cols[0]);
      f.params = {std::stod(cols[1]), std::stod(cols[2]), std::stod(cols[3])};
      f.objective = std::stod(cols[4]);
      f.isolated = cols[6] == "1";
      t.fits.push_back(f);
      t.labels.push_back(parse_safety_label(cols[5]));
    } catch (const std::logic_error&) {
      throw Error("params.csv line " + std::to_string(line_no) + ": malformed row");
    }
  }
  return t;
}

void write_scatter_csv(std::ostream& out, const SafetyLabeling& lab) {
  out << "vehicle_id,z_sigma_w,z_sigma_d,cluster,label\n";
  for (std::size_t i = 0; i < lab.fits.size(); ++i) {
    out << lab.fits[i].vehicle_id << ',' << fmt_double(lab.standardized[i].y()) << ','
        << fmt_double(lab.standardized[i].x()) << ',' << lab.cluster[i] << ',' << to_string(lab.labels[i]) << '\n';
  }
}

}  // namespace silstm
