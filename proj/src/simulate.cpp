#include "silstm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace silstm {

namespace {

using Vec = Eigen::Vector2d;

struct Agent {
  AgentProfile prof;
  int spawn_substep = 0;
  bool active = false, done = false;
  int entry_arm = 0;
  Vec pos, vel;
  std::vector<Vec> waypoints;  // center, exit
  std::size_t next_wp = 0;
  double relaxation = 1.0;
  int blocked = 0;
  std::vector<TrackPoint> points;
};

Vec arm_dir(int arm, int n_arms) {
  const double a = 2.0 * std::numbers::pi * arm / n_arms;
  return {std::cos(a), std::sin(a)};
}

Vec perp(const Vec& d) { return {-d.y(), d.x()}; }

}  // namespace

double class_speed_cap(VehicleClass cls) {
  switch (cls) {
    case VehicleClass::two_wheeler: return 9.0;
    case VehicleClass::car: return 8.0;
    case VehicleClass::auto_rickshaw: return 6.5;
    case VehicleClass::bus: return 5.5;
    case VehicleClass::other: return 7.0;
  }
  return 7.0;
}

int ScenarioConfig::total_agents() const {
  int n = 0;
  for (const auto& [cls, c] : counts) n += c;
  return n;
}

void ScenarioConfig::validate() const {
  if (n_arms != 3 && n_arms != 4 && n_arms != 7) throw Error("scenario: n_arms must be 3, 4 or 7");
  for (const auto& [cls, c] : counts)
    if (c < 0) throw Error("scenario: agent counts must be >= 0");
  if (total_agents() == 0) throw Error("scenario: zero agents");
  if (aggressive_fraction < 0 || aggressive_fraction > 1) throw Error("scenario: aggressive_fraction must be in [0,1]");
  if (duration_steps < 2) throw Error("scenario: duration_steps must be >= 2");
  if (sample_rate <= 0 || substeps < 1) throw Error("scenario: sample_rate and substeps must be positive");
  if (arm_length <= 0 || road_half_width <= 0) throw Error("scenario: geometry must be positive");
  if (spawn_window <= 0 || spawn_window > 1) throw Error("scenario: spawn_window must be in (0,1]");
}

Scenario generate(const ScenarioConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double dt = 1.0 / (cfg.sample_rate * cfg.substeps);
  const int total_substeps = cfg.duration_steps * cfg.substeps;
  const double bound = cfg.arm_length + cfg.road_half_width + 2.0;
  const double stop_radius = 14.0;
  const double phase_seconds = 12.0;

  // agent roster: classes in enum order, then aggressive flags drawn without replacement
  std::vector<Agent> agents;
  for (const auto& [cls, c] : cfg.counts)
    for (int i = 0; i < c; ++i) {
      Agent a;
      a.prof.cls = cls;
      agents.push_back(a);
    }
  std::shuffle(agents.begin(), agents.end(), rng);
  const auto n = agents.size();
  const auto n_aggr = static_cast<std::size_t>(std::llround(cfg.aggressive_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < n_aggr; ++i) agents[order[i]].prof.aggressive = true;

  std::vector<int> spawn_times(n);
  for (auto& s : spawn_times) s = static_cast<int>(unit(rng) * cfg.spawn_window * total_substeps);
  std::sort(spawn_times.begin(), spawn_times.end());

  for (std::size_t i = 0; i < n; ++i) {
    auto& a = agents[i];
    auto& p = a.prof;
    p.id = cfg.id_offset + static_cast<VehicleId>(i + 1);
    p.max_speed = class_speed_cap(p.cls);
    if (p.aggressive) {
      p.preferred_distance = uniform(0.8, 1.4);
      p.repulsion_gain = uniform(1.0, 2.0);
      p.repulsion_range = uniform(0.25, 0.45);
      p.desired_speed = p.max_speed * uniform(0.85, 1.0);
      a.relaxation = uniform(0.4, 0.7);
    } else {
      p.preferred_distance = uniform(3.5, 5.0);
      p.repulsion_gain = uniform(3.0, 5.0);
      p.repulsion_range = uniform(1.5, 2.5);
      p.desired_speed = p.max_speed * uniform(0.55, 0.75);
      a.relaxation = uniform(0.9, 1.4);
    }
    a.spawn_substep = spawn_times[i];
    a.entry_arm = static_cast<int>(unit(rng) * cfg.n_arms) % cfg.n_arms;
    int exit_arm = a.entry_arm;
    while (exit_arm == a.entry_arm) exit_arm = static_cast<int>(unit(rng) * cfg.n_arms) % cfg.n_arms;
    const Vec din = arm_dir(a.entry_arm, cfg.n_arms), dout = arm_dir(exit_arm, cfg.n_arms);
    // inbound traffic keeps to one side of the road, outbound to the other
    const double lat_in = uniform(0.5, cfg.road_half_width - 0.5);
    const double lat_out = uniform(0.5, cfg.road_half_width - 0.5);
    const double mouth = cfg.road_half_width + 2.0;
    a.pos = din * cfg.arm_length - perp(din) * lat_in;
    // turn through the midpoint of the entry and exit lane mouths
    const Vec center = 0.5 * ((din * mouth - perp(din) * lat_in) + (dout * mouth + perp(dout) * lat_out));
    const Vec exit = dout * cfg.arm_length + perp(dout) * lat_out;
    a.waypoints = {center, exit};
    a.vel = (center - a.pos).normalized() * p.desired_speed * 0.5;
  }

  const auto green = [&](int arm, int substep) {
    if (!cfg.signalized) return true;
    const int phase = static_cast<int>(substep * dt / phase_seconds) % cfg.n_arms;
    return phase == arm;
  };

  std::vector<Vec> new_pos(n);
  for (int s = 0; s < total_substeps; ++s) {
    // spawning: delayed while the entry point is crowded
    for (auto& a : agents) {
      if (a.active || a.done || s < a.spawn_substep) continue;
      bool clear = true;
      for (const auto& b : agents)
        if (b.active && (b.pos - a.pos).norm() < std::max(a.prof.preferred_distance, b.prof.preferred_distance) + 1.0)
          clear = false;
      if (clear) a.active = true;
    }

    for (std::size_t i = 0; i < n; ++i) {
      auto& a = agents[i];
      if (!a.active) continue;
      const Vec& goal = a.waypoints[a.next_wp];
      Vec to_goal = goal - a.pos;
      double v_des = a.prof.desired_speed;
      if (a.next_wp == 0 && !green(a.entry_arm, s)) {
        const double r = a.pos.norm();
        if (r > stop_radius) v_des = std::min(v_des, std::max(0.0, (r - stop_radius) * 0.8));
      }
      Vec force = (to_goal.normalized() * v_des - a.vel) / a.relaxation;
      const Vec heading = a.vel.norm() > 1e-9 ? Vec(a.vel.normalized()) : Vec(to_goal.normalized());
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i || !agents[j].active) continue;
        const Vec diff = a.pos - agents[j].pos;
        const double d = diff.norm();
        if (d < 1e-9 || d > 25.0) continue;
        const Vec nrm = diff / d;
        const double cos_phi = -nrm.dot(heading);  // 1 when j is straight ahead
        const double aniso = 0.3 + 0.7 * (1.0 + cos_phi) / 2.0;
        force += a.prof.repulsion_gain * std::exp((a.prof.preferred_distance - d) / a.prof.repulsion_range) * aniso * nrm;
      }
      a.vel += force * dt;
      const double sp = a.vel.norm();
      if (sp > a.prof.max_speed) a.vel *= a.prof.max_speed / sp;
    }

    // Gauss-Seidel position update with a distance shield
    for (std::size_t i = 0; i < n; ++i) {
      auto& a = agents[i];
      if (!a.active) continue;
      // an agent blocked for two seconds accepts half its preferred distance
      const double shield =
          a.blocked * dt > 2.0 ? 0.5 * a.prof.preferred_distance : a.prof.preferred_distance;
      const auto admissible = [&](const Vec& cand) {
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i || !agents[j].active) continue;
          const double before = (a.pos - agents[j].pos).norm();
          const double after = (cand - agents[j].pos).norm();
          if (after < shield && after < before) return false;
        }
        return true;
      };
      Vec step = a.vel * dt;
      Vec cand = a.pos + step;
      if (!admissible(cand)) {
        // slide: drop the component toward the nearest blocking agent
        std::size_t nearest = i;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i || !agents[j].active) continue;
          const double d = (cand - agents[j].pos).norm();
          if (d < best) {
            best = d;
            nearest = j;
          }
        }
        const Vec away = (a.pos - agents[nearest].pos).normalized();
        const double toward = step.dot(-away);
        if (toward > 0) step += toward * away;
        cand = a.pos + step;
        if (!admissible(cand)) {
          cand = a.pos;
          a.vel.setZero();
          ++a.blocked;
        } else {
          a.vel = step / dt;
          a.blocked = 0;
        }
      } else {
        a.blocked = 0;
      }
      cand = cand.cwiseMax(Vec(-bound, -bound)).cwiseMin(Vec(bound, bound));
      a.pos = cand;
      const Vec& goal = a.waypoints[a.next_wp];
      if ((goal - a.pos).norm() < (a.next_wp == 0 ? 4.0 : 2.5)) {
        if (a.next_wp + 1 < a.waypoints.size()) {
          ++a.next_wp;
        } else {
          a.active = false;
          a.done = true;
        }
      }
    }

    if ((s + 1) % cfg.substeps == 0) {
      const int frame = (s + 1) / cfg.substeps - 1;
      for (auto& a : agents)
        if (a.active) a.points.push_back({frame, a.pos, {}});
    }
  }

  Scenario sc;
  sc.bound = bound;
  sc.tracks.sample_rate = cfg.sample_rate;
  for (auto& a : agents) {
    sc.profiles[a.prof.id] = a.prof;
    if (a.points.size() < 2) continue;
    VehicleTrack tr;
    tr.id = a.prof.id;
    tr.cls = a.prof.cls;
    tr.intersection = cfg.intersection;
    tr.points = std::move(a.points);
    recompute_velocities(tr);
    sc.aggressive[tr.id] = a.prof.aggressive;
    sc.tracks.tracks.push_back(std::move(tr));
  }
  if (sc.tracks.tracks.empty()) throw Error("scenario produced no tracks; increase duration_steps");
  return sc;
}

void write_truth_csv(std::ostream& out, const Scenario& sc) {
  out << "vehicle_id,aggressive\n";
  for (const auto& [id, aggr] : sc.aggressive) out << id << ',' << (aggr ? 1 : 0) << '\n';
}

std::map<VehicleId, bool> read_truth_csv(std::istream& in) {
  std::map<VehicleId, bool> out;
  std::string line;
  std::getline(in, line);
  if (line.rfind("vehicle_id,aggressive", 0) != 0) throw Error("truth.csv: unexpected header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error("truth.csv line " + std::to_string(line_no) + ": malformed");
    try {
      out[std::stoll(line.substr(0, comma))] = std::stoi(line.substr(comma + 1)) != 0;
    } catch (const std::logic_error&) {
      throw Error("truth.csv line " + std::to_string(line_no) + ": malformed");
    }
  }
  return out;
}

}  // namespace silstm
