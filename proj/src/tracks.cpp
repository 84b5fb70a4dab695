#include "silstm/tracks.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace silstm {

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && (!std::is_floating_point_v<T> ||
                                                             std::isfinite(out));
}

struct RawPoint {
  int frame;
  double x, y;
};

struct RawTrack {
  VehicleClass cls = VehicleClass::other;
  std::string intersection;
  std::vector<RawPoint> points;
};

TrackDataset assemble(std::map<VehicleId, RawTrack>& raw, double scale) {
  if (raw.empty()) throw Error("empty dataset: no track rows found");
  TrackDataset ds;
  for (auto& [id, rt] : raw) {
    std::sort(rt.points.begin(), rt.points.end(),
              [](const RawPoint& a, const RawPoint& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < rt.points.size(); ++i) {
      if (rt.points[i].frame == rt.points[i - 1].frame)
        throw Error("duplicate (vehicle_id, frame) = (" + std::to_string(id) + ", " +
                    std::to_string(rt.points[i].frame) + ")");
    }
    if (rt.points.size() < 2) {
      log::warn("dropping vehicle " + std::to_string(id) + ": fewer than 2 points");
      continue;
    }
    VehicleTrack track;
    track.id = id;
    track.cls = rt.cls;
    track.intersection = rt.intersection;
    track.points.reserve(rt.points.size());
    for (const auto& p : rt.points)
      track.points.push_back({p.frame, Eigen::Vector2d(p.x * scale, p.y * scale), {}});
    recompute_velocities(track);
    ds.tracks.push_back(std::move(track));
  }
  if (ds.tracks.empty()) throw Error("empty dataset: every track had fewer than 2 points");
  return ds;
}

void add_point(std::map<VehicleId, RawTrack>& raw, VehicleId id, VehicleClass cls,
               std::string intersection, RawPoint p, std::size_t line) {
  auto [it, inserted] = raw.try_emplace(id);
  auto& rt = it->second;
  if (inserted) {
    rt.cls = cls;
    rt.intersection = std::move(intersection);
  } else if (rt.intersection != intersection) {
    throw Error("line " + std::to_string(line) + ": vehicle " + std::to_string(id) +
                " appears at two intersections");
  }
  rt.points.push_back(p);
}

}  // namespace

std::string to_string(VehicleClass c) {
  switch (c) {
    case VehicleClass::car: return "car";
    case VehicleClass::bus: return "bus";
    case VehicleClass::two_wheeler: return "two-wheeler";
    case VehicleClass::auto_rickshaw: return "auto-rickshaw";
    case VehicleClass::other: return "other";
  }
  return "other";
}

VehicleClass parse_vehicle_class(std::string_view s) {
  s = trim(s);
  if (s == "car") return VehicleClass::car;
  if (s == "bus") return VehicleClass::bus;
  if (s == "two-wheeler") return VehicleClass::two_wheeler;
  if (s == "auto-rickshaw") return VehicleClass::auto_rickshaw;
  if (s == "other") return VehicleClass::other;
  throw Error("unknown vehicle class '" + std::string(s) + "'");
}

const TrackPoint* VehicleTrack::at(int t) const {
  auto it = std::lower_bound(points.begin(), points.end(), t,
                             [](const TrackPoint& p, int tt) { return p.t < tt; });
  return (it != points.end() && it->t == t) ? &*it : nullptr;
}

const VehicleTrack* TrackDataset::find(VehicleId id) const {
  for (const auto& t : tracks)
    if (t.id == id) return &t;
  return nullptr;
}

void recompute_velocities(VehicleTrack& track) {
  auto& pts = track.points;
  if (pts.size() < 2) throw Error("track " + std::to_string(track.id) + " has fewer than 2 points");
  for (std::size_t i = 1; i < pts.size(); ++i) pts[i].v = pts[i].p - pts[i - 1].p;
  pts[0].v = pts[1].v;
}

TrackDataset read_tracks_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  double scale = 1.0;
  bool header_seen = false;
  std::map<VehicleId, RawTrack> raw;

  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    if (body.front() == '#') {
      constexpr std::string_view key = "scale_m_per_px=";
      const auto pos = body.find(key);
      if (pos != std::string_view::npos) {
        if (!parse_number(body.substr(pos + key.size()), scale) || scale <= 0)
          throw Error("line " + std::to_string(line_no) + ": invalid scale_m_per_px");
      }
      continue;
    }
    if (!header_seen) {
      if (body != "vehicle_id,class,intersection,frame,x_m,y_m")
        throw Error("line " + std::to_string(line_no) +
                    ": expected header 'vehicle_id,class,intersection,frame,x_m,y_m'");
      header_seen = true;
      continue;
    }
    const auto cols = split_csv(body);
    const auto bad = [&](const std::string& why) {
      return Error("line " + std::to_string(line_no) + ": malformed row (" + why + ")");
    };
    if (cols.size() != 6) throw bad("expected 6 columns, got " + std::to_string(cols.size()));
    VehicleId id{};
    RawPoint p{};
    if (!parse_number(cols[0], id)) throw bad("vehicle_id");
    VehicleClass cls;
    try {
      cls = parse_vehicle_class(cols[1]);
    } catch (const Error& e) {
      throw bad(e.what());
    }
    if (!parse_number(cols[3], p.frame)) throw bad("frame");
    if (!parse_number(cols[4], p.x)) throw bad("x_m");
    if (!parse_number(cols[5], p.y)) throw bad("y_m");
    add_point(raw, id, cls, std::string(trim(cols[2])), p, line_no);
  }
  if (!header_seen) throw Error("empty dataset: missing header");
  return assemble(raw, scale);
}

TrackDataset read_tracks_json(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed track JSON: ") + e.what());
  }
  double scale = 1.0;
  const nlohmann::json* arr = &doc;
  if (doc.is_object()) {
    scale = doc.value("scale_m_per_px", 1.0);
    if (!doc.contains("tracks")) throw Error("track JSON object lacks 'tracks'");
    arr = &doc["tracks"];
  }
  if (!arr->is_array()) throw Error("track JSON must be an array of tracks");
  std::map<VehicleId, RawTrack> raw;
  std::size_t index = 0;
  try {
    for (const auto& obj : *arr) {
      ++index;
      const auto id = obj.at("id").get<VehicleId>();
      const auto cls = parse_vehicle_class(obj.at("class").get<std::string>());
      const auto inter = obj.at("intersection").get<std::string>();
      for (const auto& pt : obj.at("points"))
        add_point(raw, id, cls, inter,
                  {pt.at("frame").get<int>(), pt.at("x").get<double>(), pt.at("y").get<double>()},
                  index);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("track " + std::to_string(index) + ": malformed record (" + e.what() + ")");
  }
  return assemble(raw, scale);
}

TrackDataset ingest_tracks(const std::filesystem::path& path, TrackFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open track file " + path.string());
  auto ds = format == TrackFormat::csv ? read_tracks_csv(in) : read_tracks_json(in);
  return ds;
}

void write_tracks_csv(std::ostream& out, const TrackDataset& ds) {
  out << "vehicle_id,class,intersection,frame,x_m,y_m\n";
  char buf[64];
  for (const auto& tr : ds.tracks) {
    for (const auto& p : tr.points) {
      out << tr.id << ',' << to_string(tr.cls) << ',' << tr.intersection << ',' << p.t << ',';
      auto r = std::to_chars(buf, buf + sizeof buf, p.p.x());
      out.write(buf, r.ptr - buf);
      out << ',';
      r = std::to_chars(buf, buf + sizeof buf, p.p.y());
      out.write(buf, r.ptr - buf);
      out << '\n';
    }
  }
}

TrackDataset resample(const TrackDataset& raw, double source_fps, double target_rate) {
  if (!(target_rate > 0)) throw Error("resample: target_rate must be positive");
  if (!(source_fps > 0)) throw Error("resample: source_fps must be positive");
  if (target_rate > source_fps) throw Error("resample: target_rate exceeds source_fps");
  const double step = source_fps / target_rate;

  TrackDataset out;
  out.sample_rate = target_rate;
  for (const auto& tr : raw.tracks) {
    VehicleTrack nt;
    nt.id = tr.id;
    nt.cls = tr.cls;
    nt.intersection = tr.intersection;
    const double f0 = tr.first_t(), f1 = tr.last_t();
    int last_frame = tr.first_t() - 1;
    const auto m_begin = static_cast<long>(std::ceil((f0 - 0.5) / step));
    const auto m_end = static_cast<long>(std::floor((f1 + 0.5) / step));
    for (long m = std::max(0L, m_begin); m <= m_end; ++m) {
      const double x = static_cast<double>(m) * step;
      if (x < f0 - 0.5 || x > f1 + 0.5) continue;
      // nearest observed frame; ties go to the earlier frame
      auto it = std::lower_bound(tr.points.begin(), tr.points.end(), x,
                                 [](const TrackPoint& p, double v) { return p.t < v; });
      const TrackPoint* best = nullptr;
      if (it != tr.points.end()) best = &*it;
      if (it != tr.points.begin()) {
        const auto* prev = &*std::prev(it);
        if (!best || (x - prev->t) <= (best->t - x)) best = prev;
      }
      if (!best || std::abs(best->t - x) > step / 2) continue;
      if (best->t == last_frame) continue;
      last_frame = best->t;
      nt.points.push_back({static_cast<int>(m), best->p, {}});
    }
    if (nt.points.size() < 2) {
      log::warn("resample: dropping vehicle " + std::to_string(tr.id) + ": fewer than 2 points");
      continue;
    }
    recompute_velocities(nt);
    out.tracks.push_back(std::move(nt));
  }
  return out;
}

}  // namespace silstm
