#include "silstm/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "silstm/eval.hpp"
#include "silstm/interaction.hpp"

namespace silstm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

// stream ids for seeds derived from the master seed
enum : std::uint64_t { kStreamGa = 2, kStreamInit = 3, kStreamTrain = 4, kStreamScenario = 100 };

void check_keys(const json& obj, const std::string& section, std::initializer_list<const char*> valid) {
  if (!obj.is_object()) throw Error("config: section '" + section + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find_if(valid.begin(), valid.end(), [&](const char* v) { return key == v; }) != valid.end()) continue;
    std::string list;
    for (const char* v : valid) list += (list.empty() ? "" : ", ") + std::string(v);
    throw Error("config: unknown key '" + key + "' in " + section + "; valid keys: " + list);
  }
}

template <class T>
void read(const json& obj, const char* key, T& dst, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error("config: " + section + "." + key + " has the wrong type");
  }
}

void parse_scenario(const json& s, ScenarioConfig& sc, const std::string& where, bool& seed_set, bool& name_set) {
  check_keys(s, where,
             {"n_arms", "signalized", "counts", "aggressive_fraction", "duration_steps", "sample_rate", "substeps",
              "arm_length", "road_half_width", "spawn_window", "intersection", "id_offset", "seed"});
  read(s, "n_arms", sc.n_arms, where);
  read(s, "signalized", sc.signalized, where);
  read(s, "aggressive_fraction", sc.aggressive_fraction, where);
  read(s, "duration_steps", sc.duration_steps, where);
  read(s, "sample_rate", sc.sample_rate, where);
  read(s, "substeps", sc.substeps, where);
  read(s, "arm_length", sc.arm_length, where);
  read(s, "road_half_width", sc.road_half_width, where);
  read(s, "spawn_window", sc.spawn_window, where);
  if (s.contains("intersection")) {
    read(s, "intersection", sc.intersection, where);
    name_set = true;
  }
  read(s, "id_offset", sc.id_offset, where);
  if (s.contains("seed")) {
    read(s, "seed", sc.seed, where);
    seed_set = true;
  }
  if (s.contains("counts")) {
    const auto& c = s.at("counts");
    if (!c.is_object()) throw Error("config: " + where + ".counts must be an object of class -> count");
    sc.counts.clear();
    for (const auto& [cls, n] : c.items()) {
      VehicleClass vc;
      try {
        vc = parse_vehicle_class(cls);
      } catch (const Error&) {
        throw Error("config: unknown key '" + cls + "' in " + where +
                    ".counts; valid keys: car, bus, two-wheeler, auto-rickshaw, other");
      }
      if (!n.is_number_integer()) throw Error("config: " + where + ".counts." + cls + " must be an integer");
      sc.counts[vc] = n.get<int>();
    }
  }
}

void parse_simulate(const json& sec, PipelineConfig& cfg, std::uint64_t master) {
  // section-level keys are defaults for every entry of `scenarios`
  json defaults = sec;
  json list = json::array({json::object()});
  if (sec.contains("scenarios")) {
    list = sec.at("scenarios");
    if (!list.is_array() || list.empty()) throw Error("config: simulate.scenarios must be a non-empty array");
    defaults.erase("scenarios");
  }
  ScenarioConfig base;
  bool base_seed = false, base_name = false;
  parse_scenario(defaults, base, "simulate", base_seed, base_name);

  cfg.scenarios.clear();
  VehicleId next_offset = base.id_offset;
  for (std::size_t i = 0; i < list.size(); ++i) {
    ScenarioConfig sc = base;
    bool seed_set = base_seed, name_set = base_name;
    parse_scenario(list[i], sc, "simulate.scenarios[" + std::to_string(i) + "]", seed_set, name_set);
    if (!seed_set) sc.seed = mix_seed(master, kStreamScenario + i);
    if (!name_set && list.size() > 1) sc.intersection = "S" + std::to_string(i + 1);
    if (i > 0 && !list[i].contains("id_offset")) sc.id_offset = next_offset;
    next_offset = sc.id_offset + sc.total_agents();
    cfg.scenarios.push_back(std::move(sc));
  }
}

void parse_tracks(const json& sec, PipelineConfig& cfg) {
  check_keys(sec, "tracks", {"input", "format", "source_fps", "target_rate"});
  if (sec.contains("input")) {
    std::string p;
    read(sec, "input", p, "tracks");
    cfg.tracks_input = p;
  }
  if (sec.contains("format")) {
    std::string f;
    read(sec, "format", f, "tracks");
    if (f == "csv") cfg.tracks_format = TrackFormat::csv;
    else if (f == "json") cfg.tracks_format = TrackFormat::json;
    else throw Error("config: tracks.format must be csv or json");
  }
  read(sec, "source_fps", cfg.source_fps, "tracks");
  read(sec, "target_rate", cfg.target_rate, "tracks");
}

void parse_energy(const json& sec, PipelineConfig& cfg, bool& seed_set) {
  check_keys(sec, "energy", {"prior_weight", "prior_length_d", "prior_length_w", "kernel", "ga"});
  auto& e = cfg.energy;
  read(sec, "prior_weight", e.prior_weight, "energy");
  read(sec, "prior_length_d", e.prior_length_d, "energy");
  read(sec, "prior_length_w", e.prior_length_w, "energy");
  if (sec.contains("kernel")) {
    std::string k;
    read(sec, "kernel", k, "energy");
    if (k == "decaying") e.kernel = DistanceKernel::decaying;
    else if (k == "as_printed") e.kernel = DistanceKernel::as_printed;
    else throw Error("config: energy.kernel must be decaying or as_printed");
  }
  if (sec.contains("ga")) {
    const auto& g = sec.at("ga");
    check_keys(g, "energy.ga",
               {"population", "generations", "tournament", "blend_alpha", "mutation_scale", "mutation_prob", "elitism",
                "seed"});
    read(g, "population", e.ga.population, "energy.ga");
    read(g, "generations", e.ga.generations, "energy.ga");
    read(g, "tournament", e.ga.tournament, "energy.ga");
    read(g, "blend_alpha", e.ga.blend_alpha, "energy.ga");
    read(g, "mutation_scale", e.ga.mutation_scale, "energy.ga");
    read(g, "mutation_prob", e.ga.mutation_prob, "energy.ga");
    read(g, "elitism", e.ga.elitism, "energy.ga");
    if (g.contains("seed")) {
      read(g, "seed", e.ga.seed, "energy.ga");
      seed_set = true;
    }
  }
}

void parse_model(const json& sec, PipelineConfig& cfg, bool& seed_set) {
  check_keys(sec, "model", {"arch", "hidden", "attention_units", "dropout", "seed"});
  if (sec.contains("arch")) {
    std::string a;
    read(sec, "arch", a, "model");
    cfg.arch = parse_architecture(a);
  }
  read(sec, "hidden", cfg.encoder.hidden, "model");
  read(sec, "attention_units", cfg.encoder.attention_units, "model");
  if (sec.contains("dropout")) {
    const auto& d = sec.at("dropout");
    check_keys(d, "model.dropout", {"recurrent", "activation", "attention"});
    read(d, "recurrent", cfg.encoder.dropout.recurrent, "model.dropout");
    read(d, "activation", cfg.encoder.dropout.activation, "model.dropout");
    read(d, "attention", cfg.encoder.dropout.attention, "model.dropout");
  }
  if (sec.contains("seed")) {
    read(sec, "seed", cfg.encoder.seed, "model");
    seed_set = true;
  }
}

void parse_train(const json& sec, PipelineConfig& cfg, bool& seed_set) {
  check_keys(sec, "train",
             {"epochs", "batch_triplets", "triplets_per_epoch", "optimizer", "learning_rate", "beta1", "beta2",
              "adam_eps", "margin", "train_ratio", "test_ratio", "val_ratio", "mining", "semi_hard_pool",
              "split_index", "split_seed", "seed"});
  auto& t = cfg.train;
  read(sec, "epochs", t.epochs, "train");
  read(sec, "batch_triplets", t.batch_triplets, "train");
  read(sec, "triplets_per_epoch", t.triplets_per_epoch, "train");
  read(sec, "learning_rate", t.learning_rate, "train");
  read(sec, "beta1", t.beta1, "train");
  read(sec, "beta2", t.beta2, "train");
  read(sec, "adam_eps", t.adam_eps, "train");
  read(sec, "margin", t.margin, "train");
  read(sec, "train_ratio", t.train_ratio, "train");
  read(sec, "test_ratio", t.test_ratio, "train");
  read(sec, "val_ratio", t.val_ratio, "train");
  read(sec, "semi_hard_pool", t.semi_hard_pool, "train");
  if (sec.contains("optimizer")) {
    std::string o;
    read(sec, "optimizer", o, "train");
    if (o == "adam") t.optimizer = OptimizerKind::adam;
    else if (o == "sgd") t.optimizer = OptimizerKind::sgd;
    else throw Error("config: train.optimizer must be adam or sgd");
  }
  if (sec.contains("mining")) {
    std::string m;
    read(sec, "mining", m, "train");
    if (m == "random") t.mining = Mining::random;
    else if (m == "semi_hard") t.mining = Mining::semi_hard;
    else throw Error("config: train.mining must be random or semi_hard");
  }
  if (sec.contains("split_index") && sec.contains("split_seed"))
    throw Error("config: train.split_index and train.split_seed are mutually exclusive");
  if (sec.contains("split_index")) {
    int idx = 0;
    read(sec, "split_index", idx, "train");
    if (idx < 0 || idx >= static_cast<int>(kSplitSeeds.size()))
      throw Error("config: train.split_index must be 0, 1 or 2");
    cfg.split_seed = kSplitSeeds[static_cast<std::size_t>(idx)];
  }
  read(sec, "split_seed", cfg.split_seed, "train");
  if (sec.contains("seed")) {
    read(sec, "seed", t.seed, "train");
    seed_set = true;
  }
}

std::ifstream open_in(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifact(p);
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

TrackDataset load_tracks(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifact(p);
  return ingest_tracks(p, TrackFormat::csv);
}

std::vector<InteractionTrajectory> load_interactions(const fs::path& p) {
  auto in = open_in(p);
  return read_interactions_jsonl(in);
}

ParamsTable load_params(const fs::path& p) {
  auto in = open_in(p);
  return read_params_csv(in);
}

// attaches labels from params.csv; vehicles absent from the table stay unlabeled
std::vector<InteractionTrajectory> labeled_interactions(const PipelineConfig& cfg) {
  auto trajs = load_interactions(cfg.out_dir / artifacts::interactions);
  const auto params = load_params(cfg.out_dir / artifacts::params);
  std::map<VehicleId, SafetyLabel> labels;
  for (std::size_t i = 0; i < params.fits.size(); ++i) labels[params.fits[i].vehicle_id] = params.labels[i];
  std::vector<InteractionTrajectory> out;
  for (auto& t : trajs) {
    const auto it = labels.find(t.vehicle_id);
    if (it == labels.end() || it->second == SafetyLabel::unlabeled) continue;
    t.label = it->second;
    out.push_back(std::move(t));
  }
  if (out.empty()) throw Error("no labeled trajectories; run `label` first");
  return out;
}

struct SplitSets {
  std::vector<InteractionTrajectory> train, test, validation;
};

SplitSets gather(const std::vector<InteractionTrajectory>& all, const Split& split, const FeatureScaler* scaler) {
  SplitSets s;
  const auto take = [&](const std::vector<std::size_t>& idx, std::vector<InteractionTrajectory>& dst) {
    for (auto i : idx) dst.push_back(scaler ? apply_scaler(*scaler, all[i]) : all[i]);
  };
  take(split.train, s.train);
  take(split.test, s.test);
  take(split.validation, s.validation);
  return s;
}

json split_to_json(const std::vector<InteractionTrajectory>& all, const Split& split, std::uint64_t seed) {
  const auto ids = [&](const std::vector<std::size_t>& idx) {
    std::vector<VehicleId> v;
    for (auto i : idx) v.push_back(all[i].vehicle_id);
    return v;
  };
  return json{{"split_seed", seed}, {"train", ids(split.train)}, {"test", ids(split.test)},
              {"validation", ids(split.validation)}};
}

Split split_from_json(const json& j, const std::vector<InteractionTrajectory>& all) {
  std::map<VehicleId, std::size_t> index;
  for (std::size_t i = 0; i < all.size(); ++i) index[all[i].vehicle_id] = i;
  const auto idx = [&](const char* key) {
    std::vector<std::size_t> v;
    for (const auto& id : j.at(key)) {
      const auto it = index.find(id.get<VehicleId>());
      if (it == index.end())
        throw Error("split.json references vehicle " + std::to_string(id.get<VehicleId>()) +
                    " that has no labeled trajectory");
      v.push_back(it->second);
    }
    return v;
  };
  try {
    return Split{idx("train"), idx("test"), idx("validation")};
  } catch (const json::exception& e) {
    throw Error(std::string("split.json: ") + e.what());
  }
}

std::string split_tag(std::uint64_t seed) { return std::to_string(seed); }

}  // namespace

PipelineConfig parse_config(const json& doc, std::optional<std::uint64_t> seed_override) {
  check_keys(doc, "config",
             {"seed", "out", "k_neighbors", "simulate", "tracks", "energy", "model", "train", "eval"});
  PipelineConfig cfg;
  std::uint64_t master = kDefaultSeed;
  read(doc, "seed", master, "config");
  if (seed_override) master = *seed_override;
  cfg.seed = master;

  if (doc.contains("out")) {
    std::string o;
    read(doc, "out", o, "config");
    cfg.out_dir = o;
  }
  read(doc, "k_neighbors", cfg.k_neighbors, "config");

  parse_simulate(doc.value("simulate", json::object()), cfg, master);
  if (doc.contains("tracks")) parse_tracks(doc.at("tracks"), cfg);

  bool ga_seed = false, init_seed = false, train_seed = false;
  if (doc.contains("energy")) parse_energy(doc.at("energy"), cfg, ga_seed);
  if (doc.contains("model")) parse_model(doc.at("model"), cfg, init_seed);
  if (doc.contains("train")) parse_train(doc.at("train"), cfg, train_seed);
  if (doc.contains("eval")) {
    check_keys(doc.at("eval"), "eval", {"knn_k"});
    read(doc.at("eval"), "knn_k", cfg.knn_k, "eval");
  }
  if (!ga_seed) cfg.energy.ga.seed = mix_seed(master, kStreamGa);
  if (!init_seed) cfg.encoder.seed = mix_seed(master, kStreamInit);
  if (!train_seed) cfg.train.seed = mix_seed(master, kStreamTrain);
  cfg.train.k_neighbors = cfg.k_neighbors;
  return cfg;
}

json load_config_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
}

void cmd_simulate(const PipelineConfig& cfg, std::ostream& log) {
  std::vector<Scenario> scenes(cfg.scenarios.size());
  parallel_for(scenes.size(), [&](std::size_t i) { scenes[i] = generate(cfg.scenarios[i]); });

  TrackDataset all;
  all.sample_rate = cfg.scenarios.front().sample_rate;
  Scenario truth;
  std::set<VehicleId> seen;
  for (auto& sc : scenes) {
    if (sc.tracks.sample_rate != all.sample_rate) throw Error("simulate: scenarios must share one sample_rate");
    for (auto& tr : sc.tracks.tracks) {
      if (!seen.insert(tr.id).second)
        throw Error("simulate: vehicle id " + std::to_string(tr.id) + " appears in two scenarios; set id_offset");
      all.tracks.push_back(std::move(tr));
    }
    truth.aggressive.insert(sc.aggressive.begin(), sc.aggressive.end());
  }
  {
    auto out = open_out(cfg.out_dir / artifacts::raw_tracks);
    write_tracks_csv(out, all);
  }
  {
    auto out = open_out(cfg.out_dir / artifacts::truth);
    write_truth_csv(out, truth);
  }
  log << "simulate: " << all.tracks.size() << " tracks from " << scenes.size() << " scenario(s)\n";
}

void cmd_ingest(const PipelineConfig& cfg, std::ostream& log) {
  const fs::path src = cfg.tracks_input.value_or(cfg.out_dir / artifacts::raw_tracks);
  if (!fs::exists(src)) throw MissingArtifact(src);
  const auto raw = ingest_tracks(src, cfg.tracks_format);
  const auto ds = resample(raw, cfg.source_fps, cfg.target_rate);
  auto out = open_out(cfg.out_dir / artifacts::tracks);
  write_tracks_csv(out, ds);
  log << "ingest: " << ds.tracks.size() << " tracks at " << cfg.target_rate << " steps/s\n";
}

void cmd_features(const PipelineConfig& cfg, std::ostream& log) {
  const auto ds = load_tracks(cfg.out_dir / artifacts::tracks);
  const auto trajs = build_interactions(ds, cfg.k_neighbors);
  auto out = open_out(cfg.out_dir / artifacts::interactions);
  write_interactions_jsonl(out, trajs);
  log << "features: " << trajs.size() << " trajectories, k=" << cfg.k_neighbors << "\n";
}

void cmd_fit_energy(const PipelineConfig& cfg, std::ostream& log) {
  const auto ds = load_tracks(cfg.out_dir / artifacts::tracks);
  const auto fits = fit_all(ds, cfg.energy);
  auto out = open_out(cfg.out_dir / artifacts::params);
  write_params_csv(out, fits);
  const auto isolated = std::count_if(fits.begin(), fits.end(), [](const FitResult& f) { return f.isolated; });
  log << "fit-energy: " << fits.size() << " vehicles (" << isolated << " isolated)\n";
}

void cmd_label(const PipelineConfig& cfg, std::ostream& log) {
  const auto table = load_params(cfg.out_dir / artifacts::params);
  const auto lab = label_dataset(table.fits);
  {
    auto out = open_out(cfg.out_dir / artifacts::params);
    write_params_csv(out, lab.fits, &lab.labels);
  }
  {
    auto out = open_out(cfg.out_dir / artifacts::scatter);
    write_scatter_csv(out, lab);
  }
  const auto unsafe = std::count(lab.labels.begin(), lab.labels.end(), SafetyLabel::unsafe);
  log << "label: " << unsafe << " unsafe of " << lab.labels.size() << "\n";
}

void cmd_train(const PipelineConfig& cfg, std::ostream& log) {
  const auto all = labeled_interactions(cfg);
  const auto split = split_dataset(all, cfg.train, cfg.split_seed);
  const auto raw = gather(all, split, nullptr);
  const auto scaler = fit_scaler(raw.train);
  const auto sets = gather(all, split, &scaler);

  const auto init = make_encoder(cfg.arch, static_cast<int>(all.front().feature_dim()), cfg.encoder);
  const auto result = train(init, sets.train, sets.validation, cfg.train);

  {
    auto out = open_out(cfg.out_dir / artifacts::model);
    save_model(out, result.model);
  }
  {
    auto out = open_out(cfg.out_dir / artifacts::scaler);
    save_scaler(out, scaler);
  }
  {
    auto out = open_out(cfg.out_dir / artifacts::split);
    out << split_to_json(all, split, cfg.split_seed).dump() << '\n';
  }
  {
    auto out = open_out(cfg.out_dir / artifacts::history);
    write_history_csv(out, result.history);
  }
  log << "train: " << to_string(cfg.arch) << " on " << sets.train.size() << " trajectories, best val loss "
      << result.best_val_loss << " at epoch " << result.best_epoch << "\n";
}

void cmd_eval(const PipelineConfig& cfg, std::ostream& log) {
  EncoderModel model;
  {
    auto in = open_in(cfg.out_dir / artifacts::model);
    model = load_model(in);
  }
  FeatureScaler scaler;
  {
    auto in = open_in(cfg.out_dir / artifacts::scaler);
    scaler = load_scaler(in);
  }
  json split_doc;
  {
    auto in = open_in(cfg.out_dir / artifacts::split);
    try {
      split_doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(std::string("split.json: ") + e.what());
    }
  }
  const auto all = labeled_interactions(cfg);
  if (static_cast<int>(all.front().feature_dim()) != model.input_dim)
    throw Error("eval: model expects input dimension " + std::to_string(model.input_dim) +
                " but interactions have " + std::to_string(all.front().feature_dim()) +
                "; rerun features with the k used for training");
  const auto split = split_from_json(split_doc, all);
  const auto sets = gather(all, split, &scaler);
  auto ev = evaluate(model, sets.train, sets.test, cfg.knn_k);
  ev.report.split = split_tag(split_doc.value("split_seed", cfg.split_seed));
  {
    auto out = open_out(cfg.out_dir / artifacts::report);
    write_report_csv(out, {ev.report});
  }
  {
    auto out = open_out(cfg.out_dir / artifacts::predictions);
    write_predictions_csv(out, ev.predictions);
  }
  const auto& o = ev.report.overall();
  log << "eval: recall " << o.recall << " precision " << o.precision << " f1 " << o.f1 << " on "
      << sets.test.size() << " test trajectories\n";
}

void cmd_pipeline(const PipelineConfig& cfg, std::ostream& log) {
  if (!cfg.tracks_input) cmd_simulate(cfg, log);
  cmd_ingest(cfg, log);
  cmd_features(cfg, log);
  cmd_fit_energy(cfg, log);
  cmd_label(cfg, log);
  cmd_train(cfg, log);
  cmd_eval(cfg, log);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Collision-prone trajectory detection with siamese recurrent encoders", "silstm"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> k_neighbors;
  std::optional<std::string> arch;
  std::optional<std::string> out_dir;
  std::optional<std::string> input;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file with per-module sections");
    sub->add_option("--seed", seed, "Master seed for every random stream");
    sub->add_option("--k-neighbors", k_neighbors, "Neighbors per interaction step (default 8)");
    sub->add_option("--arch", arch, "Encoder architecture")
        ->check(CLI::IsMember({"lstm2l", "lstm2l_a", "gru2l", "gru2l_a", "blstm1l_a", "blstm2l", "blstm2l_a"}));
    sub->add_option("--out", out_dir, "Artifact directory (default out)");
  };

  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "Generate synthetic intersection tracks and ground truth"},
      {"ingest", "Read raw tracks and resample them to the model rate"},
      {"features", "Build neighbor interaction sequences"},
      {"fit-energy", "Fit collision-energy parameters per vehicle"},
      {"label", "Cluster energy parameters into safe and unsafe"},
      {"train", "Train the siamese encoder with triplet loss"},
      {"eval", "Evaluate kNN retrieval of unsafe trajectories"},
      {"pipeline", "Run every step in order"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (name == "ingest" || name == "pipeline")
      sub->add_option("--input", input, "Raw track file (CSV or JSON by extension)");
    subs[name] = sub;
  }

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    json doc = config_path.empty() ? json::object() : load_config_json(config_path);
    auto cfg = parse_config(doc, seed);
    if (k_neighbors) {
      if (*k_neighbors < 1) throw Error("--k-neighbors must be positive");
      cfg.k_neighbors = cfg.train.k_neighbors = *k_neighbors;
    }
    if (arch) cfg.arch = parse_architecture(*arch);
    if (out_dir) cfg.out_dir = *out_dir;
    if (input) {
      cfg.tracks_input = *input;
      const auto ext = fs::path(*input).extension().string();
      cfg.tracks_format = ext == ".json" ? TrackFormat::json : TrackFormat::csv;
    }

    const auto& name = app.get_subcommands().front()->get_name();
    if (name == "simulate") cmd_simulate(cfg, err);
    else if (name == "ingest") cmd_ingest(cfg, err);
    else if (name == "features") cmd_features(cfg, err);
    else if (name == "fit-energy") cmd_fit_energy(cfg, err);
    else if (name == "label") cmd_label(cfg, err);
    else if (name == "train") cmd_train(cfg, err);
    else if (name == "eval") cmd_eval(cfg, err);
    else cmd_pipeline(cfg, err);
  } catch (const MissingArtifact& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace silstm::cli
