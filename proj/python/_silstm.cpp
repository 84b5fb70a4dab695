#include <fstream>
#include <iostream>
#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "silstm/cli.hpp"
#include "silstm/energy.hpp"
#include "silstm/eval.hpp"
#include "silstm/interaction.hpp"
#include "silstm/recurrent.hpp"
#include "silstm/siamese.hpp"
#include "silstm/simulate.hpp"
#include "silstm/tracks.hpp"

namespace py = pybind11;
using namespace silstm;

namespace {

using RowMat2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

RowMat2 column_of(const VehicleTrack& tr, bool velocity) {
  RowMat2 m(static_cast<Eigen::Index>(tr.points.size()), 2);
  for (std::size_t i = 0; i < tr.points.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = (velocity ? tr.points[i].v : tr.points[i].p).transpose();
  return m;
}

DistanceKernel parse_kernel(const std::string& k) {
  if (k == "decaying") return DistanceKernel::decaying;
  if (k == "as_printed") return DistanceKernel::as_printed;
  throw Error("kernel must be decaying or as_printed");
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  return in;
}

}  // namespace

PYBIND11_MODULE(_silstm, m) {
  m.doc() = "Collision-prone trajectory detection: tracks, energy labeling, siamese recurrent encoders";
  py::register_exception<Error>(m, "SilstmError", PyExc_ValueError);

  py::class_<VehicleTrack>(m, "VehicleTrack")
      .def_readonly("id", &VehicleTrack::id)
      .def_property_readonly("cls", [](const VehicleTrack& t) { return to_string(t.cls); })
      .def_readonly("intersection", &VehicleTrack::intersection)
      .def_property_readonly("t",
                             [](const VehicleTrack& t) {
                               std::vector<int> ts;
                               for (const auto& p : t.points) ts.push_back(p.t);
                               return ts;
                             })
      .def_property_readonly("positions", [](const VehicleTrack& t) { return column_of(t, false); })
      .def_property_readonly("velocities", [](const VehicleTrack& t) { return column_of(t, true); })
      .def("__len__", [](const VehicleTrack& t) { return t.points.size(); });

  py::class_<TrackDataset>(m, "TrackDataset")
      .def_readonly("tracks", &TrackDataset::tracks)
      .def_readonly("sample_rate", &TrackDataset::sample_rate)
      .def("__len__", [](const TrackDataset& d) { return d.tracks.size(); });

  m.def(
      "read_tracks",
      [](const std::filesystem::path& path, const std::string& format) {
        if (format != "csv" && format != "json") throw Error("format must be csv or json");
        return ingest_tracks(path, format == "csv" ? TrackFormat::csv : TrackFormat::json);
      },
      py::arg("path"), py::arg("format") = "csv");
  m.def(
      "write_tracks_csv",
      [](const TrackDataset& ds, const std::filesystem::path& path) {
        auto out = open_out(path);
        write_tracks_csv(out, ds);
      },
      py::arg("dataset"), py::arg("path"));
  m.def("resample", &resample, py::arg("dataset"), py::arg("source_fps"), py::arg("target_rate") = 3.0);

  m.def(
      "simulate",
      [](std::uint64_t seed, int n_arms, double aggressive_fraction, int duration_steps, bool signalized,
         std::optional<std::map<std::string, int>> counts, const std::string& intersection, VehicleId id_offset) {
        ScenarioConfig cfg;
        cfg.seed = seed;
        cfg.n_arms = n_arms;
        cfg.aggressive_fraction = aggressive_fraction;
        cfg.duration_steps = duration_steps;
        cfg.signalized = signalized;
        cfg.intersection = intersection;
        cfg.id_offset = id_offset;
        if (counts) {
          cfg.counts.clear();
          for (const auto& [cls, n] : *counts) cfg.counts[parse_vehicle_class(cls)] = n;
        }
        py::gil_scoped_release release;
        auto sc = generate(cfg);
        return std::make_pair(std::move(sc.tracks), std::move(sc.aggressive));
      },
      py::arg("seed") = 1, py::arg("n_arms") = 4, py::arg("aggressive_fraction") = 0.5,
      py::arg("duration_steps") = 240, py::arg("signalized") = false, py::arg("counts") = py::none(),
      py::arg("intersection") = "S", py::arg("id_offset") = 0,
      "Synthetic intersection scenario. Returns (TrackDataset, {vehicle_id: aggressive}).");

  py::class_<InteractionTrajectory>(m, "InteractionTrajectory")
      .def_readonly("vehicle_id", &InteractionTrajectory::vehicle_id)
      .def_readonly("intersection", &InteractionTrajectory::intersection)
      .def_property(
          "label", [](const InteractionTrajectory& t) { return to_string(t.label); },
          [](InteractionTrajectory& t, const std::string& l) { t.label = parse_safety_label(l); })
      .def_property_readonly("n_steps", &InteractionTrajectory::n_steps)
      .def_property_readonly("feature_dim", &InteractionTrajectory::feature_dim)
      .def("sequence", &InteractionTrajectory::sequence, "Feature matrix, one column per step.");

  m.def("build_interactions", &build_interactions, py::arg("dataset"), py::arg("k") = 8);

  m.def(
      "collision_energy",
      [](const Eigen::Vector2d& v_cand, const Eigen::Vector2d& p, const Eigen::Vector2d& v, const RowMat2& others_p,
         const RowMat2& others_v, double sigma_d, double sigma_w, double beta, const std::string& kernel) {
        if (others_p.rows() != others_v.rows()) throw Error("others_p and others_v must have the same row count");
        std::vector<AgentState> others;
        for (Eigen::Index i = 0; i < others_p.rows(); ++i)
          others.push_back({others_p.row(i).transpose(), others_v.row(i).transpose()});
        return collision_energy(v_cand, AgentState{p, v}, others, CollisionParams{sigma_d, sigma_w, beta},
                                parse_kernel(kernel));
      },
      py::arg("v_cand"), py::arg("p"), py::arg("v"), py::arg("others_p"), py::arg("others_v"), py::arg("sigma_d"),
      py::arg("sigma_w"), py::arg("beta"), py::arg("kernel") = "decaying");

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("vehicle_id", &FitResult::vehicle_id)
      .def_property_readonly("sigma_d", [](const FitResult& f) { return f.params.sigma_d; })
      .def_property_readonly("sigma_w", [](const FitResult& f) { return f.params.sigma_w; })
      .def_property_readonly("beta", [](const FitResult& f) { return f.params.beta; })
      .def_readonly("objective", &FitResult::objective)
      .def_readonly("isolated", &FitResult::isolated);

  const EnergyFitConfig fit_defaults;
  m.def(
      "fit_energy",
      [](const TrackDataset& ds, double prior_weight, double prior_length_d, double prior_length_w, int population,
         int generations, std::uint64_t seed, const std::string& kernel) {
        EnergyFitConfig cfg;
        cfg.prior_weight = prior_weight;
        cfg.prior_length_d = prior_length_d;
        cfg.prior_length_w = prior_length_w;
        cfg.ga.population = population;
        cfg.ga.generations = generations;
        cfg.ga.seed = seed;
        cfg.kernel = parse_kernel(kernel);
        py::gil_scoped_release release;
        return fit_all(ds, cfg);
      },
      py::arg("dataset"), py::arg("prior_weight") = fit_defaults.prior_weight,
      py::arg("prior_length_d") = fit_defaults.prior_length_d,
      py::arg("prior_length_w") = fit_defaults.prior_length_w, py::arg("population") = fit_defaults.ga.population,
      py::arg("generations") = fit_defaults.ga.generations, py::arg("seed") = fit_defaults.ga.seed,
      py::arg("kernel") = "decaying");

  m.def(
      "label_fits",
      [](const std::vector<FitResult>& fits) {
        const auto lab = label_dataset(fits);
        std::map<VehicleId, std::string> out;
        for (std::size_t i = 0; i < lab.fits.size(); ++i) out[lab.fits[i].vehicle_id] = to_string(lab.labels[i]);
        return out;
      },
      py::arg("fits"), "2-means labeling. Returns {vehicle_id: 'unsafe' | 'safe'}.");

  py::class_<EncoderModel>(m, "EncoderModel")
      .def_readonly("input_dim", &EncoderModel::input_dim)
      .def_readonly("arch", &EncoderModel::arch_tag)
      .def_property_readonly("output_dim", &EncoderModel::output_dim)
      .def_property_readonly("parameter_count", &EncoderModel::parameter_count)
      .def_property_readonly("has_attention", [](const EncoderModel& e) { return e.attention.has_value(); });

  m.def("architectures", [] {
    std::vector<std::string> out;
    for (auto a : all_architectures()) out.push_back(to_string(a));
    return out;
  });

  const EncoderOptions enc_defaults;
  m.def(
      "make_encoder",
      [](const std::string& arch, int input_dim, std::vector<int> hidden, int attention_units, std::uint64_t seed) {
        EncoderOptions opts;
        opts.hidden = std::move(hidden);
        opts.attention_units = attention_units;
        opts.seed = seed;
        return make_encoder(parse_architecture(arch), input_dim, opts);
      },
      py::arg("arch"), py::arg("input_dim"), py::arg("hidden") = enc_defaults.hidden,
      py::arg("attention_units") = enc_defaults.attention_units, py::arg("seed") = enc_defaults.seed);

  m.def(
      "encode",
      [](const EncoderModel& model, const Eigen::MatrixXd& seq) -> py::tuple {
        const auto enc = encode(model, seq, Mode::infer);
        if (model.attention) return py::make_tuple(enc.context, enc.attention_weights);
        return py::make_tuple(enc.context, py::none());
      },
      py::arg("model"), py::arg("sequence"),
      "Inference-mode context vector and attention weights (None without attention). "
      "`sequence` has one column per step.");

  m.def(
      "save_model",
      [](const EncoderModel& model, const std::filesystem::path& path) {
        auto out = open_out(path);
        save_model(out, model);
      },
      py::arg("model"), py::arg("path"));
  m.def(
      "load_model",
      [](const std::filesystem::path& path) {
        auto in = open_in(path);
        return load_model(in);
      },
      py::arg("path"));

  m.def("triplet_loss", &triplet_loss, py::arg("anchor"), py::arg("positive"), py::arg("negative"),
        py::arg("margin") = 1.0);

  m.def(
      "knn_classify",
      [](const Eigen::MatrixXd& train, const std::vector<std::string>& labels, const Eigen::VectorXd& query,
         int knn_k) {
        std::vector<SafetyLabel> ls;
        for (const auto& l : labels) ls.push_back(parse_safety_label(l));
        return to_string(knn_classify(train, ls, query, knn_k));
      },
      py::arg("train"), py::arg("labels"), py::arg("query"), py::arg("knn_k") = 5,
      "Majority label among the knn_k nearest training columns.");

  m.def(
      "evaluate",
      [](const EncoderModel& model, const std::vector<InteractionTrajectory>& train_set,
         const std::vector<InteractionTrajectory>& test_set, int knn_k) {
        Evaluation ev;
        {
          py::gil_scoped_release release;
          ev = evaluate(model, train_set, test_set, knn_k);
        }
        py::list scopes;
        for (const auto& s : ev.report.scopes)
          scopes.append(py::dict(py::arg("scope") = s.scope, py::arg("recall") = s.recall,
                                 py::arg("precision") = s.precision, py::arg("f1") = s.f1));
        py::list preds;
        for (const auto& p : ev.predictions)
          preds.append(py::dict(py::arg("vehicle_id") = p.vehicle_id, py::arg("true") = to_string(p.truth),
                                py::arg("pred") = to_string(p.pred), py::arg("dist_to_1nn") = p.dist_to_1nn));
        return py::dict(py::arg("arch") = ev.report.arch, py::arg("k_neighbors") = ev.report.k_neighbors,
                        py::arg("knn_k") = ev.report.knn_k, py::arg("scopes") = scopes,
                        py::arg("predictions") = preds);
      },
      py::arg("model"), py::arg("train_set"), py::arg("test_set"), py::arg("knn_k") = 5);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process. Returns (exit_code, stdout, stderr).");
}
