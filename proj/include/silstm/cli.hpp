#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "silstm/energy.hpp"
#include "silstm/recurrent.hpp"
#include "silstm/siamese.hpp"
#include "silstm/simulate.hpp"
#include "silstm/tracks.hpp"

namespace silstm::cli {

/// Raised when a subcommand's input artifact does not exist; maps to exit code 2.
class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(const std::filesystem::path& p)
      : Error("missing input artifact: " + p.string()), path(p) {}
  std::filesystem::path path;
};

/// Experiment bundle. Every section is optional in the JSON file; flags
/// override the corresponding fields.
struct PipelineConfig {
  std::uint64_t seed = 42;
  std::vector<ScenarioConfig> scenarios{ScenarioConfig{}};
  std::optional<std::filesystem::path> tracks_input;  // skip simulation when set
  TrackFormat tracks_format = TrackFormat::csv;
  double source_fps = 3.0;
  double target_rate = 3.0;
  int k_neighbors = 8;
  EnergyFitConfig energy;
  Architecture arch = Architecture::blstm2l_a;
  EncoderOptions encoder;
  TrainConfig train;
  std::uint64_t split_seed = kSplitSeeds[0];
  int knn_k = 5;
  std::filesystem::path out_dir = "out";
};

/// Parses a config document; unknown keys raise an error listing the valid ones.
/// The master seed (from `seed_override`, else the document, else 42) derives
/// every stream seed that a section does not set explicitly.
PipelineConfig parse_config(const nlohmann::json& doc, std::optional<std::uint64_t> seed_override = {});
nlohmann::json load_config_json(const std::filesystem::path& path);

/// Artifact file names inside the output directory.
namespace artifacts {
inline constexpr const char* raw_tracks = "tracks_raw.csv";
inline constexpr const char* truth = "truth.csv";
inline constexpr const char* tracks = "tracks.csv";
inline constexpr const char* interactions = "interactions.jsonl";
inline constexpr const char* params = "params.csv";
inline constexpr const char* scatter = "scatter.csv";
inline constexpr const char* model = "model.json";
inline constexpr const char* scaler = "scaler.json";
inline constexpr const char* split = "split.json";
inline constexpr const char* history = "history.csv";
inline constexpr const char* report = "report.csv";
inline constexpr const char* predictions = "preds.csv";
}  // namespace artifacts

void cmd_simulate(const PipelineConfig& cfg, std::ostream& log);
void cmd_ingest(const PipelineConfig& cfg, std::ostream& log);
void cmd_features(const PipelineConfig& cfg, std::ostream& log);
void cmd_fit_energy(const PipelineConfig& cfg, std::ostream& log);
void cmd_label(const PipelineConfig& cfg, std::ostream& log);
void cmd_train(const PipelineConfig& cfg, std::ostream& log);
void cmd_eval(const PipelineConfig& cfg, std::ostream& log);
void cmd_pipeline(const PipelineConfig& cfg, std::ostream& log);

/// Entry point shared by the executable and the tests. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace silstm::cli
