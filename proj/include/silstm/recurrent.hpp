#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "silstm/interaction.hpp"

namespace silstm {

enum class CellKind { lstm, gru };

/// Weights of one recurrent cell with gate blocks stacked row-wise.
/// LSTM blocks: [input, forget, output, candidate]; GRU blocks: [update, reset, candidate].
struct CellParams {
  CellKind kind = CellKind::lstm;
  Eigen::MatrixXd W;  // (gates*H) x input_dim
  Eigen::MatrixXd U;  // (gates*H) x H
  Eigen::VectorXd b;  // gates*H

  static int gates(CellKind kind) { return kind == CellKind::lstm ? 4 : 3; }
  static CellParams zeros(CellKind kind, int input_dim, int hidden_dim);
  int input_dim() const { return static_cast<int>(W.cols()); }
  int hidden_dim() const { return static_cast<int>(U.cols()); }
};

struct LstmState {
  Eigen::VectorXd h;
  Eigen::VectorXd s;
};

/// One LSTM step: logistic input/forget/output gates, tanh candidate and tanh
/// output squashing.
LstmState lstm_step(const CellParams& params, const Eigen::VectorXd& a, const Eigen::VectorXd& h_prev,
                    const Eigen::VectorXd& s_prev);

/// One GRU step: h = z * tanh(W_n a + U_n (r * h_prev)) + (1 - z) * h_prev.
Eigen::VectorXd gru_step(const CellParams& params, const Eigen::VectorXd& a, const Eigen::VectorXd& h_prev);

enum class Architecture { lstm2l, lstm2l_a, gru2l, gru2l_a, blstm1l_a, blstm2l, blstm2l_a };

std::string to_string(Architecture a);
Architecture parse_architecture(std::string_view s);
std::span<const Architecture> all_architectures();

struct LayerSpec {
  CellKind kind = CellKind::lstm;
  int hidden = 64;  // per direction
  bool bidirectional = false;
  bool relu = true;
};

struct DropoutRates {
  double recurrent = 0.5;
  double activation = 0.5;
  double attention = 0.1;
};

/// Additive attention: e_n = u . tanh(W h_n + b), alpha = softmax(e).
struct AttentionParams {
  Eigen::MatrixXd W;  // units x D
  Eigen::VectorXd b;  // units
  Eigen::VectorXd u;  // units
  int units() const { return static_cast<int>(W.rows()); }
};

/// Stacked (bi)directional recurrent encoder with optional attention pooling.
/// Without attention the context is the final-step output of each direction.
struct EncoderModel {
  int input_dim = 0;
  std::vector<LayerSpec> layers;
  std::vector<std::vector<CellParams>> cells;  // [layer][direction]
  std::optional<AttentionParams> attention;
  DropoutRates dropout;
  std::string arch_tag;

  int layer_output_dim(std::size_t layer) const;
  int output_dim() const { return layer_output_dim(layers.size() - 1); }
  void validate() const;
  /// Same architecture with every parameter set to zero; used as a gradient buffer.
  EncoderModel zeros_like() const;
  std::size_t parameter_count() const;

  template <typename F>
  void for_each_parameter(F&& f) {
    for_each_parameter_impl(*this, f);
  }
  template <typename F>
  void for_each_parameter(F&& f) const {
    for_each_parameter_impl(*this, f);
  }

 private:
  template <typename Self, typename F>
  static void for_each_parameter_impl(Self& self, F& f);
};

template <typename Self, typename F>
void EncoderModel::for_each_parameter_impl(Self& self, F& f) {
  const auto view = [](auto& m) {
    using T = std::conditional_t<std::is_const_v<std::remove_reference_t<decltype(m)>>, const double, double>;
    return std::span<T>(m.data(), static_cast<std::size_t>(m.size()));
  };
  for (std::size_t l = 0; l < self.cells.size(); ++l) {
    for (std::size_t d = 0; d < self.cells[l].size(); ++d) {
      const std::string prefix = "layer" + std::to_string(l) + (d == 0 ? ".fwd." : ".bwd.");
      f(prefix + "W", view(self.cells[l][d].W));
      f(prefix + "U", view(self.cells[l][d].U));
      f(prefix + "b", view(self.cells[l][d].b));
    }
  }
  if (self.attention) {
    f(std::string("attention.W"), view(self.attention->W));
    f(std::string("attention.b"), view(self.attention->b));
    f(std::string("attention.u"), view(self.attention->u));
  }
}

struct EncoderOptions {
  std::vector<int> hidden{64, 32};  // per layer, per direction
  int attention_units = 32;
  DropoutRates dropout;
  std::uint64_t seed = 1;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, forget-gate bias +1.
EncoderModel make_encoder(std::vector<LayerSpec> layers, bool with_attention, int input_dim,
                          const EncoderOptions& opts = {});
EncoderModel make_encoder(Architecture arch, int input_dim, const EncoderOptions& opts = {});

enum class Mode { train, infer };

/// Per-sequence dropout masks (already scaled by 1/(1-p)).
struct DropoutMasks {
  std::vector<std::vector<Eigen::VectorXd>> recurrent;  // [layer][direction], size H
  std::vector<Eigen::VectorXd> activation;              // [layer], size layer output
  Eigen::VectorXd attention;                            // size units (empty without attention)
};

DropoutMasks identity_masks(const EncoderModel& model);
DropoutMasks sample_masks(const EncoderModel& model, std::mt19937_64& rng);

struct DirectionCache {
  Eigen::MatrixXd gates;   // post-activation gates, column n = original step n
  Eigen::MatrixXd state;   // LSTM cell state s_n (empty for GRU)
  Eigen::MatrixXd hidden;  // h_n
  Eigen::MatrixXd h_prev_masked;
  Eigen::MatrixXd h_prev;  // unmasked previous hidden (GRU only)
};

struct LayerCache {
  Eigen::MatrixXd input;       // D_in x N
  Eigen::MatrixXd pre_output;  // concatenated hidden before ReLU and dropout
  Eigen::MatrixXd output;      // after ReLU and dropout
  std::vector<DirectionCache> dirs;
};

struct EncoderCache {
  DropoutMasks masks;
  std::vector<LayerCache> layers;
  Eigen::MatrixXd attn_hidden;  // tanh(W h + b), units x N
  std::size_t steps = 0;
  std::size_t parameter_count = 0;
};

struct Encoding {
  Eigen::VectorXd context;
  Eigen::VectorXd attention_weights;  // empty without attention
  EncoderCache cache;
};

/// Encodes a sequence (one column per step). Train mode samples fresh dropout
/// masks from `rng`; infer mode disables dropout and is deterministic.
Encoding encode(const EncoderModel& model, const Eigen::MatrixXd& seq, Mode mode, std::mt19937_64* rng = nullptr);
Encoding encode(const EncoderModel& model, const InteractionTrajectory& traj, Mode mode,
                std::mt19937_64* rng = nullptr);
/// Encodes with the given masks; used to replay a training pass.
Encoding encode_with_masks(const EncoderModel& model, const Eigen::MatrixXd& seq, const DropoutMasks& masks);

/// Accumulates d(grad_c . c)/d(theta) into `grads` (shaped like `model`).
void backward(const EncoderModel& model, const EncoderCache& cache, const Eigen::VectorXd& grad_c,
              EncoderModel& grads);

/// Versioned JSON: architecture descriptor plus flat parameter arrays. Round
/// trips are bit-exact.
void save_model(std::ostream& out, const EncoderModel& model);
EncoderModel load_model(std::istream& in);

}  // namespace silstm
