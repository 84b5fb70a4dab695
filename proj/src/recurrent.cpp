#include "silstm/recurrent.hpp"

#include <array>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace silstm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

template <typename Derived>
auto logistic(const Eigen::MatrixBase<Derived>& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

template <typename Derived>
auto tanh_of(const Eigen::MatrixBase<Derived>& x) {
  return x.array().tanh().matrix();
}

// Core of one LSTM step given the input projection (W a + b).
void lstm_forward(const CellParams& p, const Eigen::Ref<const VectorXd>& wx, const VectorXd& h_in,
                  const VectorXd& s_prev, Eigen::Ref<VectorXd> gates, VectorXd& s, VectorXd& h) {
  const auto H = p.hidden_dim();
  VectorXd pre = wx + p.U * h_in;
  gates.head(3 * H) = logistic(pre.head(3 * H));
  gates.tail(H) = tanh_of(pre.tail(H));
  s = gates.segment(0, H).cwiseProduct(gates.segment(3 * H, H)) + gates.segment(H, H).cwiseProduct(s_prev);
  h = gates.segment(2 * H, H).cwiseProduct(tanh_of(s));
}

// Core of one GRU step; h_in is the (possibly masked) recurrent input, h_prev the carried state.
void gru_forward(const CellParams& p, const Eigen::Ref<const VectorXd>& wx, const VectorXd& h_in,
                 const VectorXd& h_prev, Eigen::Ref<VectorXd> gates, VectorXd& h) {
  const auto H = p.hidden_dim();
  const VectorXd zr = wx.head(2 * H) + p.U.topRows(2 * H) * h_in;
  gates.head(2 * H) = logistic(zr);
  const VectorXd rh = gates.segment(H, H).cwiseProduct(h_in);
  gates.tail(H) = tanh_of(wx.tail(H) + p.U.bottomRows(H) * rh);
  const auto z = gates.head(H);
  h = z.cwiseProduct(gates.tail(H)) + (VectorXd::Ones(H) - z).cwiseProduct(h_prev);
}

void check_cell_inputs(const CellParams& p, const VectorXd& a, const VectorXd& h_prev) {
  if (a.size() != p.input_dim() || h_prev.size() != p.hidden_dim())
    throw Error("cell step: dimension mismatch (input " + std::to_string(a.size()) + " vs " +
                std::to_string(p.input_dim()) + ", hidden " + std::to_string(h_prev.size()) + " vs " +
                std::to_string(p.hidden_dim()) + ")");
}

VectorXd dropout_mask(Eigen::Index n, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return VectorXd::Ones(n);
  if (rate >= 1.0) throw Error("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  VectorXd m(n);
  for (Eigen::Index i = 0; i < n; ++i) m[i] = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  return m;
}

struct ArchInfo {
  Architecture arch;
  const char* name;
  CellKind kind;
  int n_layers;
  bool bidirectional;
  bool attention;
};

constexpr std::array<ArchInfo, 7> kArchs{{
    {Architecture::lstm2l, "lstm2l", CellKind::lstm, 2, false, false},
    {Architecture::lstm2l_a, "lstm2l_a", CellKind::lstm, 2, false, true},
    {Architecture::gru2l, "gru2l", CellKind::gru, 2, false, false},
    {Architecture::gru2l_a, "gru2l_a", CellKind::gru, 2, false, true},
    {Architecture::blstm1l_a, "blstm1l_a", CellKind::lstm, 1, true, true},
    {Architecture::blstm2l, "blstm2l", CellKind::lstm, 2, true, false},
    {Architecture::blstm2l_a, "blstm2l_a", CellKind::lstm, 2, true, true},
}};

constexpr std::array<Architecture, 7> kArchList{Architecture::lstm2l,   Architecture::lstm2l_a,
                                                Architecture::gru2l,    Architecture::gru2l_a,
                                                Architecture::blstm1l_a, Architecture::blstm2l,
                                                Architecture::blstm2l_a};

const ArchInfo& info(Architecture a) {
  for (const auto& i : kArchs)
    if (i.arch == a) return i;
  throw Error("unknown architecture");
}

}  // namespace

// ---- cells ------------------------------------------------------------------

CellParams CellParams::zeros(CellKind kind, int input_dim, int hidden_dim) {
  const int g = gates(kind) * hidden_dim;
  return {kind, MatrixXd::Zero(g, input_dim), MatrixXd::Zero(g, hidden_dim), VectorXd::Zero(g)};
}

LstmState lstm_step(const CellParams& p, const VectorXd& a, const VectorXd& h_prev, const VectorXd& s_prev) {
  if (p.kind != CellKind::lstm) throw Error("lstm_step: cell is not an LSTM");
  check_cell_inputs(p, a, h_prev);
  if (s_prev.size() != p.hidden_dim()) throw Error("lstm_step: state dimension mismatch");
  VectorXd gates(4 * p.hidden_dim());
  LstmState out;
  lstm_forward(p, p.W * a + p.b, h_prev, s_prev, gates, out.s, out.h);
  return out;
}

VectorXd gru_step(const CellParams& p, const VectorXd& a, const VectorXd& h_prev) {
  if (p.kind != CellKind::gru) throw Error("gru_step: cell is not a GRU");
  check_cell_inputs(p, a, h_prev);
  VectorXd gates(3 * p.hidden_dim());
  VectorXd h;
  gru_forward(p, p.W * a + p.b, h_prev, h_prev, gates, h);
  return h;
}

// ---- architectures ----------------------------------------------------------

std::string to_string(Architecture a) { return info(a).name; }

Architecture parse_architecture(std::string_view s) {
  for (const auto& i : kArchs)
    if (s == i.name) return i.arch;
  std::string valid;
  for (const auto& i : kArchs) valid += std::string(valid.empty() ? "" : ", ") + i.name;
  throw Error("unknown architecture '" + std::string(s) + "' (valid: " + valid + ")");
}

std::span<const Architecture> all_architectures() { return kArchList; }

int EncoderModel::layer_output_dim(std::size_t layer) const {
  return layers.at(layer).hidden * (layers[layer].bidirectional ? 2 : 1);
}

void EncoderModel::validate() const {
  if (layers.empty() || cells.size() != layers.size()) throw Error("encoder: layer/cell count mismatch");
  int in = input_dim;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& spec = layers[l];
    if (cells[l].size() != (spec.bidirectional ? 2u : 1u)) throw Error("encoder: direction count mismatch");
    for (const auto& c : cells[l]) {
      const auto g = CellParams::gates(spec.kind) * spec.hidden;
      if (c.kind != spec.kind || c.W.rows() != g || c.W.cols() != in || c.U.rows() != g ||
          c.U.cols() != spec.hidden || c.b.size() != g)
        throw Error("encoder: layer " + std::to_string(l) + " parameter shapes do not chain");
    }
    in = layer_output_dim(l);
  }
  if (attention) {
    const auto& a = *attention;
    if (a.W.cols() != in || a.b.size() != a.W.rows() || a.u.size() != a.W.rows())
      throw Error("encoder: attention shapes do not match final layer");
  }
}

EncoderModel EncoderModel::zeros_like() const {
  EncoderModel z = *this;
  z.for_each_parameter([](const std::string&, std::span<double> v) { std::fill(v.begin(), v.end(), 0.0); });
  return z;
}

std::size_t EncoderModel::parameter_count() const {
  std::size_t n = 0;
  for_each_parameter([&](const std::string&, std::span<const double> v) { n += v.size(); });
  return n;
}

EncoderModel make_encoder(std::vector<LayerSpec> layers, bool with_attention, int input_dim,
                          const EncoderOptions& opts) {
  if (layers.empty()) throw Error("make_encoder: no layers");
  if (input_dim < 1) throw Error("make_encoder: input_dim must be positive");
  std::mt19937_64 rng(opts.seed);
  const auto uniform = [&](Eigen::Index r, Eigen::Index c, int fan_in) {
    const double lim = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-lim, lim);
    MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = u(rng);
    return m;
  };

  EncoderModel m;
  m.input_dim = input_dim;
  m.layers = std::move(layers);
  m.dropout = opts.dropout;
  int in = input_dim;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& spec = m.layers[l];
    if (spec.hidden < 1) throw Error("make_encoder: hidden size must be positive");
    const int g = CellParams::gates(spec.kind) * spec.hidden;
    std::vector<CellParams> dirs;
    for (int d = 0; d < (spec.bidirectional ? 2 : 1); ++d) {
      CellParams c;
      c.kind = spec.kind;
      c.W = uniform(g, in, in);
      c.U = uniform(g, spec.hidden, spec.hidden);
      c.b = VectorXd::Zero(g);
      if (spec.kind == CellKind::lstm) c.b.segment(spec.hidden, spec.hidden).setOnes();
      dirs.push_back(std::move(c));
    }
    m.cells.push_back(std::move(dirs));
    in = m.layer_output_dim(l);
  }
  if (with_attention) {
    if (opts.attention_units < 1) throw Error("make_encoder: attention units must be positive");
    AttentionParams a;
    a.W = uniform(opts.attention_units, in, in);
    a.b = VectorXd::Zero(opts.attention_units);
    a.u = uniform(opts.attention_units, 1, opts.attention_units).col(0);
    m.attention = std::move(a);
  }
  m.validate();
  return m;
}

EncoderModel make_encoder(Architecture arch, int input_dim, const EncoderOptions& opts) {
  const auto& ai = info(arch);
  if (static_cast<int>(opts.hidden.size()) < ai.n_layers)
    throw Error("make_encoder: " + std::string(ai.name) + " needs " + std::to_string(ai.n_layers) + " hidden sizes");
  std::vector<LayerSpec> layers;
  for (int l = 0; l < ai.n_layers; ++l) layers.push_back({ai.kind, opts.hidden[l], ai.bidirectional, true});
  auto m = make_encoder(std::move(layers), ai.attention, input_dim, opts);
  m.arch_tag = ai.name;
  return m;
}

// ---- masks ------------------------------------------------------------------

DropoutMasks identity_masks(const EncoderModel& model) {
  DropoutMasks dm;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    dm.recurrent.emplace_back(model.cells[l].size(), VectorXd::Ones(model.layers[l].hidden));
    dm.activation.push_back(VectorXd::Ones(model.layer_output_dim(l)));
  }
  if (model.attention) dm.attention = VectorXd::Ones(model.attention->units());
  return dm;
}

DropoutMasks sample_masks(const EncoderModel& model, std::mt19937_64& rng) {
  DropoutMasks dm;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    std::vector<VectorXd> rec;
    for (std::size_t d = 0; d < model.cells[l].size(); ++d)
      rec.push_back(dropout_mask(model.layers[l].hidden, model.dropout.recurrent, rng));
    dm.recurrent.push_back(std::move(rec));
    dm.activation.push_back(dropout_mask(model.layer_output_dim(l), model.dropout.activation, rng));
  }
  if (model.attention) dm.attention = dropout_mask(model.attention->units(), model.dropout.attention, rng);
  return dm;
}

// ---- forward ----------------------------------------------------------------

Encoding encode_with_masks(const EncoderModel& model, const MatrixXd& seq, const DropoutMasks& masks) {
  const auto N = seq.cols();
  if (N == 0) throw Error("encode: empty sequence");
  if (seq.rows() != model.input_dim)
    throw Error("encode: feature dimension " + std::to_string(seq.rows()) + " does not match model input " +
                std::to_string(model.input_dim));
  if (masks.recurrent.size() != model.layers.size() || masks.activation.size() != model.layers.size())
    throw Error("encode: dropout masks do not match model");

  Encoding enc;
  auto& cache = enc.cache;
  cache.masks = masks;
  cache.steps = static_cast<std::size_t>(N);
  cache.parameter_count = model.parameter_count();

  MatrixXd x = seq;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& spec = model.layers[l];
    const int H = spec.hidden;
    LayerCache lc;
    lc.pre_output.resize(model.layer_output_dim(l), N);
    for (std::size_t d = 0; d < model.cells[l].size(); ++d) {
      const auto& p = model.cells[l][d];
      const auto& rmask = masks.recurrent[l][d];
      const bool reverse = d == 1;
      DirectionCache dc;
      dc.gates.resize(CellParams::gates(spec.kind) * H, N);
      dc.hidden.resize(H, N);
      dc.h_prev_masked.resize(H, N);
      if (spec.kind == CellKind::lstm)
        dc.state.resize(H, N);
      else
        dc.h_prev.resize(H, N);

      const MatrixXd wx = (p.W * x).colwise() + p.b;
      VectorXd h = VectorXd::Zero(H), s = VectorXd::Zero(H), hm, s_new, h_new;
      for (Eigen::Index tau = 0; tau < N; ++tau) {
        const Eigen::Index n = reverse ? N - 1 - tau : tau;
        hm = h.cwiseProduct(rmask);
        dc.h_prev_masked.col(n) = hm;
        if (spec.kind == CellKind::lstm) {
          lstm_forward(p, wx.col(n), hm, s, dc.gates.col(n), s_new, h_new);
          s = s_new;
          dc.state.col(n) = s;
        } else {
          dc.h_prev.col(n) = h;
          gru_forward(p, wx.col(n), hm, h, dc.gates.col(n), h_new);
        }
        h = h_new;
        dc.hidden.col(n) = h;
      }
      lc.pre_output.middleRows(static_cast<Eigen::Index>(d) * H, H) = dc.hidden;
      lc.dirs.push_back(std::move(dc));
    }
    lc.input = std::move(x);
    lc.output = spec.relu ? MatrixXd(lc.pre_output.cwiseMax(0.0)) : lc.pre_output;
    lc.output = lc.output.array().colwise() * masks.activation[l].array();
    x = lc.output;
    cache.layers.push_back(std::move(lc));
  }

  const auto& top = cache.layers.back();
  const auto& hs = top.output;
  if (model.attention) {
    const auto& a = *model.attention;
    cache.attn_hidden = ((a.W * hs).colwise() + a.b).array().tanh().matrix();
    const VectorXd um = a.u.cwiseProduct(masks.attention);
    const VectorXd e = cache.attn_hidden.transpose() * um;
    const double emax = e.maxCoeff();
    VectorXd w = (e.array() - emax).exp().matrix();
    enc.attention_weights = w / w.sum();
    enc.context = hs * enc.attention_weights;
  } else {
    const auto& spec = model.layers.back();
    enc.context.resize(model.output_dim());
    enc.context.head(spec.hidden) = hs.col(N - 1).head(spec.hidden);
    if (spec.bidirectional) enc.context.tail(spec.hidden) = hs.col(0).tail(spec.hidden);
  }
  return enc;
}

Encoding encode(const EncoderModel& model, const MatrixXd& seq, Mode mode, std::mt19937_64* rng) {
  if (mode == Mode::infer) return encode_with_masks(model, seq, identity_masks(model));
  if (!rng) throw Error("encode: train mode needs a random engine");
  return encode_with_masks(model, seq, sample_masks(model, *rng));
}

Encoding encode(const EncoderModel& model, const InteractionTrajectory& traj, Mode mode, std::mt19937_64* rng) {
  if (traj.features.empty()) throw Error("encode: trajectory has no steps");
  return encode(model, traj.sequence(), mode, rng);
}

// ---- backward ---------------------------------------------------------------

void backward(const EncoderModel& model, const EncoderCache& cache, const VectorXd& grad_c, EncoderModel& grads) {
  if (cache.layers.size() != model.layers.size() || cache.parameter_count != model.parameter_count() ||
      grads.parameter_count() != model.parameter_count())
    throw Error("backward: cache or gradient buffer does not match model");
  if (grad_c.size() != model.output_dim()) throw Error("backward: gradient dimension mismatch");
  const auto N = static_cast<Eigen::Index>(cache.steps);

  const auto& top = cache.layers.back();
  MatrixXd d_out = MatrixXd::Zero(top.output.rows(), N);
  if (model.attention) {
    const auto& a = *model.attention;
    auto& ga = *grads.attention;
    const auto& hs = top.output;
    const auto& z = cache.attn_hidden;
    const VectorXd um = a.u.cwiseProduct(cache.masks.attention);
    const VectorXd e = z.transpose() * um;
    VectorXd alpha = (e.array() - e.maxCoeff()).exp().matrix();
    alpha /= alpha.sum();

    d_out = grad_c * alpha.transpose();
    const VectorXd d_alpha = hs.transpose() * grad_c;
    const VectorXd d_e = alpha.cwiseProduct((d_alpha.array() - alpha.dot(d_alpha)).matrix());
    ga.u += (z * d_e).cwiseProduct(cache.masks.attention);
    const MatrixXd d_pre = (um * d_e.transpose()).cwiseProduct((1.0 - z.array().square()).matrix());
    ga.W += d_pre * hs.transpose();
    ga.b += d_pre.rowwise().sum();
    d_out += a.W.transpose() * d_pre;
  } else {
    const auto& spec = model.layers.back();
    d_out.col(N - 1).head(spec.hidden) += grad_c.head(spec.hidden);
    if (spec.bidirectional) d_out.col(0).tail(spec.hidden) += grad_c.tail(spec.hidden);
  }

  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const auto& spec = model.layers[li];
    const auto& lc = cache.layers[li];
    const int H = spec.hidden;
    MatrixXd d_pre_out = d_out.array().colwise() * cache.masks.activation[li].array();
    if (spec.relu) d_pre_out = (lc.pre_output.array() > 0.0).select(d_pre_out, 0.0);

    MatrixXd d_in = MatrixXd::Zero(lc.input.rows(), N);
    for (std::size_t d = 0; d < model.cells[li].size(); ++d) {
      const auto& p = model.cells[li][d];
      auto& g = grads.cells[li][d];
      const auto& dc = lc.dirs[d];
      const auto& rmask = cache.masks.recurrent[li][d];
      const bool reverse = d == 1;
      const auto d_h_ext = d_pre_out.middleRows(static_cast<Eigen::Index>(d) * H, H);
      MatrixXd d_pre(CellParams::gates(spec.kind) * H, N);
      VectorXd dh_rec = VectorXd::Zero(H);

      if (spec.kind == CellKind::lstm) {
        VectorXd ds_carry = VectorXd::Zero(H);
        for (Eigen::Index tau = N - 1; tau >= 0; --tau) {
          const Eigen::Index n = reverse ? N - 1 - tau : tau;
          const auto gt = dc.gates.col(n);
          const auto i = gt.segment(0, H), f = gt.segment(H, H), o = gt.segment(2 * H, H), c = gt.segment(3 * H, H);
          const VectorXd ts = dc.state.col(n).array().tanh();
          const VectorXd s_prev = tau > 0 ? VectorXd(dc.state.col(reverse ? n + 1 : n - 1)) : VectorXd::Zero(H);
          const VectorXd dh = d_h_ext.col(n) + dh_rec;
          const VectorXd d_o = dh.cwiseProduct(ts);
          const VectorXd ds = ds_carry + dh.cwiseProduct(o).cwiseProduct((1.0 - ts.array().square()).matrix());
          auto col = d_pre.col(n);
          col.segment(0, H) = ds.cwiseProduct(c).array() * i.array() * (1.0 - i.array());
          col.segment(H, H) = ds.cwiseProduct(s_prev).array() * f.array() * (1.0 - f.array());
          col.segment(2 * H, H) = d_o.array() * o.array() * (1.0 - o.array());
          col.segment(3 * H, H) = ds.cwiseProduct(i).array() * (1.0 - c.array().square());
          ds_carry = ds.cwiseProduct(f);
          dh_rec = (p.U.transpose() * col).cwiseProduct(rmask);
        }
        g.U += d_pre * dc.h_prev_masked.transpose();
      } else {
        for (Eigen::Index tau = N - 1; tau >= 0; --tau) {
          const Eigen::Index n = reverse ? N - 1 - tau : tau;
          const auto gt = dc.gates.col(n);
          const auto z = gt.segment(0, H), r = gt.segment(H, H), c = gt.segment(2 * H, H);
          const auto hm = dc.h_prev_masked.col(n);
          const VectorXd dh = d_h_ext.col(n) + dh_rec;
          auto col = d_pre.col(n);
          col.segment(2 * H, H) = dh.array() * z.array() * (1.0 - c.array().square());
          const VectorXd d_rh = p.U.bottomRows(H).transpose() * col.segment(2 * H, H);
          col.segment(H, H) = d_rh.array() * hm.array() * r.array() * (1.0 - r.array());
          col.segment(0, H) = dh.array() * (c - dc.h_prev.col(n)).array() * z.array() * (1.0 - z.array());
          const VectorXd d_hm = d_rh.cwiseProduct(r) + p.U.topRows(2 * H).transpose() * col.head(2 * H);
          dh_rec = dh.cwiseProduct((1.0 - z.array()).matrix()) + d_hm.cwiseProduct(rmask);
        }
        g.U.topRows(2 * H) += d_pre.topRows(2 * H) * dc.h_prev_masked.transpose();
        const MatrixXd rh = dc.gates.middleRows(H, H).cwiseProduct(dc.h_prev_masked);
        g.U.bottomRows(H) += d_pre.bottomRows(H) * rh.transpose();
      }
      g.W += d_pre * lc.input.transpose();
      g.b += d_pre.rowwise().sum();
      d_in += p.W.transpose() * d_pre;
    }
    d_out = std::move(d_in);
  }
}

// ---- serialization ----------------------------------------------------------

namespace {
constexpr const char* kFormat = "silstm-encoder";
constexpr int kVersion = 1;
}  // namespace

void save_model(std::ostream& out, const EncoderModel& model) {
  model.validate();
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["arch"] = model.arch_tag;
  j["input_dim"] = model.input_dim;
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : model.layers)
    layers.push_back({{"kind", l.kind == CellKind::lstm ? "lstm" : "gru"},
                      {"hidden", l.hidden},
                      {"bidirectional", l.bidirectional},
                      {"relu", l.relu}});
  j["attention_units"] = model.attention ? model.attention->units() : 0;
  j["dropout"] = {{"recurrent", model.dropout.recurrent},
                  {"activation", model.dropout.activation},
                  {"attention", model.dropout.attention}};
  auto& params = j["params"] = nlohmann::json::object();
  model.for_each_parameter([&](const std::string& name, std::span<const double> v) {
    params[name] = std::vector<double>(v.begin(), v.end());
  });
  out << j.dump(1) << '\n';
}

EncoderModel load_model(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat) throw Error("not a silstm encoder file");
    if (j.at("version").get<int>() != kVersion)
      throw Error("unsupported model version " + std::to_string(j.at("version").get<int>()));
    std::vector<LayerSpec> layers;
    for (const auto& l : j.at("layers")) {
      const auto kind = l.at("kind").get<std::string>();
      if (kind != "lstm" && kind != "gru") throw Error("unknown cell kind '" + kind + "'");
      layers.push_back({kind == "lstm" ? CellKind::lstm : CellKind::gru, l.at("hidden").get<int>(),
                        l.at("bidirectional").get<bool>(), l.at("relu").get<bool>()});
    }
    EncoderOptions opts;
    opts.attention_units = std::max(1, j.at("attention_units").get<int>());
    const auto& dr = j.at("dropout");
    opts.dropout = {dr.at("recurrent").get<double>(), dr.at("activation").get<double>(),
                    dr.at("attention").get<double>()};
    auto model = make_encoder(std::move(layers), j.at("attention_units").get<int>() > 0,
                              j.at("input_dim").get<int>(), opts);
    model.arch_tag = j.value("arch", std::string());
    const auto& params = j.at("params");
    model.for_each_parameter([&](const std::string& name, std::span<double> v) {
      const auto data = params.at(name).get<std::vector<double>>();
      if (data.size() != v.size()) throw Error("parameter " + name + " has wrong size");
      std::copy(data.begin(), data.end(), v.begin());
    });
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace silstm
