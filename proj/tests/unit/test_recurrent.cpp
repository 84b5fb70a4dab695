#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "silstm/recurrent.hpp"

using namespace silstm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd random_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return VectorXd(n).unaryExpr([&](double) { return g(rng); });
}

MatrixXd random_seq(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return MatrixXd(rows, cols).unaryExpr([&](double) { return g(rng); });
}

EncoderOptions small_options(std::uint64_t seed) {
  EncoderOptions o;
  o.hidden = {6, 5};
  o.attention_units = 4;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("lstm step matches the scalar oracle on 100 cases") {
  std::mt19937_64 rng(21);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const int in = 1 + c % 7, H = 1 + c % 5;
    const auto p = oracle::random_cell(CellKind::lstm, in, H, rng);
    const VectorXd a = random_vec(in, rng), h = random_vec(H, rng), s = random_vec(H, rng);
    const auto got = lstm_step(p, a, h, s);
    VectorXd hw, sw;
    oracle::lstm_step(p, a, h, s, hw, sw);
    worst = std::max({worst, (got.h - hw).cwiseAbs().maxCoeff(), (got.s - sw).cwiseAbs().maxCoeff()});
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("gru step matches the scalar oracle on 100 cases") {
  std::mt19937_64 rng(22);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const int in = 1 + c % 7, H = 1 + c % 5;
    const auto p = oracle::random_cell(CellKind::gru, in, H, rng);
    const VectorXd a = random_vec(in, rng), h = random_vec(H, rng);
    worst = std::max(worst, (gru_step(p, a, h) - oracle::gru_step(p, a, h)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("zero lstm gives zero state") {
  const auto p = CellParams::zeros(CellKind::lstm, 3, 4);
  const auto r = lstm_step(p, VectorXd::Zero(3), VectorXd::Zero(4), VectorXd::Zero(4));
  CHECK(r.h.isZero());
  CHECK(r.s.isZero());
}

TEST_CASE("saturated forget gate keeps the cell state") {
  auto p = CellParams::zeros(CellKind::lstm, 2, 3);
  p.b.segment(0, 3).setConstant(-1e3);
  p.b.segment(3, 3).setConstant(1e3);
  std::mt19937_64 rng(23);
  const VectorXd s = random_vec(3, rng);
  const auto r = lstm_step(p, random_vec(2, rng), random_vec(3, rng), s);
  CHECK((r.s - s).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gru gates at the extremes") {
  std::mt19937_64 rng(24);
  auto p = oracle::random_cell(CellKind::gru, 3, 4, rng);
  const VectorXd a = random_vec(3, rng), h = random_vec(4, rng);
  p.b.segment(0, 4).setConstant(-1e3);
  p.W.topRows(4).setZero();
  p.U.topRows(4).setZero();
  CHECK((gru_step(p, a, h) - h).cwiseAbs().maxCoeff() < 1e-12);
  p.b.segment(0, 4).setConstant(1e3);
  p.b.segment(4, 4).setConstant(1e3);
  p.W.middleRows(4, 4).setZero();
  p.U.middleRows(4, 4).setZero();
  const VectorXd cand = (p.W.bottomRows(4) * a + p.U.bottomRows(4) * h + p.b.tail(4)).array().tanh().matrix();
  CHECK((gru_step(p, a, h) - cand).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cell steps reject dimension mismatches") {
  const auto p = CellParams::zeros(CellKind::lstm, 3, 4);
  CHECK_THROWS_AS(lstm_step(p, VectorXd::Zero(2), VectorXd::Zero(4), VectorXd::Zero(4)), Error);
  CHECK_THROWS_AS(lstm_step(p, VectorXd::Zero(3), VectorXd::Zero(4), VectorXd::Zero(3)), Error);
  CHECK_THROWS_AS(gru_step(p, VectorXd::Zero(3), VectorXd::Zero(4)), Error);
}

TEST_CASE("architecture names round trip") {
  CHECK(all_architectures().size() == 7);
  for (auto a : all_architectures()) CHECK(parse_architecture(to_string(a)) == a);
  CHECK_THROWS_WITH_AS(parse_architecture("transformer"), doctest::Contains("blstm2l_a"), Error);
}

TEST_CASE("gradients match central differences for every architecture") {
  for (auto arch : all_architectures()) {
    CAPTURE(to_string(arch));
    CHECK(oracle::triplet_gradient_error(arch, 31) < 1e-4);
  }
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  std::mt19937_64 rng(25);
  const auto m = make_encoder(Architecture::blstm2l_a, 5, small_options(3));
  const auto enc = encode(m, random_seq(5, 4, rng), Mode::train, &rng);
  auto g = m.zeros_like();
  backward(m, enc.cache, VectorXd::Zero(m.output_dim()), g);
  g.for_each_parameter([](const std::string&, std::span<const double> v) {
    for (double x : v) CHECK(x == 0.0);
  });
}

TEST_CASE("backward rejects a mismatched cache") {
  std::mt19937_64 rng(26);
  const auto a = make_encoder(Architecture::lstm2l, 5, small_options(1));
  const auto b = make_encoder(Architecture::blstm2l_a, 5, small_options(1));
  const auto enc = encode(a, random_seq(5, 3, rng), Mode::infer);
  auto g = b.zeros_like();
  CHECK_THROWS_AS(backward(b, enc.cache, VectorXd::Zero(b.output_dim()), g), Error);
}

TEST_CASE("attention weights are a distribution") {
  std::mt19937_64 rng(27);
  const Architecture attn[] = {Architecture::lstm2l_a, Architecture::gru2l_a, Architecture::blstm1l_a,
                               Architecture::blstm2l_a};
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const auto m = make_encoder(attn[c % 4], 5, small_options(100 + c));
    const auto enc = encode(m, random_seq(5, 1 + c % 30, rng), Mode::infer);
    CHECK(enc.attention_weights.minCoeff() >= 0.0);
    worst = std::max(worst, std::abs(enc.attention_weights.sum() - 1.0));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("a single step gets all the attention") {
  std::mt19937_64 rng(28);
  const auto m = make_encoder(Architecture::blstm2l_a, 5, small_options(4));
  const auto enc = encode(m, random_seq(5, 1, rng), Mode::infer);
  CHECK(enc.attention_weights.size() == 1);
  CHECK(enc.attention_weights[0] == 1.0);
  CHECK(enc.context == enc.cache.layers.back().output.col(0));
}

TEST_CASE("attention is invariant to a constant score shift") {
  std::mt19937_64 rng(29);
  auto m = make_encoder(Architecture::lstm2l_a, 5, small_options(5));
  const MatrixXd seq = random_seq(5, 7, rng);
  const auto a = encode(m, seq, Mode::infer);
  // tanh saturates at +1, so a huge bias on an extra unit adds a constant score
  auto& att = *m.attention;
  att.W.conservativeResize(att.W.rows() + 1, Eigen::NoChange);
  att.W.row(att.W.rows() - 1).setZero();
  att.b.conservativeResize(att.b.size() + 1);
  att.b[att.b.size() - 1] = 1e3;
  att.u.conservativeResize(att.u.size() + 1);
  att.u[att.u.size() - 1] = 4.0;
  const auto b = encode(m, seq, Mode::infer);
  CHECK((a.attention_weights - b.attention_weights).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tied bidirectional encoder is reversal invariant on a palindrome") {
  std::mt19937_64 rng(30);
  auto m = make_encoder({{CellKind::lstm, 4, true, true}}, true, 3, small_options(6));
  m.cells[0][1] = m.cells[0][0];
  MatrixXd seq(3, 5);
  const MatrixXd half = random_seq(3, 3, rng);
  seq << half, half.col(1), half.col(0);
  const auto fwd = encode(m, seq, Mode::infer);
  const auto rev = encode(m, MatrixXd(seq.rowwise().reverse()), Mode::infer);
  CHECK((fwd.context - rev.context).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("pooling without attention uses the final step of each direction") {
  std::mt19937_64 rng(31);
  const auto m = make_encoder(Architecture::blstm2l, 5, small_options(7));
  const auto enc = encode(m, random_seq(5, 6, rng), Mode::infer);
  const auto& out = enc.cache.layers.back().output;
  CHECK(enc.attention_weights.size() == 0);
  CHECK(enc.context.head(5) == out.col(5).head(5));
  CHECK(enc.context.tail(5) == out.col(0).tail(5));
}

TEST_CASE("inference is deterministic and accepts long sequences") {
  std::mt19937_64 rng(32);
  const auto m = make_encoder(Architecture::blstm2l_a, 5, small_options(8));
  for (int n : {1, 50, 108, 400}) {
    const MatrixXd seq = random_seq(5, n, rng);
    const auto a = encode(m, seq, Mode::infer);
    const auto b = encode(m, seq, Mode::infer);
    CHECK(a.context == b.context);
    CHECK(a.attention_weights.size() == n);
    CHECK(a.context.allFinite());
  }
}

TEST_CASE("train mode samples dropout and needs an engine") {
  std::mt19937_64 rng(33);
  const auto m = make_encoder(Architecture::blstm2l_a, 5, small_options(9));
  const MatrixXd seq = random_seq(5, 6, rng);
  CHECK_THROWS_AS(encode(m, seq, Mode::train, nullptr), Error);
  const auto a = encode(m, seq, Mode::train, &rng);
  const auto b = encode(m, seq, Mode::train, &rng);
  CHECK(a.context != b.context);
  const auto replay = encode_with_masks(m, seq, a.cache.masks);
  CHECK(replay.context == a.context);
}

TEST_CASE("encode rejects empty and mis-sized input") {
  const auto m = make_encoder(Architecture::lstm2l, 5, small_options(10));
  CHECK_THROWS_AS(encode(m, MatrixXd(5, 0), Mode::infer), Error);
  CHECK_THROWS_AS(encode(m, MatrixXd::Zero(4, 3), Mode::infer), Error);
}

TEST_CASE("initialization bounds and forget bias") {
  const auto m = make_encoder(Architecture::lstm2l, 9, small_options(11));
  CHECK(m.cells[0][0].W.cwiseAbs().maxCoeff() <= 1.0 / 3.0);
  CHECK(m.cells[0][0].b.segment(6, 6).isOnes());
  CHECK(m.cells[0][0].b.head(6).isZero());
  CHECK_THROWS_AS(make_encoder(Architecture::lstm2l, 0, small_options(1)), Error);
  EncoderOptions one;
  one.hidden = {4};
  CHECK_THROWS_AS(make_encoder(Architecture::blstm2l_a, 5, one), Error);
}

TEST_CASE("model save and load is bit-exact") {
  std::mt19937_64 rng(34);
  for (auto arch : all_architectures()) {
    const auto m = make_encoder(arch, 17, small_options(12));
    std::stringstream buf;
    save_model(buf, m);
    const auto back = load_model(buf);
    CHECK(back.arch_tag == m.arch_tag);
    CHECK(back.parameter_count() == m.parameter_count());
    std::vector<double> x, y;
    m.for_each_parameter([&](const std::string&, std::span<const double> v) { x.insert(x.end(), v.begin(), v.end()); });
    back.for_each_parameter([&](const std::string&, std::span<const double> v) { y.insert(y.end(), v.begin(), v.end()); });
    CHECK(x == y);
    const MatrixXd seq = random_seq(17, 4, rng);
    CHECK(encode(m, seq, Mode::infer).context == encode(back, seq, Mode::infer).context);
  }
}

TEST_CASE("load rejects malformed files") {
  std::istringstream bad("{not json");
  CHECK_THROWS_AS(load_model(bad), Error);
  std::istringstream wrong(R"({"format": "other", "version": 1})");
  CHECK_THROWS_AS(load_model(wrong), Error);
}
