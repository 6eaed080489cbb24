#pragma once

#include <random>
#include <vector>

#include "splitstream/genmodel.hpp"

namespace splitstream::testing {

/// Embedding q -> q * ones(16); conv picks channel 0 (the embedding) into all
/// 8 output channels; PReLU with alpha 1 is the identity; a zero conv inside a
/// skip pair adds nothing; depth-to-space lays the 8 x 16 copies out as 128
/// points. Every output value is therefore q.
inline GeneratorWeights constant_field_network() {
  GeneratorBuilder b(16, 1, 128);
  b.dense("embed", {1}, {16}, Eigen::MatrixXd::Ones(16, 1), Eigen::VectorXd::Zero(16));
  b.conv1d("pick", 2, 8, 16, 3, [](int, int i, int k) { return (i == 0 && k == 1) ? 1.0 : 0.0; },
           Eigen::VectorXd::Zero(8));
  b.prelu("act", 8, 16, Eigen::VectorXd::Ones(8));
  b.skip("res_in", SkipRole::Push, {8, 16});
  b.conv1d("res_conv", 8, 8, 16, 3, [](int, int, int) { return 0.0; }, Eigen::VectorXd::Zero(8));
  b.skip("res_out", SkipRole::Add, {8, 16});
  b.depth_to_space("upsample", 8, 16, 8);
  b.affine("scale", {1, 128}, Eigen::VectorXd::Ones(128), Eigen::VectorXd::Zero(128));
  return b.build();
}

/// Same layer layout with random parameters.
inline GeneratorWeights random_network(unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> n01(0.0, 0.3);
  auto rnd = [&](int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = n01(gen);
    return v;
  };
  Eigen::MatrixXd embed(16, 1);
  embed.col(0) = rnd(16);
  std::vector<double> k1(8 * 2 * 3), k2(8 * 8 * 3);
  for (auto& v : k1) v = n01(gen);
  for (auto& v : k2) v = n01(gen);

  GeneratorBuilder b(16, 1, 128);
  b.dense("embed", {1}, {16}, embed, rnd(16));
  b.conv1d("c1", 2, 8, 16, 3, [&](int o, int i, int k) { return k1[(o * 2 + i) * 3 + k]; }, rnd(8));
  b.prelu("a1", 8, 16, rnd(8));
  b.skip("res_in", SkipRole::Push, {8, 16});
  b.conv1d("c2", 8, 8, 16, 3, [&](int o, int i, int k) { return k2[(o * 8 + i) * 3 + k]; }, rnd(8));
  b.prelu("a2", 8, 16, rnd(8));
  b.skip("res_out", SkipRole::Add, {8, 16});
  b.depth_to_space("upsample", 8, 16, 8);
  b.affine("scale", {1, 128}, rnd(128), rnd(128));
  return b.build();
}

/// Plain-loop forward pass of random_network's layout, written against the
/// manifest layout directly (float parameters, row-major blob slices).
inline std::vector<double> reference_forward(const GeneratorWeights& w, double q, const std::vector<double>& z) {
  auto P = [&](int layer, const char* name) { return w.view(*w.layers[layer].param(name)); };
  // embed
  std::vector<double> emb(16);
  for (int o = 0; o < 16; ++o) emb[o] = double(P(0, "bias")[o]) + double(P(0, "weight")[o]) * q;
  std::vector<std::vector<double>> x(2, std::vector<double>(16));
  for (int p = 0; p < 16; ++p) {
    x[0][p] = emb[p];
    x[1][p] = z[p];
  }
  auto conv = [&](int layer, const std::vector<std::vector<double>>& in, int out_ch) {
    const int cin = static_cast<int>(in.size());
    auto wt = P(layer, "weight");
    auto bs = P(layer, "bias");
    std::vector<std::vector<double>> out(out_ch, std::vector<double>(16));
    for (int o = 0; o < out_ch; ++o)
      for (int p = 0; p < 16; ++p) {
        double acc = bs[o];
        for (int i = 0; i < cin; ++i)
          for (int k = 0; k < 3; ++k) acc += double(wt[(o * cin + i) * 3 + k]) * in[i][(p + k - 1 + 16) % 16];
        out[o][p] = acc;
      }
    return out;
  };
  auto act = [&](int layer, std::vector<std::vector<double>> v) {
    auto a = P(layer, "alpha");
    for (std::size_t c = 0; c < v.size(); ++c)
      for (auto& e : v[c])
        if (e <= 0) e *= double(a[c]);
    return v;
  };
  auto h = act(2, conv(1, x, 8));
  auto r = act(5, conv(4, h, 8));
  for (int c = 0; c < 8; ++c)
    for (int p = 0; p < 16; ++p) r[c][p] += h[c][p];
  std::vector<double> out(128);
  for (int c = 0; c < 8; ++c)
    for (int p = 0; p < 16; ++p) out[p * 8 + c] = r[c][p];
  auto sc = P(8, "scale");
  auto sh = P(8, "shift");
  for (int i = 0; i < 128; ++i) out[i] = out[i] * double(sc[i]) + double(sh[i]);
  return out;
}

}  // namespace splitstream::testing
