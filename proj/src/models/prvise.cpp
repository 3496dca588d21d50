// Copyright 2026 The zsl-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "zsl/models/prvise.hpp"

#include <array>
#include <cmath>

#include "zsl/errors.hpp"

namespace zsl {

namespace {

constexpr std::size_t kLayersPerNet = 2;

std::span<const ad::Var> net_vars(std::span<const ad::Var> vars, std::size_t net) {
  return vars.subspan(net * 2 * kLayersPerNet, 2 * kLayersPerNet);
}

}  // namespace

PrviseModel make_prvise(Eigen::Index feature_dim, Eigen::Index word_dim, Eigen::Index hidden, Eigen::Index latent,
                        double leaky_slope, Rng& rng) {
  const auto hid = Activation::leaky_relu(leaky_slope);
  const auto out = Activation::identity();
  PrviseModel m;
  m.latent_dim = latent;
  m.image_encoder = make_mlp(std::array{feature_dim, hidden, 2 * latent}, hid, out, rng);
  m.word_encoder = make_mlp(std::array{word_dim, hidden, 2 * latent}, hid, out, rng);
  m.image_decoder = make_mlp(std::array{latent, hidden, feature_dim}, hid, out, rng);
  m.word_decoder = make_mlp(std::array{latent, hidden, word_dim}, hid, out, rng);
  return m;
}

void append_params(PrviseModel& model, ParamList& out) {
  append_params(model.image_encoder, "image_encoder", out);
  append_params(model.word_encoder, "word_encoder", out);
  append_params(model.image_decoder, "image_decoder", out);
  append_params(model.word_decoder, "word_decoder", out);
}

double kl_diag_gaussian(const Eigen::VectorXd& mean1, const Eigen::VectorXd& logvar1, const Eigen::VectorXd& mean2,
                        const Eigen::VectorXd& logvar2) {
  if (mean1.size() != logvar1.size() || mean1.size() != mean2.size() || mean1.size() != logvar2.size()) {
    throw DimensionError("kl_diag_gaussian: parameter lengths differ");
  }
  const Eigen::ArrayXd ratio = (logvar1 - logvar2).array().exp();
  const Eigen::ArrayXd diff2 = (mean1 - mean2).array().square();
  return 0.5 * (logvar2.array() - logvar1.array() + ratio + diff2 / logvar2.array().exp() - 1.0).sum();
}

ad::Var kl_diag_gaussian(ad::Var mean1, ad::Var logvar1, ad::Var mean2, ad::Var logvar2) {
  const ad::Var ratio = ad::exp(logvar1 - logvar2);
  const ad::Var diff2 = ad::square(mean1 - mean2) / ad::exp(logvar2);
  return 0.5 * ad::row_sum((logvar2 - logvar1) + ratio + diff2 - 1.0);
}

PrviseNoise draw_prvise_noise(Eigen::Index batch, Eigen::Index latent, Rng& rng) {
  PrviseNoise n;
  n.image = rng.normal_matrix(batch, latent);
  n.word = rng.normal_matrix(batch, latent);
  return n;
}

ad::Var prvise_loss(const PrviseModel& model, std::span<const ad::Var> vars, ad::Var features,
                    const Eigen::MatrixXd& word_vectors, const PrviseNoise& noise) {
  if (vars.size() != 4 * 2 * kLayersPerNet) throw DimensionError("prvise_loss: unexpected parameter count");
  if (word_vectors.rows() != features.rows()) throw DimensionError("prvise_loss: one word vector per instance");
  const Eigen::Index l = model.latent_dim;
  ad::Tape& tape = *features.tape();
  const ad::Var words = tape.constant(word_vectors);

  const ad::Var enc_i = mlp_forward(model.image_encoder, net_vars(vars, 0), features);
  const ad::Var enc_w = mlp_forward(model.word_encoder, net_vars(vars, 1), words);
  const ad::Var mu_i = ad::slice_cols(enc_i, 0, l);
  const ad::Var lv_i = ad::slice_cols(enc_i, l, l);
  const ad::Var mu_w = ad::slice_cols(enc_w, 0, l);
  const ad::Var lv_w = ad::slice_cols(enc_w, l, l);

  const ad::Var z_i = mu_i + ad::exp(lv_i * 0.5) * tape.constant(noise.image);
  const ad::Var z_w = mu_w + ad::exp(lv_w * 0.5) * tape.constant(noise.word);
  const ad::Var rec_i = mlp_forward(model.image_decoder, net_vars(vars, 2), z_i);
  const ad::Var rec_w = mlp_forward(model.word_decoder, net_vars(vars, 3), z_w);

  const ad::Var per_row = 0.5 * ad::row_squared_norm(rec_i - features) + 0.5 * ad::row_squared_norm(rec_w - words) +
                          kl_diag_gaussian(mu_i, lv_i, mu_w, lv_w);
  return ad::mean(per_row);
}

double prvise_loss(const PrviseModel& model, const Eigen::VectorXd& feature, const std::string& true_label,
                   const EmbeddingTable& words, Rng& rng) {
  PrviseModel copy = model;
  ParamList params;
  append_params(copy, params);
  ad::Tape tape;
  const auto vars = bind_params(tape, params);
  const PrviseNoise noise = draw_prvise_noise(1, model.latent_dim, rng);
  return prvise_loss(copy, vars, tape.constant(Eigen::MatrixXd(feature.transpose())),
                     Eigen::MatrixXd(words.at(true_label).transpose()), noise)
      .scalar();
}

Eigen::MatrixXd prvise_scores(const PrviseModel& model, const Eigen::MatrixXd& features,
                              const Eigen::MatrixXd& label_vectors) {
  const Eigen::Index l = model.latent_dim;
  const Eigen::MatrixXd enc_i = mlp_apply(model.image_encoder, features);
  const Eigen::MatrixXd enc_w = mlp_apply(model.word_encoder, label_vectors);
  Eigen::MatrixXd scores(features.rows(), label_vectors.rows());
  for (Eigen::Index b = 0; b < features.rows(); ++b) {
    const Eigen::VectorXd mu_i = enc_i.row(b).head(l).transpose();
    const Eigen::VectorXd lv_i = enc_i.row(b).tail(l).transpose();
    for (Eigen::Index y = 0; y < label_vectors.rows(); ++y) {
      scores(b, y) = -kl_diag_gaussian(mu_i, lv_i, enc_w.row(y).head(l).transpose(), enc_w.row(y).tail(l).transpose());
    }
  }
  return scores;
}

Eigen::MatrixXd prvise_scores(const PrviseModel& model, const Eigen::MatrixXd& features,
                              std::span<const std::string> label_space, const EmbeddingTable& words) {
  return prvise_scores(model, features, words.matrix(label_space));
}

}  // namespace zsl
