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

#pragma once

#include <span>
#include <string>

#include <Eigen/Dense>

#include "zsl/embeddings.hpp"
#include "zsl/numerics/mlp.hpp"

namespace zsl {

/// Cross-modal VAE whose word encoder acts as an adaptive prior for the
/// image latent. Encoders emit [mean | log-variance] of a diagonal Gaussian.
struct PrviseModel {
  MlpParams image_encoder;  // feature_dim -> hidden -> 2 * latent
  MlpParams word_encoder;   // word_dim -> hidden -> 2 * latent
  MlpParams image_decoder;  // latent -> hidden -> feature_dim
  MlpParams word_decoder;   // latent -> hidden -> word_dim
  Eigen::Index latent_dim = 0;
};

PrviseModel make_prvise(Eigen::Index feature_dim, Eigen::Index word_dim, Eigen::Index hidden, Eigen::Index latent,
                        double leaky_slope, Rng& rng);

/// Parameter order used by prvise_loss: image encoder, word encoder, image
/// decoder, word decoder.
void append_params(PrviseModel& model, ParamList& out);

/// Closed-form KL(N(mean1, exp(logvar1)) || N(mean2, exp(logvar2))), diagonal.
double kl_diag_gaussian(const Eigen::VectorXd& mean1, const Eigen::VectorXd& logvar1, const Eigen::VectorXd& mean2,
                        const Eigen::VectorXd& logvar2);
/// Row-wise KL, n x 1.
ad::Var kl_diag_gaussian(ad::Var mean1, ad::Var logvar1, ad::Var mean2, ad::Var logvar2);

/// Reparameterisation noise, one standard-normal row per instance.
struct PrviseNoise {
  Eigen::MatrixXd image;
  Eigen::MatrixXd word;
};

PrviseNoise draw_prvise_noise(Eigen::Index batch, Eigen::Index latent, Rng& rng);

/// Batch mean of ||p_i(z_i) - f||^2/2 + ||p_w(z_w) - w||^2/2 + KL(q_i || q_w)
/// with z_i ~ q_i(.|f) and z_w ~ q_w(.|w) drawn through `noise`.
ad::Var prvise_loss(const PrviseModel& model, std::span<const ad::Var> vars, ad::Var features,
                    const Eigen::MatrixXd& word_vectors, const PrviseNoise& noise);

double prvise_loss(const PrviseModel& model, const Eigen::VectorXd& feature, const std::string& true_label,
                   const EmbeddingTable& words, Rng& rng);

/// score(y) = -KL(q_i(z|f(x)) || q_w(z|w(y))).
Eigen::MatrixXd prvise_scores(const PrviseModel& model, const Eigen::MatrixXd& features,
                              const Eigen::MatrixXd& label_vectors);
Eigen::MatrixXd prvise_scores(const PrviseModel& model, const Eigen::MatrixXd& features,
                              std::span<const std::string> label_space, const EmbeddingTable& words);

}  // namespace zsl
