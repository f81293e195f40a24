#pragma once

#include <Eigen/Dense>

namespace drcurve {

enum class Link { logistic, identity };

struct GlmOptions {
  int max_iterations = 100;
  double tolerance = 1e-12;
};

struct GlmResult {
  Eigen::VectorXd coefficients;
  int iterations = 0;
};

/// Maximum-likelihood GLM by iteratively reweighted least squares.
///
/// logistic: Bernoulli likelihood; responses in [0, 1] are accepted, which
/// gives the fractional-logit quasi-likelihood fit for proportions.
/// identity: ordinary least squares (single QR solve).
///
/// Columns are rescaled internally; coefficients are reported on the
/// original scale. Throws RankDeficient for collinear designs and
/// NoConvergence when IRLS does not settle within max_iterations.
GlmResult fit_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                  Link link, const GlmOptions& options = {});

/// Score X'(y - mu) at the given coefficients.
Eigen::VectorXd glm_score(const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& y,
                          const Eigen::VectorXd& coefficients, Link link);

}  // namespace drcurve
