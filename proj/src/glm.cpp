#include "drcurve/glm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "drcurve/errors.hpp"
#include "drcurve/numeric.hpp"

namespace drcurve {

namespace {

Eigen::VectorXd column_scales(const Eigen::MatrixXd& x) {
  Eigen::VectorXd s(x.cols());
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const double rms = std::sqrt(x.col(k).squaredNorm() /
                                 static_cast<double>(x.rows()));
    s(k) = rms > 0.0 ? rms : 1.0;
  }
  return s;
}

Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) {
    throw RankDeficient("design matrix has rank " + std::to_string(qr.rank()) +
                        " < " + std::to_string(x.cols()) + " columns");
  }
  return qr.solve(y);
}

double bernoulli_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  CompensatedSum dev;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // log(1 + e^eta) - y * eta, computed stably
    const double e = eta(i);
    const double softplus = e > 0 ? e + std::log1p(std::exp(-e))
                                  : std::log1p(std::exp(e));
    dev.add(softplus - y(i) * e);
  }
  return 2.0 * dev.value();
}

}  // namespace

GlmResult fit_glm(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                  Link link, const GlmOptions& options) {
  if (design.rows() != y.size()) {
    throw std::invalid_argument("design rows and response length differ");
  }
  if (design.rows() < design.cols()) {
    throw RankDeficient("fewer observations than design columns");
  }
  const Eigen::VectorXd scale = column_scales(design);
  const Eigen::MatrixXd xs = design * scale.cwiseInverse().asDiagonal();

  GlmResult result;
  if (link == Link::identity) {
    result.coefficients = solve_least_squares(xs, y).cwiseQuotient(scale);
    result.iterations = 1;
    return result;
  }

  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(y(i) >= 0.0 && y(i) <= 1.0)) {
      throw DomainError("logistic responses must lie in [0, 1]");
    }
  }

  const Eigen::Index n = xs.rows();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(xs.cols());
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  double deviance = bernoulli_deviance(y, eta);
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    Eigen::VectorXd sqrt_w(n);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = expit(eta(i));
      const double w = std::max(mu * (1.0 - mu), 1e-300);
      sqrt_w(i) = std::sqrt(w);
      z(i) = eta(i) + (y(i) - mu) / w;
    }
    const Eigen::VectorXd target =
        solve_least_squares(sqrt_w.asDiagonal() * xs, sqrt_w.cwiseProduct(z));

    // Newton step with halving on deviance increase.
    Eigen::VectorXd step = target - beta;
    Eigen::VectorXd next = target;
    Eigen::VectorXd next_eta = xs * next;
    double next_dev = bernoulli_deviance(y, next_eta);
    for (int halving = 0; halving < 30 && !(next_dev <= deviance * (1 + 1e-15));
         ++halving) {
      step *= 0.5;
      next = beta + step;
      next_eta = xs * next;
      next_dev = bernoulli_deviance(y, next_eta);
    }
    const double change = step.cwiseAbs().maxCoeff();
    beta = next;
    eta = next_eta;
    const double dev_change = std::abs(deviance - next_dev);
    deviance = next_dev;
    if (!std::isfinite(deviance)) break;
    const double size = 1.0 + beta.cwiseAbs().maxCoeff();
    if (change <= options.tolerance * size ||
        (dev_change <= 1e-15 * (1.0 + deviance) && change <= 1e-7 * size)) {
      result.coefficients = beta.cwiseQuotient(scale);
      result.iterations = iter;
      return result;
    }
  }
  throw NoConvergence("logistic IRLS did not converge in " +
                      std::to_string(options.max_iterations) + " iterations");
}

Eigen::VectorXd glm_score(const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& y,
                          const Eigen::VectorXd& coefficients, Link link) {
  Eigen::VectorXd eta = design * coefficients;
  Eigen::VectorXd resid(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double mu = link == Link::logistic ? expit(eta(i)) : eta(i);
    resid(i) = y(i) - mu;
  }
  return design.transpose() * resid;
}

}  // namespace drcurve
