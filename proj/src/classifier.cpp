#include "rstparse/classifier.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rstparse
{
  void LossWeights::validate() const
  {
    for (double w : weights)
      if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("loss weights must be positive");
  }

  double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / M_SQRT2)); }

  double gelu_derivative(double x)
  {
    const double cdf = 0.5 * (1.0 + std::erf(x / M_SQRT2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return cdf + x * pdf;
  }

  ActionScores softmax(const ActionScores& logits)
  {
    double top = logits[0];
    for (double l : logits) top = std::max(top, l);
    ActionScores p;
    double z = 0.0;
    for (std::size_t k = 0; k < kNumActions; ++k) z += p[k] = std::exp(logits[k] - top);
    for (auto& v : p) v /= z;
    return p;
  }

  ActionScores action_distribution(const ActionScores& logits, const ActionSet& legal)
  {
    if (legal.empty()) throw std::invalid_argument("action_distribution: no legal action");
    double top = -INFINITY;
    for (auto a : kAllActions)
      if (legal.contains(a)) top = std::max(top, logits[action_index(a)]);
    ActionScores p{};
    double z = 0.0;
    for (auto a : kAllActions)
      if (legal.contains(a)) z += p[action_index(a)] = std::exp(logits[action_index(a)] - top);
    for (auto& v : p) v /= z;
    return p;
  }

  double weighted_loss(const ActionScores& logits, Action gold, const LossWeights& weights)
  {
    double top = logits[0];
    for (double l : logits) top = std::max(top, l);
    double z = 0.0;
    for (double l : logits) z += std::exp(l - top);
    const double log_p = logits[action_index(gold)] - top - std::log(z);
    return -weights[gold] * log_p;
  }

  ActionScores weighted_loss_gradient(const ActionScores& logits, Action gold, const LossWeights& weights)
  {
    auto grad = softmax(logits);
    grad[action_index(gold)] -= 1.0;
    for (auto& g : grad) g *= weights[gold];
    return grad;
  }

  ActionScorer::ActionScorer(int input_dim, int hidden_dim)
    : w1_(Eigen::MatrixXd::Zero(hidden_dim, input_dim)), b1_(Eigen::MatrixXd::Zero(hidden_dim, 1)),
      w2_(Eigen::MatrixXd::Zero(kNumActions, hidden_dim)), b2_(Eigen::MatrixXd::Zero(kNumActions, 1))
  {
    if (input_dim < 1 || hidden_dim < 1) throw std::invalid_argument("ActionScorer: dimensions must be positive");
  }

  ActionScorer ActionScorer::random(int input_dim, int hidden_dim, Rng& rng)
  {
    ActionScorer s(input_dim, hidden_dim);
    auto fill = [&rng](Eigen::MatrixXd& m, int fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-bound, bound);
    };
    fill(s.w1_, input_dim);
    fill(s.b1_, input_dim);
    fill(s.w2_, hidden_dim);
    fill(s.b2_, hidden_dim);
    return s;
  }

  ActionScores ActionScorer::score(const Eigen::VectorXd& x, Activations* activations) const
  {
    if (x.size() != w1_.cols())
      throw std::invalid_argument("ActionScorer: input has " + std::to_string(x.size()) + " entries, expected "
                                  + std::to_string(w1_.cols()));
    Eigen::VectorXd pre = w1_ * x + b1_.col(0);
    Eigen::VectorXd hidden = pre.unaryExpr([](double v) { return gelu(v); });
    const Eigen::VectorXd logits = w2_ * hidden + b2_.col(0);
    if (activations) {
      activations->pre = std::move(pre);
      activations->hidden = std::move(hidden);
    }
    ActionScores out;
    for (std::size_t k = 0; k < kNumActions; ++k) out[k] = logits[static_cast<Eigen::Index>(k)];
    return out;
  }

  Eigen::VectorXd ActionScorer::backward(const Eigen::VectorXd& x, const Activations& act, const ActionScores& dlogits,
                                         ActionScorer& grad) const
  {
    const Eigen::Map<const Eigen::VectorXd> dl(dlogits.data(), kNumActions);
    grad.w2_.noalias() += dl * act.hidden.transpose();
    grad.b2_.col(0) += dl;
    const Eigen::VectorXd dhidden = w2_.transpose() * dl;
    const Eigen::VectorXd dpre = dhidden.cwiseProduct(act.pre.unaryExpr([](double v) { return gelu_derivative(v); }));
    grad.w1_.noalias() += dpre * x.transpose();
    grad.b1_.col(0) += dpre;
    return w1_.transpose() * dpre;
  }

  ActionScores score_actions(const ActionScorer& scorer, const Eigen::VectorXd& c, const Eigen::VectorXd& u)
  {
    Eigen::VectorXd x(c.size() + u.size());
    x << c, u;
    return scorer.score(x);
  }
}
