#ifndef RSTPARSE_CLASSIFIER_HPP
#define RSTPARSE_CLASSIFIER_HPP

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "rstparse/random.hpp"
#include "rstparse/transition.hpp"

namespace rstparse
{
  // Per-class cross-entropy weights in Action order. The default makes a
  // wrong shift cost as much as the three reduce classes together.
  struct LossWeights
  {
    std::array<double, kNumActions> weights = {3.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};

    double operator[](Action a) const { return weights[action_index(a)]; }
    void validate() const;
  };

  double gelu(double x);
  double gelu_derivative(double x);

  ActionScores softmax(const ActionScores& logits);

  // Softmax restricted to `legal`; illegal actions get probability 0.
  ActionScores action_distribution(const ActionScores& logits, const ActionSet& legal);

  // weight[gold] * -log softmax(logits)[gold]. No legality masking.
  double weighted_loss(const ActionScores& logits, Action gold, const LossWeights& weights);

  // d weighted_loss / d logits.
  ActionScores weighted_loss_gradient(const ActionScores& logits, Action gold, const LossWeights& weights);

  // logits = W2 gelu(W1 x + b1) + b2
  class ActionScorer
  {
  public:
    ActionScorer() = default;
    ActionScorer(int input_dim, int hidden_dim);  // all zeros

    // Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    static ActionScorer random(int input_dim, int hidden_dim, Rng& rng);

    int input_dim() const { return static_cast<int>(w1_.cols()); }
    int hidden_dim() const { return static_cast<int>(w1_.rows()); }

    struct Activations
    {
      Eigen::VectorXd pre;
      Eigen::VectorXd hidden;
    };

    // Throws std::invalid_argument on a dimension mismatch.
    ActionScores score(const Eigen::VectorXd& x, Activations* activations = nullptr) const;

    // Adds parameter gradients into `grad` (same shape) and returns dL/dx.
    Eigen::VectorXd backward(const Eigen::VectorXd& x, const Activations& activations, const ActionScores& dlogits,
                             ActionScorer& grad) const;

    Eigen::MatrixXd& w1() { return w1_; }
    Eigen::MatrixXd& b1() { return b1_; }
    Eigen::MatrixXd& w2() { return w2_; }
    Eigen::MatrixXd& b2() { return b2_; }
    const Eigen::MatrixXd& w1() const { return w1_; }
    const Eigen::MatrixXd& b1() const { return b1_; }
    const Eigen::MatrixXd& w2() const { return w2_; }
    const Eigen::MatrixXd& b2() const { return b2_; }

    std::vector<Eigen::MatrixXd*> parameters() { return {&w1_, &b1_, &w2_, &b2_}; }

  private:
    Eigen::MatrixXd w1_, b1_, w2_, b2_;
  };

  // Scores the concatenation c ++ u; either part may be empty.
  ActionScores score_actions(const ActionScorer& scorer, const Eigen::VectorXd& c, const Eigen::VectorXd& u);
}

#endif
