#ifndef RSTPARSE_MODEL_HPP
#define RSTPARSE_MODEL_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rstparse/classifier.hpp"
#include "rstparse/encoding.hpp"
#include "rstparse/features.hpp"
#include "rstparse/transition.hpp"

namespace rstparse
{
  enum class EncoderKind { Hash, Transformer };

  enum class Ablation { None, NoEncoder, NoFeatures, RandomInitEncoder };

  std::string_view to_string(EncoderKind kind);
  std::optional<EncoderKind> parse_encoder_kind(std::string_view name);
  std::string_view to_string(Ablation ablation);
  std::optional<Ablation> parse_ablation(std::string_view name);

  // Seed of the hash encoder when it stands in for a pretrained model.
  inline constexpr std::uint64_t kPretrainedHashSeed = 0x5eedf00dULL;

  struct ModelConfig
  {
    EncoderKind encoder = EncoderKind::Hash;
    int hash_dim = 128;
    std::string model_dir;  // transformer artifacts
    int hidden_dim = 512;
    Summarizer summarizer = Summarizer::Cls;
    bool use_encoder = true;
    bool use_features = true;
    bool random_init_encoder = false;
    std::uint64_t encoder_seed = kPretrainedHashSeed;

    void apply(Ablation ablation, std::uint64_t seed);
  };

  // Everything the optimizer updates. The same shape doubles as a gradient buffer.
  struct HeadParameters
  {
    ActionScorer scorer;
    FeatureEmbeddingTable features;
    Eigen::MatrixXd attention_query;  // d x 1, or empty

    std::vector<Eigen::MatrixXd*> tensors();
    HeadParameters zeros_like() const;
  };

  // Per-document data reused across all configurations of that document.
  struct PreparedDocument
  {
    std::vector<std::vector<TokenId>> tokens;
    std::shared_ptr<const DocLayout> layout;
  };

  // The classifier's view of one configuration, with the encoder already run.
  struct EncodedState
  {
    StructuralFeatureVector features;
    Eigen::VectorXd summary;  // c; empty when the encoder is ablated or pooling is learned
    std::shared_ptr<const Eigen::MatrixXd> hidden;  // attention pooling only
    std::optional<EncoderInput> input;              // attention pooling only
  };

  class ParserModel
  {
  public:
    // Builds the encoder and a freshly initialized head.
    static ParserModel create(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    int encoder_dim() const;
    int input_dim() const { return params_.scorer.input_dim(); }

    const SequenceEncoder* encoder() const { return encoder_.get(); }

    HeadParameters& parameters() { return params_; }
    const HeadParameters& parameters() const { return params_; }

    PreparedDocument prepare(const Document& doc) const;

    EncodedState encode_state(std::optional<Span> s2, std::optional<Span> s1, std::optional<int> q1,
                              const PreparedDocument& doc) const;
    EncodedState encode_state(const ParserState& state, const PreparedDocument& doc) const;

    ActionScores logits(const EncodedState& state) const;

    // Weighted loss of one configuration; adds its gradient into `grad`.
    double loss_and_gradient(const EncodedState& state, Action gold, const LossWeights& weights,
                             HeadParameters& grad) const;

    Policy policy(const PreparedDocument& doc) const;
    TreeNode parse(const Document& doc) const;

    nlohmann::ordered_json to_json() const;

    // `model_dir_override` replaces a stored transformer directory when non-empty.
    static ParserModel from_json(const nlohmann::ordered_json& j, const std::string& model_dir_override = "");

  private:
    Eigen::VectorXd classifier_input(const EncodedState& state, Eigen::VectorXd* summary = nullptr,
                                     Eigen::VectorXd* attention = nullptr) const;

    ModelConfig config_;
    std::shared_ptr<const SequenceEncoder> encoder_;
    HeadParameters params_;
  };

  std::shared_ptr<const SequenceEncoder> make_encoder(const ModelConfig& config);

  nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m);
  Eigen::MatrixXd matrix_from_json(const nlohmann::ordered_json& j);
}

#endif
