#ifndef RSTPARSE_TRANSFORMER_HPP
#define RSTPARSE_TRANSFORMER_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rstparse/encoding.hpp"

namespace rstparse
{
  // RoBERTa-family encoder hyperparameters, as found in a config.json.
  // Defaults describe the 6-layer distilled model.
  struct TransformerConfig
  {
    int vocab_size = 50265;
    int hidden_size = 768;
    int num_layers = 6;
    int num_heads = 12;
    int intermediate_size = 3072;
    int max_positions = 514;
    int type_vocab_size = 1;
    double layer_norm_eps = 1e-5;
    int pad_token_id = 1;

    static TransformerConfig read(const std::filesystem::path& config_json);
  };

  // Tensor as stored in a .safetensors file, converted to float.
  struct StoredTensor
  {
    std::vector<std::int64_t> shape;
    std::vector<float> data;
  };

  std::map<std::string, StoredTensor> read_safetensors(const std::filesystem::path& path);

  // Inference-only RoBERTa encoder. The model directory layout is the usual
  // one: config.json, model.safetensors, vocab.json, merges.txt.
  class TransformerEncoder : public SequenceEncoder
  {
  public:
    using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Vector = Eigen::VectorXf;

    static std::unique_ptr<TransformerEncoder> load(const std::filesystem::path& model_dir);

    // Weights drawn from N(0, 0.02), zero biases, unit layer norms.
    static std::unique_ptr<TransformerEncoder> random(const TransformerConfig& config,
                                                      std::unique_ptr<Tokenizer> tokenizer, std::uint64_t seed);

    int dim() const override { return config_.hidden_size; }
    const Tokenizer& tokenizer() const override { return *tokenizer_; }
    Eigen::MatrixXd hidden_states(const EncoderInput& input) const override;

    const TransformerConfig& config() const { return config_; }

  private:
    struct Linear
    {
      Matrix weight;  // out x in
      Vector bias;
    };

    struct LayerNorm
    {
      Vector weight;
      Vector bias;
    };

    struct Layer
    {
      Linear query, key, value, attention_out;
      LayerNorm attention_norm;
      Linear intermediate, output;
      LayerNorm output_norm;
    };

    TransformerEncoder(TransformerConfig config, std::unique_ptr<Tokenizer> tokenizer);

    Matrix forward(const std::vector<TokenId>& ids) const;
    static Matrix apply(const Linear& linear, const Matrix& x);
    Matrix normalize(const LayerNorm& norm, const Matrix& x) const;

    TransformerConfig config_;
    std::unique_ptr<Tokenizer> tokenizer_;
    Matrix word_embeddings_;
    Matrix position_embeddings_;
    Matrix type_embeddings_;
    LayerNorm embedding_norm_;
    std::vector<Layer> layers_;
  };

  // Loads a transformer from `model_dir`, or, if `random_init` is set,
  // builds one with the same config and tokenizer but fresh weights.
  std::unique_ptr<SequenceEncoder> make_transformer_encoder(const std::filesystem::path& model_dir, bool random_init,
                                                            std::uint64_t seed);
}

#endif
