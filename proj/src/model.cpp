#include "rstparse/model.hpp"

#include <stdexcept>

#include "rstparse/errors.hpp"
#include "rstparse/transformer.hpp"

namespace rstparse
{
  std::string_view to_string(EncoderKind kind) { return kind == EncoderKind::Hash ? "toy" : "transformer"; }

  std::optional<EncoderKind> parse_encoder_kind(std::string_view name)
  {
    if (name == "toy" || name == "hash") return EncoderKind::Hash;
    if (name == "transformer") return EncoderKind::Transformer;
    return std::nullopt;
  }

  std::string_view to_string(Ablation ablation)
  {
    switch (ablation) {
    case Ablation::None: return "none";
    case Ablation::NoEncoder: return "no_encoder";
    case Ablation::NoFeatures: return "no_features";
    case Ablation::RandomInitEncoder: return "random_init_encoder";
    }
    return "?";
  }

  std::optional<Ablation> parse_ablation(std::string_view name)
  {
    for (auto a : {Ablation::None, Ablation::NoEncoder, Ablation::NoFeatures, Ablation::RandomInitEncoder})
      if (to_string(a) == name) return a;
    return std::nullopt;
  }

  void ModelConfig::apply(Ablation ablation, std::uint64_t seed)
  {
    switch (ablation) {
    case Ablation::None: break;
    case Ablation::NoEncoder: use_encoder = false; break;
    case Ablation::NoFeatures: use_features = false; break;
    case Ablation::RandomInitEncoder:
      random_init_encoder = true;
      encoder_seed = Rng(seed ^ 0xa5a5a5a5a5a5a5a5ULL).next();
      break;
    }
  }

  std::vector<Eigen::MatrixXd*> HeadParameters::tensors()
  {
    auto out = scorer.parameters();
    out.push_back(&features.rows());
    if (attention_query.size()) out.push_back(&attention_query);
    return out;
  }

  HeadParameters HeadParameters::zeros_like() const
  {
    HeadParameters z;
    z.scorer = ActionScorer(scorer.input_dim(), scorer.hidden_dim());
    z.features = FeatureEmbeddingTable();
    z.attention_query = Eigen::MatrixXd::Zero(attention_query.rows(), attention_query.cols());
    return z;
  }

  std::shared_ptr<const SequenceEncoder> make_encoder(const ModelConfig& config)
  {
    if (!config.use_encoder) return nullptr;
    if (config.encoder == EncoderKind::Hash)
      return std::make_shared<HashEncoder>(config.hash_dim,
                                           config.random_init_encoder ? config.encoder_seed : kPretrainedHashSeed);
    if (config.model_dir.empty())
      throw InputError("transformer encoder needs a model directory (--model-dir or RSTPARSE_ENCODER_DIR)");
    return make_transformer_encoder(config.model_dir, config.random_init_encoder, config.encoder_seed);
  }

  ParserModel ParserModel::create(const ModelConfig& config, std::uint64_t seed)
  {
    if (!config.use_encoder && !config.use_features) throw InputError("model needs the encoder, the features, or both");
    if (config.hidden_dim < 1) throw InputError("hidden_dim must be positive");
    ParserModel model;
    model.config_ = config;
    model.encoder_ = make_encoder(config);
    const int d = model.encoder_dim();
    const int input = d + (config.use_features ? kFeatureVectorDim : 0);
    Rng rng(seed);
    model.params_.scorer = ActionScorer::random(input, config.hidden_dim, rng);
    model.params_.features = FeatureEmbeddingTable::random(rng, 0.02);
    if (config.use_encoder && config.summarizer == Summarizer::Attention) {
      model.params_.attention_query = Eigen::MatrixXd(d, 1);
      for (int k = 0; k < d; ++k) model.params_.attention_query(k, 0) = rng.normal(0.0, 0.02);
    }
    return model;
  }

  int ParserModel::encoder_dim() const { return encoder_ ? encoder_->dim() : 0; }

  PreparedDocument ParserModel::prepare(const Document& doc) const
  {
    PreparedDocument prepared;
    if (encoder_) prepared.tokens = tokenize_document(doc, encoder_->tokenizer());
    prepared.layout = std::make_shared<const DocLayout>(doc.layout);
    return prepared;
  }

  EncodedState ParserModel::encode_state(std::optional<Span> s2, std::optional<Span> s1, std::optional<int> q1,
                                         const PreparedDocument& doc) const
  {
    EncodedState state;
    if (config_.use_features) state.features = extract_structural(s2, s1, q1, *doc.layout);
    if (!encoder_) return state;
    auto input = assemble_input(s2, s1, q1, doc.tokens, encoder_->tokenizer().specials());
    switch (config_.summarizer) {
    case Summarizer::Cls:
      state.summary = encode(input, *encoder_);
      break;
    case Summarizer::Mean:
      state.summary = mean_pool(encoder_->hidden_states(input), input);
      break;
    case Summarizer::Attention:
      state.hidden = std::make_shared<const Eigen::MatrixXd>(encoder_->hidden_states(input));
      state.input = input;
      break;
    }
    return state;
  }

  EncodedState ParserModel::encode_state(const ParserState& state, const PreparedDocument& doc) const
  {
    return encode_state(state.s2(), state.s1(), state.q1(), doc);
  }

  Eigen::VectorXd ParserModel::classifier_input(const EncodedState& state, Eigen::VectorXd* summary,
                                                Eigen::VectorXd* attention) const
  {
    Eigen::VectorXd x(input_dim());
    Eigen::Index offset = 0;
    if (encoder_) {
      const int d = encoder_->dim();
      if (config_.summarizer == Summarizer::Attention) {
        if (!state.hidden || !state.input) throw std::logic_error("attention pooling needs hidden states");
        x.head(d) = attention_pool(*state.hidden, *state.input, params_.attention_query.col(0), attention);
      } else {
        if (state.summary.size() != d) throw std::logic_error("encoded state has no summary vector");
        x.head(d) = state.summary;
      }
      if (summary) *summary = x.head(d);
      offset = d;
    }
    if (config_.use_features) x.segment(offset, kFeatureVectorDim) = params_.features.embed(state.features);
    return x;
  }

  ActionScores ParserModel::logits(const EncodedState& state) const
  {
    return params_.scorer.score(classifier_input(state));
  }

  double ParserModel::loss_and_gradient(const EncodedState& state, Action gold, const LossWeights& weights,
                                        HeadParameters& grad) const
  {
    Eigen::VectorXd attention;
    const auto x = classifier_input(state, nullptr, &attention);
    ActionScorer::Activations act;
    const auto logits = params_.scorer.score(x, &act);
    const double loss = weighted_loss(logits, gold, weights);
    const auto dx = params_.scorer.backward(x, act, weighted_loss_gradient(logits, gold, weights), grad.scorer);
    Eigen::Index offset = 0;
    if (encoder_) {
      const int d = encoder_->dim();
      if (config_.summarizer == Summarizer::Attention)
        grad.attention_query.col(0) += attention_pool_query_gradient(*state.hidden, attention, dx.head(d));
      offset = d;
    }
    if (config_.use_features)
      FeatureEmbeddingTable::accumulate_gradient(state.features, dx.segment(offset, kFeatureVectorDim),
                                                 grad.features.rows());
    return loss;
  }

  Policy ParserModel::policy(const PreparedDocument& doc) const
  {
    return [this, &doc](const ParserState& state) {
      return action_distribution(logits(encode_state(state, doc)), legal_actions(state));
    };
  }

  TreeNode ParserModel::parse(const Document& doc) const
  {
    const auto prepared = prepare(doc);
    return greedy_parse(doc.edus, prepared.layout, policy(prepared));
  }

  nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m)
  {
    nlohmann::ordered_json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    j["data"] = std::move(data);
    return j;
  }

  Eigen::MatrixXd matrix_from_json(const nlohmann::ordered_json& j)
  {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw InputError("checkpoint matrix has the wrong number of entries");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
    return m;
  }

  nlohmann::ordered_json ParserModel::to_json() const
  {
    nlohmann::ordered_json cfg;
    cfg["encoder"] = to_string(config_.encoder);
    cfg["hash_dim"] = config_.hash_dim;
    cfg["model_dir"] = config_.model_dir;
    cfg["hidden_dim"] = config_.hidden_dim;
    cfg["summarizer"] = to_string(config_.summarizer);
    cfg["use_encoder"] = config_.use_encoder;
    cfg["use_features"] = config_.use_features;
    cfg["random_init_encoder"] = config_.random_init_encoder;
    cfg["encoder_seed"] = config_.encoder_seed;
    cfg["encoder_dim"] = encoder_dim();
    cfg["input_dim"] = input_dim();

    nlohmann::ordered_json params;
    params["w1"] = matrix_to_json(params_.scorer.w1());
    params["b1"] = matrix_to_json(params_.scorer.b1());
    params["w2"] = matrix_to_json(params_.scorer.w2());
    params["b2"] = matrix_to_json(params_.scorer.b2());
    params["feature_embeddings"] = matrix_to_json(params_.features.rows());
    params["attention_query"] = matrix_to_json(params_.attention_query);

    nlohmann::ordered_json j;
    j["model_config"] = std::move(cfg);
    j["params"] = std::move(params);
    return j;
  }

  ParserModel ParserModel::from_json(const nlohmann::ordered_json& j, const std::string& model_dir_override)
  {
    try {
      const auto& cfg = j.at("model_config");
      ModelConfig config;
      const auto kind = parse_encoder_kind(cfg.at("encoder").get<std::string>());
      const auto summarizer = parse_summarizer(cfg.at("summarizer").get<std::string>());
      if (!kind || !summarizer) throw InputError("checkpoint has an unknown encoder or summarizer");
      config.encoder = *kind;
      config.summarizer = *summarizer;
      config.hash_dim = cfg.at("hash_dim").get<int>();
      config.model_dir = model_dir_override.empty() ? cfg.at("model_dir").get<std::string>() : model_dir_override;
      config.hidden_dim = cfg.at("hidden_dim").get<int>();
      config.use_encoder = cfg.at("use_encoder").get<bool>();
      config.use_features = cfg.at("use_features").get<bool>();
      config.random_init_encoder = cfg.at("random_init_encoder").get<bool>();
      config.encoder_seed = cfg.at("encoder_seed").get<std::uint64_t>();

      ParserModel model;
      model.config_ = config;
      model.encoder_ = make_encoder(config);
      const auto& params = j.at("params");
      model.params_.scorer = ActionScorer(1, 1);
      model.params_.scorer.w1() = matrix_from_json(params.at("w1"));
      model.params_.scorer.b1() = matrix_from_json(params.at("b1"));
      model.params_.scorer.w2() = matrix_from_json(params.at("w2"));
      model.params_.scorer.b2() = matrix_from_json(params.at("b2"));
      model.params_.features = FeatureEmbeddingTable(matrix_from_json(params.at("feature_embeddings")));
      model.params_.attention_query = matrix_from_json(params.at("attention_query"));

      const int expected = model.encoder_dim() + (config.use_features ? kFeatureVectorDim : 0);
      const auto& s = model.params_.scorer;
      if (s.input_dim() != expected || s.b1().rows() != s.hidden_dim() || s.w2().rows() != kNumActions
          || s.w2().cols() != s.hidden_dim() || s.b2().rows() != kNumActions)
        throw InputError("checkpoint scorer shapes do not match its configuration");
      return model;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("malformed checkpoint: ") + e.what());
    }
  }
}
