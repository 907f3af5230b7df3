#include "rstparse/transformer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "rstparse/errors.hpp"
#include "rstparse/random.hpp"

namespace rstparse
{
  TransformerConfig TransformerConfig::read(const std::filesystem::path& config_json)
  {
    std::ifstream in(config_json);
    if (!in) throw InputError("cannot open " + config_json.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(config_json.string(), 0, e.what());
    }
    TransformerConfig c;
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.hidden_size = j.value("hidden_size", c.hidden_size);
    c.num_layers = j.value("num_hidden_layers", c.num_layers);
    c.num_heads = j.value("num_attention_heads", c.num_heads);
    c.intermediate_size = j.value("intermediate_size", c.intermediate_size);
    c.max_positions = j.value("max_position_embeddings", c.max_positions);
    c.type_vocab_size = j.value("type_vocab_size", c.type_vocab_size);
    c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
    c.pad_token_id = j.value("pad_token_id", c.pad_token_id);
    const auto act = j.value("hidden_act", std::string("gelu"));
    if (act != "gelu") throw InputError(config_json.string() + ": unsupported activation '" + act + "'");
    if (c.hidden_size % c.num_heads != 0) throw InputError(config_json.string() + ": hidden size not divisible by heads");
    return c;
  }

  namespace
  {
    float half_to_float(std::uint16_t h)
    {
      const std::uint32_t sign = (h & 0x8000u) << 16;
      std::uint32_t exp = (h >> 10) & 0x1F;
      std::uint32_t mant = h & 0x3FF;
      std::uint32_t bits;
      if (exp == 0) {
        if (mant == 0) {
          bits = sign;
        } else {
          exp = 127 - 15 + 1;
          while (!(mant & 0x400)) {
            mant <<= 1;
            --exp;
          }
          bits = sign | (exp << 23) | ((mant & 0x3FF) << 13);
        }
      } else if (exp == 31) {
        bits = sign | 0x7F800000u | (mant << 13);
      } else {
        bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
      }
      float f;
      std::memcpy(&f, &bits, sizeof f);
      return f;
    }
  }

  std::map<std::string, StoredTensor> read_safetensors(const std::filesystem::path& path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::uint64_t header_size = 0;
    unsigned char len[8];
    if (!in.read(reinterpret_cast<char*>(len), 8)) throw ParseError(path.string(), 0, "truncated header");
    for (int k = 7; k >= 0; --k) header_size = (header_size << 8) | len[k];
    std::string header(header_size, '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(header_size)))
      throw ParseError(path.string(), 8, "truncated header");
    const auto data_start = 8 + header_size;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), 8, e.what());
    }

    std::map<std::string, StoredTensor> tensors;
    for (const auto& item : j.items()) {
      if (item.key() == "__metadata__") continue;
      const auto& meta = item.value();
      StoredTensor t;
      t.shape = meta.at("shape").get<std::vector<std::int64_t>>();
      const auto offsets = meta.at("data_offsets").get<std::vector<std::uint64_t>>();
      const auto dtype = meta.at("dtype").get<std::string>();
      std::size_t count = 1;
      for (auto s : t.shape) count *= static_cast<std::size_t>(s);
      std::vector<char> raw(offsets.at(1) - offsets.at(0));
      in.seekg(static_cast<std::streamoff>(data_start + offsets[0]));
      if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size())))
        throw ParseError(path.string(), data_start + offsets[0], "truncated tensor " + item.key());
      t.data.resize(count);
      auto expect = [&](std::size_t width) {
        if (raw.size() != count * width) throw ParseError(path.string(), data_start + offsets[0], "size mismatch for " + item.key());
      };
      if (dtype == "F32") {
        expect(4);
        std::memcpy(t.data.data(), raw.data(), raw.size());
      } else if (dtype == "F64") {
        expect(8);
        for (std::size_t k = 0; k < count; ++k) {
          double d;
          std::memcpy(&d, raw.data() + 8 * k, 8);
          t.data[k] = static_cast<float>(d);
        }
      } else if (dtype == "F16" || dtype == "BF16") {
        expect(2);
        for (std::size_t k = 0; k < count; ++k) {
          std::uint16_t h;
          std::memcpy(&h, raw.data() + 2 * k, 2);
          if (dtype == "F16") {
            t.data[k] = half_to_float(h);
          } else {
            const std::uint32_t bits = static_cast<std::uint32_t>(h) << 16;
            std::memcpy(&t.data[k], &bits, 4);
          }
        }
      } else {
        throw InputError(path.string() + ": unsupported dtype " + dtype + " for " + item.key());
      }
      tensors.emplace(item.key(), std::move(t));
    }
    return tensors;
  }

  TransformerEncoder::TransformerEncoder(TransformerConfig config, std::unique_ptr<Tokenizer> tokenizer)
    : config_(config), tokenizer_(std::move(tokenizer))
  {
  }

  std::unique_ptr<TransformerEncoder> TransformerEncoder::load(const std::filesystem::path& model_dir)
  {
    const auto config = TransformerConfig::read(model_dir / "config.json");
    std::unique_ptr<TransformerEncoder> enc(new TransformerEncoder(config, BpeTokenizer::load(model_dir)));
    const auto weights_path = model_dir / "model.safetensors";
    auto tensors = read_safetensors(weights_path);

    std::string prefix;
    for (const auto& [name, _] : tensors) {
      const std::string suffix = "embeddings.word_embeddings.weight";
      if (name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
        prefix = name.substr(0, name.size() - suffix.size());
        break;
      }
    }

    auto take = [&](const std::string& name, std::vector<std::int64_t> shape) -> StoredTensor& {
      auto it = tensors.find(prefix + name);
      if (it == tensors.end()) throw InputError(weights_path.string() + ": missing tensor " + prefix + name);
      if (it->second.shape != shape) throw InputError(weights_path.string() + ": unexpected shape for " + prefix + name);
      return it->second;
    };
    auto matrix = [&](const std::string& name, std::int64_t rows, std::int64_t cols) {
      auto& t = take(name, {rows, cols});
      return Matrix(Eigen::Map<Matrix>(t.data.data(), rows, cols));
    };
    auto vector = [&](const std::string& name, std::int64_t size) {
      auto& t = take(name, {size});
      return Vector(Eigen::Map<Vector>(t.data.data(), size));
    };
    auto linear = [&](const std::string& name, std::int64_t out, std::int64_t in) {
      return Linear{matrix(name + ".weight", out, in), vector(name + ".bias", out)};
    };
    auto norm = [&](const std::string& name, std::int64_t size) {
      return LayerNorm{vector(name + ".weight", size), vector(name + ".bias", size)};
    };

    const auto h = config.hidden_size;
    const auto ff = config.intermediate_size;
    enc->word_embeddings_ = matrix("embeddings.word_embeddings.weight", config.vocab_size, h);
    enc->position_embeddings_ = matrix("embeddings.position_embeddings.weight", config.max_positions, h);
    enc->type_embeddings_ = matrix("embeddings.token_type_embeddings.weight", config.type_vocab_size, h);
    enc->embedding_norm_ = norm("embeddings.LayerNorm", h);
    for (int l = 0; l < config.num_layers; ++l) {
      const auto base = "encoder.layer." + std::to_string(l) + ".";
      Layer layer;
      layer.query = linear(base + "attention.self.query", h, h);
      layer.key = linear(base + "attention.self.key", h, h);
      layer.value = linear(base + "attention.self.value", h, h);
      layer.attention_out = linear(base + "attention.output.dense", h, h);
      layer.attention_norm = norm(base + "attention.output.LayerNorm", h);
      layer.intermediate = linear(base + "intermediate.dense", ff, h);
      layer.output = linear(base + "output.dense", h, ff);
      layer.output_norm = norm(base + "output.LayerNorm", h);
      enc->layers_.push_back(std::move(layer));
    }
    return enc;
  }

  std::unique_ptr<TransformerEncoder> TransformerEncoder::random(const TransformerConfig& config,
                                                                 std::unique_ptr<Tokenizer> tokenizer, std::uint64_t seed)
  {
    std::unique_ptr<TransformerEncoder> enc(new TransformerEncoder(config, std::move(tokenizer)));
    Rng rng(seed);
    auto normal = [&](Eigen::Index rows, Eigen::Index cols) {
      Matrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = static_cast<float>(rng.normal(0.0, 0.02));
      return m;
    };
    auto linear = [&](Eigen::Index out, Eigen::Index in) { return Linear{normal(out, in), Vector::Zero(out)}; };
    auto norm = [](Eigen::Index size) { return LayerNorm{Vector::Ones(size), Vector::Zero(size)}; };

    const auto h = config.hidden_size;
    const auto ff = config.intermediate_size;
    enc->word_embeddings_ = normal(config.vocab_size, h);
    enc->position_embeddings_ = normal(config.max_positions, h);
    enc->type_embeddings_ = normal(config.type_vocab_size, h);
    enc->embedding_norm_ = norm(h);
    for (int l = 0; l < config.num_layers; ++l) {
      Layer layer;
      layer.query = linear(h, h);
      layer.key = linear(h, h);
      layer.value = linear(h, h);
      layer.attention_out = linear(h, h);
      layer.attention_norm = norm(h);
      layer.intermediate = linear(ff, h);
      layer.output = linear(h, ff);
      layer.output_norm = norm(h);
      enc->layers_.push_back(std::move(layer));
    }
    return enc;
  }

  TransformerEncoder::Matrix TransformerEncoder::apply(const Linear& linear, const Matrix& x)
  {
    Matrix y = x * linear.weight.transpose();
    y.rowwise() += linear.bias.transpose();
    return y;
  }

  TransformerEncoder::Matrix TransformerEncoder::normalize(const LayerNorm& norm, const Matrix& x) const
  {
    Matrix y(x.rows(), x.cols());
    const float eps = static_cast<float>(config_.layer_norm_eps);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const float mean = x.row(r).mean();
      const auto centered = (x.row(r).array() - mean).eval();
      const float var = centered.square().mean();
      y.row(r) = (centered / std::sqrt(var + eps)) * norm.weight.transpose().array() + norm.bias.transpose().array();
    }
    return y;
  }

  TransformerEncoder::Matrix TransformerEncoder::forward(const std::vector<TokenId>& ids) const
  {
    const auto len = static_cast<Eigen::Index>(ids.size());
    const int h = config_.hidden_size;
    const int heads = config_.num_heads;
    const int head_dim = h / heads;

    // Position ids count non-padding tokens, offset past the padding index.
    Matrix x(len, h);
    int position = config_.pad_token_id;
    std::vector<bool> is_pad(len);
    for (Eigen::Index t = 0; t < len; ++t) {
      const auto id = ids[t];
      if (id < 0 || id >= config_.vocab_size) throw InputError("token id " + std::to_string(id) + " outside vocabulary");
      is_pad[t] = id == config_.pad_token_id;
      const int pos = is_pad[t] ? config_.pad_token_id : ++position;
      if (pos >= config_.max_positions) throw InputError("input longer than the encoder's position table");
      x.row(t) = word_embeddings_.row(id) + position_embeddings_.row(pos) + type_embeddings_.row(0);
    }
    x = normalize(embedding_norm_, x);

    const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));
    for (const auto& layer : layers_) {
      const Matrix q = apply(layer.query, x);
      const Matrix k = apply(layer.key, x);
      const Matrix v = apply(layer.value, x);
      Matrix context(len, h);
      for (int head = 0; head < heads; ++head) {
        const auto off = head * head_dim;
        Matrix scores = (q.middleCols(off, head_dim) * k.middleCols(off, head_dim).transpose()) * scale;
        for (Eigen::Index r = 0; r < len; ++r) {
          float top = -INFINITY;
          for (Eigen::Index c = 0; c < len; ++c)
            if (!is_pad[c]) top = std::max(top, scores(r, c));
          float z = 0.0f;
          for (Eigen::Index c = 0; c < len; ++c) {
            scores(r, c) = is_pad[c] ? 0.0f : std::exp(scores(r, c) - top);
            z += scores(r, c);
          }
          scores.row(r) /= z;
        }
        context.middleCols(off, head_dim) = scores * v.middleCols(off, head_dim);
      }
      x = normalize(layer.attention_norm, x + apply(layer.attention_out, context));
      Matrix inner = apply(layer.intermediate, x);
      inner = inner.unaryExpr([](float z) { return 0.5f * z * (1.0f + std::erf(z / std::sqrt(2.0f))); });
      x = normalize(layer.output_norm, x + apply(layer.output, inner));
    }
    return x;
  }

  Eigen::MatrixXd TransformerEncoder::hidden_states(const EncoderInput& input) const
  {
    std::vector<TokenId> ids(input.tokens.begin(), input.tokens.end());
    return forward(ids).cast<double>();
  }

  std::unique_ptr<SequenceEncoder> make_transformer_encoder(const std::filesystem::path& model_dir, bool random_init,
                                                            std::uint64_t seed)
  {
    if (!random_init) return TransformerEncoder::load(model_dir);
    return TransformerEncoder::random(TransformerConfig::read(model_dir / "config.json"), BpeTokenizer::load(model_dir),
                                      seed);
  }
}
