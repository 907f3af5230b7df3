#ifndef RSTPARSE_ENCODING_HPP
#define RSTPARSE_ENCODING_HPP

// Encoder input assembly and sequence encoders.
//
// Every configuration is rendered into a fixed 512-token layout so that each
// constituent always occupies the same absolute positions:
//
//   [CLS] S2 (240) [SEP] S1 (240) [SEP] Q1 (28) [SEP]
//   0     1..240   241   242..481 482   483..510 511
//
// Over-long constituents keep their leading and trailing halves; short or
// absent ones are padded with [MASK].

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rstparse/tokenizer.hpp"
#include "rstparse/transition.hpp"

namespace rstparse
{
  inline constexpr int kStackBudget = 240;
  inline constexpr int kQueueBudget = 28;
  inline constexpr int kInputLength = 1 + kStackBudget + 1 + kStackBudget + 1 + kQueueBudget + 1;
  static_assert(kInputLength == 512);

  enum class Segment { Control, S2, S1, Q1 };

  struct SegmentRange
  {
    int begin;  // first index
    int end;    // one past the last
  };

  inline constexpr int kClsIndex = 0;
  inline constexpr SegmentRange kS2Range{1, 1 + kStackBudget};
  inline constexpr int kSep1Index = kS2Range.end;
  inline constexpr SegmentRange kS1Range{kSep1Index + 1, kSep1Index + 1 + kStackBudget};
  inline constexpr int kSep2Index = kS1Range.end;
  inline constexpr SegmentRange kQ1Range{kSep2Index + 1, kSep2Index + 1 + kQueueBudget};
  inline constexpr int kSep3Index = kQ1Range.end;
  static_assert(kSep1Index == 241 && kSep2Index == 482 && kSep3Index == 511);

  Segment segment_at(int index);

  struct EncoderInput
  {
    std::array<TokenId, kInputLength> tokens;
    SpecialTokens specials;

    bool operator==(const EncoderInput&) const = default;
  };

  // Concatenated token ids of the EDUs covered by `span`.
  std::vector<TokenId> span_tokens(const Span& span, const std::vector<std::vector<TokenId>>& edu_tokens);

  // Exactly `budget` tokens: head ++ tail when too long, mask-padded otherwise.
  std::vector<TokenId> fit_to_budget(std::span<const TokenId> tokens, int budget, int head, int tail, TokenId mask);

  // An absent constituent is an all-[MASK] block.
  EncoderInput assemble_input(const std::optional<std::vector<TokenId>>& s2, const std::optional<std::vector<TokenId>>& s1,
                              const std::optional<std::vector<TokenId>>& q1, const SpecialTokens& specials);

  EncoderInput assemble_input(const ParserState& state, const std::vector<std::vector<TokenId>>& edu_tokens,
                              const SpecialTokens& specials);

  // Same, from the three constituent spans of a configuration.
  EncoderInput assemble_input(std::optional<Span> s2, std::optional<Span> s1, std::optional<int> q1,
                              const std::vector<std::vector<TokenId>>& edu_tokens, const SpecialTokens& specials);

  // Black-box contextual encoder: one hidden vector per input position.
  // Implementations must be deterministic and safe for concurrent calls.
  class SequenceEncoder
  {
  public:
    virtual ~SequenceEncoder() = default;

    virtual int dim() const = 0;
    virtual const Tokenizer& tokenizer() const = 0;

    // kInputLength x dim()
    virtual Eigen::MatrixXd hidden_states(const EncoderInput& input) const = 0;

    // Hidden vector at the [CLS] position.
    virtual Eigen::VectorXd cls_vector(const EncoderInput& input) const;
  };

  Eigen::VectorXd encode(const EncoderInput& input, const SequenceEncoder& encoder);

  // Signed feature hashing of token unigrams and bigrams within each
  // segment. [MASK] padding never contributes. The [CLS] row is the sum of
  // each segment's hashed counts scaled by 1/sqrt(count).
  class HashEncoder : public SequenceEncoder
  {
  public:
    HashEncoder(int dim, std::uint64_t seed);

    int dim() const override { return dim_; }
    const Tokenizer& tokenizer() const override { return tokenizer_; }
    Eigen::MatrixXd hidden_states(const EncoderInput& input) const override;
    Eigen::VectorXd cls_vector(const EncoderInput& input) const override;

    std::uint64_t seed() const { return seed_; }

  private:
    void add_features(const EncoderInput& input, int position, Segment segment, Eigen::Ref<Eigen::VectorXd> row) const;

    int dim_;
    std::uint64_t seed_;
    HashTokenizer tokenizer_;
  };

  // How the hidden states are reduced to the summary vector c.
  enum class Summarizer { Cls, Mean, Attention };

  std::string_view to_string(Summarizer s);
  std::optional<Summarizer> parse_summarizer(std::string_view name);

  // Mean over positions that do not hold [MASK].
  Eigen::VectorXd mean_pool(const Eigen::MatrixXd& hidden, const EncoderInput& input);

  // softmax(H q)-weighted sum over positions that do not hold [MASK];
  // `weights` receives the attention distribution (zeros at masked rows).
  Eigen::VectorXd attention_pool(const Eigen::MatrixXd& hidden, const EncoderInput& input, const Eigen::VectorXd& query,
                                 Eigen::VectorXd* weights = nullptr);

  // Gradient of attention_pool w.r.t. the query, given dL/dc.
  Eigen::VectorXd attention_pool_query_gradient(const Eigen::MatrixXd& hidden, const Eigen::VectorXd& weights,
                                                const Eigen::VectorXd& grad_summary);
}

#endif
