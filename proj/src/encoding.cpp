#include "rstparse/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rstparse
{
  Segment segment_at(int index)
  {
    if (index >= kS2Range.begin && index < kS2Range.end) return Segment::S2;
    if (index >= kS1Range.begin && index < kS1Range.end) return Segment::S1;
    if (index >= kQ1Range.begin && index < kQ1Range.end) return Segment::Q1;
    return Segment::Control;
  }

  std::vector<TokenId> span_tokens(const Span& span, const std::vector<std::vector<TokenId>>& edu_tokens)
  {
    if (span.first < 1 || span.last > static_cast<int>(edu_tokens.size()) || span.first > span.last)
      throw std::out_of_range("span_tokens: span outside the document");
    std::vector<TokenId> out;
    for (int i = span.first; i <= span.last; ++i) out.insert(out.end(), edu_tokens[i - 1].begin(), edu_tokens[i - 1].end());
    return out;
  }

  std::vector<TokenId> fit_to_budget(std::span<const TokenId> tokens, int budget, int head, int tail, TokenId mask)
  {
    if (head < 0 || tail < 0 || head + tail != budget) throw std::invalid_argument("fit_to_budget: head + tail != budget");
    std::vector<TokenId> out;
    out.reserve(budget);
    if (static_cast<int>(tokens.size()) > budget) {
      out.insert(out.end(), tokens.begin(), tokens.begin() + head);
      out.insert(out.end(), tokens.end() - tail, tokens.end());
    } else {
      out.assign(tokens.begin(), tokens.end());
      out.resize(budget, mask);
    }
    return out;
  }

  namespace
  {
    void fill_block(EncoderInput& input, SegmentRange range, const std::optional<std::vector<TokenId>>& tokens)
    {
      const int budget = range.end - range.begin;
      auto dst = input.tokens.begin() + range.begin;
      if (!tokens) {
        std::fill(dst, dst + budget, input.specials.mask);
        return;
      }
      const auto fitted = fit_to_budget(*tokens, budget, budget / 2, budget - budget / 2, input.specials.mask);
      std::copy(fitted.begin(), fitted.end(), dst);
    }
  }

  EncoderInput assemble_input(const std::optional<std::vector<TokenId>>& s2, const std::optional<std::vector<TokenId>>& s1,
                              const std::optional<std::vector<TokenId>>& q1, const SpecialTokens& specials)
  {
    EncoderInput input;
    input.specials = specials;
    input.tokens[kClsIndex] = specials.cls;
    fill_block(input, kS2Range, s2);
    input.tokens[kSep1Index] = specials.sep;
    fill_block(input, kS1Range, s1);
    input.tokens[kSep2Index] = specials.sep;
    fill_block(input, kQ1Range, q1);
    input.tokens[kSep3Index] = specials.sep;
    return input;
  }

  EncoderInput assemble_input(std::optional<Span> s2, std::optional<Span> s1, std::optional<int> q1,
                              const std::vector<std::vector<TokenId>>& edu_tokens, const SpecialTokens& specials)
  {
    auto tokens_of = [&](std::optional<Span> span) -> std::optional<std::vector<TokenId>> {
      if (!span) return std::nullopt;
      return span_tokens(*span, edu_tokens);
    };
    std::optional<Span> q1_span;
    if (q1) q1_span = Span{*q1, *q1};
    return assemble_input(tokens_of(s2), tokens_of(s1), tokens_of(q1_span), specials);
  }

  EncoderInput assemble_input(const ParserState& state, const std::vector<std::vector<TokenId>>& edu_tokens,
                              const SpecialTokens& specials)
  {
    return assemble_input(state.s2(), state.s1(), state.q1(), edu_tokens, specials);
  }

  Eigen::VectorXd SequenceEncoder::cls_vector(const EncoderInput& input) const
  {
    return hidden_states(input).row(kClsIndex).transpose();
  }

  Eigen::VectorXd encode(const EncoderInput& input, const SequenceEncoder& encoder)
  {
    return encoder.cls_vector(input);
  }

  namespace
  {
    std::uint64_t splitmix(std::uint64_t x)
    {
      x += 0x9e3779b97f4a7c15ULL;
      x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
      x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
      return x ^ (x >> 31);
    }

    std::uint64_t combine(std::uint64_t h, std::uint64_t v) { return splitmix(h ^ (v + 0x632be59bd9b4e019ULL + (h << 6))); }
  }

  HashEncoder::HashEncoder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed)
  {
    if (dim < 1) throw std::invalid_argument("HashEncoder: dimension must be positive");
  }

  void HashEncoder::add_features(const EncoderInput& input, int position, Segment segment,
                                 Eigen::Ref<Eigen::VectorXd> row) const
  {
    const TokenId mask = input.specials.mask;
    const TokenId token = input.tokens[position];
    if (token == mask) return;
    auto bump = [&](std::uint64_t h) {
      const auto idx = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_));
      row[idx] += (h >> 63) ? -1.0 : 1.0;
    };
    const std::uint64_t base = combine(seed_, static_cast<std::uint64_t>(segment));
    bump(combine(combine(base, 1), static_cast<std::uint64_t>(token)));
    if (segment_at(position - 1) == segment && input.tokens[position - 1] != mask)
      bump(combine(combine(combine(base, 2), static_cast<std::uint64_t>(input.tokens[position - 1])),
                   static_cast<std::uint64_t>(token)));
  }

  Eigen::VectorXd HashEncoder::cls_vector(const EncoderInput& input) const
  {
    Eigen::VectorXd cls = Eigen::VectorXd::Zero(dim_);
    for (auto [segment, range] : {std::pair{Segment::S2, kS2Range}, std::pair{Segment::S1, kS1Range},
                                  std::pair{Segment::Q1, kQ1Range}}) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_);
      int count = 0;
      for (int p = range.begin; p < range.end; ++p) {
        if (input.tokens[p] == input.specials.mask) continue;
        add_features(input, p, segment, acc);
        ++count;
      }
      if (count) cls += acc / std::sqrt(static_cast<double>(count));
    }
    return cls;
  }

  Eigen::MatrixXd HashEncoder::hidden_states(const EncoderInput& input) const
  {
    Eigen::MatrixXd hidden = Eigen::MatrixXd::Zero(kInputLength, dim_);
    for (int p = 0; p < kInputLength; ++p) {
      const auto segment = segment_at(p);
      if (segment == Segment::Control) continue;
      Eigen::VectorXd row = Eigen::VectorXd::Zero(dim_);
      add_features(input, p, segment, row);
      hidden.row(p) = row.transpose();
    }
    hidden.row(kClsIndex) = cls_vector(input).transpose();
    return hidden;
  }

  std::string_view to_string(Summarizer s)
  {
    switch (s) {
    case Summarizer::Cls: return "cls";
    case Summarizer::Mean: return "mean";
    case Summarizer::Attention: return "attention";
    }
    return "?";
  }

  std::optional<Summarizer> parse_summarizer(std::string_view name)
  {
    for (auto s : {Summarizer::Cls, Summarizer::Mean, Summarizer::Attention})
      if (to_string(s) == name) return s;
    return std::nullopt;
  }

  Eigen::VectorXd mean_pool(const Eigen::MatrixXd& hidden, const EncoderInput& input)
  {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(hidden.cols());
    int count = 0;
    for (int p = 0; p < kInputLength; ++p) {
      if (input.tokens[p] == input.specials.mask) continue;
      sum += hidden.row(p).transpose();
      ++count;
    }
    return sum / static_cast<double>(std::max(count, 1));
  }

  Eigen::VectorXd attention_pool(const Eigen::MatrixXd& hidden, const EncoderInput& input, const Eigen::VectorXd& query,
                                 Eigen::VectorXd* weights)
  {
    Eigen::VectorXd scores = hidden * query;
    double top = -INFINITY;
    for (int p = 0; p < kInputLength; ++p)
      if (input.tokens[p] != input.specials.mask) top = std::max(top, scores[p]);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(kInputLength);
    double z = 0.0;
    for (int p = 0; p < kInputLength; ++p) {
      if (input.tokens[p] == input.specials.mask) continue;
      a[p] = std::exp(scores[p] - top);
      z += a[p];
    }
    a /= z;
    if (weights) *weights = a;
    return hidden.transpose() * a;
  }

  Eigen::VectorXd attention_pool_query_gradient(const Eigen::MatrixXd& hidden, const Eigen::VectorXd& weights,
                                                const Eigen::VectorXd& grad_summary)
  {
    const Eigen::VectorXd hg = hidden * grad_summary;
    const double mean = weights.dot(hg);
    const Eigen::VectorXd ds = weights.cwiseProduct((hg.array() - mean).matrix());
    return hidden.transpose() * ds;
  }
}
