#include "rstparse/features.hpp"

#include <stdexcept>

namespace rstparse
{
  namespace
  {
    FeatureValue flag(bool b) { return b ? FeatureValue::True : FeatureValue::False; }

    void span_flags(const Span& s, const DocLayout& layout, StructuralFeatureVector& f, int base)
    {
      const auto& first_sentence = layout.sentence_span(s.first);
      const auto& last_sentence = layout.sentence_span(s.last);
      const auto& first_paragraph = layout.paragraph_span(s.first);
      const auto& last_paragraph = layout.paragraph_span(s.last);
      f.slots[base + kStartsSentence] = flag(first_sentence.first == s.first);
      f.slots[base + kEndsSentence] = flag(last_sentence.last == s.last);
      f.slots[base + kStartsParagraph] = flag(first_paragraph.first == s.first);
      f.slots[base + kEndsParagraph] = flag(last_paragraph.last == s.last);
      f.slots[base + kStartsDocument] = flag(s.first == 1);
      f.slots[base + kEndsDocument] = flag(s.last == layout.size());
      f.slots[base + kOneSentence] = flag(first_sentence == s);
      f.slots[base + kOneParagraph] = flag(first_paragraph == s);
    }

    void pair_flags(const Span& left, const Span& right, const DocLayout& layout, StructuralFeatureVector& f, int base)
    {
      f.slots[base + kWithinSentence] = flag(layout.sentence_of(left.first) == layout.sentence_of(right.last));
      f.slots[base + kWithinParagraph] = flag(layout.paragraph_of(left.first) == layout.paragraph_of(right.last));
    }
  }

  std::string_view slot_name(int slot)
  {
    static const char* names[kNumFeatureSlots] = {
      "S2.starts_sentence", "S2.ends_sentence", "S2.starts_paragraph", "S2.ends_paragraph",
      "S2.starts_document", "S2.ends_document", "S2.one_sentence",     "S2.one_paragraph",
      "S1.starts_sentence", "S1.ends_sentence", "S1.starts_paragraph", "S1.ends_paragraph",
      "S1.starts_document", "S1.ends_document", "S1.one_sentence",     "S1.one_paragraph",
      "Q1.starts_sentence", "Q1.ends_sentence", "Q1.starts_paragraph", "Q1.ends_paragraph",
      "Q1.starts_document", "Q1.ends_document", "Q1.one_sentence",     "Q1.one_paragraph",
      "S2S1.within_sentence", "S2S1.within_paragraph", "S1Q1.within_sentence", "S1Q1.within_paragraph"};
    if (slot < 0 || slot >= kNumFeatureSlots) throw std::out_of_range("feature slot");
    return names[slot];
  }

  StructuralFeatureVector extract_structural(std::optional<Span> s2, std::optional<Span> s1, std::optional<int> q1,
                                             const DocLayout& layout)
  {
    StructuralFeatureVector f;
    std::optional<Span> q1_span;
    if (q1) q1_span = Span{*q1, *q1};
    if (s2) span_flags(*s2, layout, f, kSlotS2);
    if (s1) span_flags(*s1, layout, f, kSlotS1);
    if (q1_span) span_flags(*q1_span, layout, f, kSlotQ1);
    if (s2 && s1) pair_flags(*s2, *s1, layout, f, kSlotS2S1);
    if (s1 && q1_span) pair_flags(*s1, *q1_span, layout, f, kSlotS1Q1);
    return f;
  }

  StructuralFeatureVector extract_structural(const ParserState& state)
  {
    return extract_structural(state.s2(), state.s1(), state.q1(), state.layout());
  }

  FeatureEmbeddingTable::FeatureEmbeddingTable(Eigen::MatrixXd rows) : rows_(std::move(rows))
  {
    if (rows_.rows() != 2 * kNumFeatureSlots || rows_.cols() != kFeatureEmbeddingDim)
      throw std::invalid_argument("feature embedding table must be 56 x 10");
  }

  FeatureEmbeddingTable FeatureEmbeddingTable::random(Rng& rng, double stddev)
  {
    Eigen::MatrixXd rows(2 * kNumFeatureSlots, kFeatureEmbeddingDim);
    for (Eigen::Index r = 0; r < rows.rows(); ++r)
      for (Eigen::Index c = 0; c < rows.cols(); ++c) rows(r, c) = rng.normal(0.0, stddev);
    return FeatureEmbeddingTable(std::move(rows));
  }

  Eigen::VectorXd FeatureEmbeddingTable::embed(const StructuralFeatureVector& f) const
  {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(kFeatureVectorDim);
    for (int k = 0; k < kNumFeatureSlots; ++k)
      if (f[k] != FeatureValue::Missing)
        u.segment(k * kFeatureEmbeddingDim, kFeatureEmbeddingDim) = rows_.row(row_of(k, f[k])).transpose();
    return u;
  }

  void FeatureEmbeddingTable::accumulate_gradient(const StructuralFeatureVector& f,
                                                  const Eigen::Ref<const Eigen::VectorXd>& du, Eigen::MatrixXd& grad)
  {
    for (int k = 0; k < kNumFeatureSlots; ++k)
      if (f[k] != FeatureValue::Missing)
        grad.row(row_of(k, f[k])) += du.segment(k * kFeatureEmbeddingDim, kFeatureEmbeddingDim).transpose();
  }

  Eigen::VectorXd embed_features(const StructuralFeatureVector& f, const FeatureEmbeddingTable& tables)
  {
    return tables.embed(f);
  }
}
