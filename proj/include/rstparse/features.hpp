#ifndef RSTPARSE_FEATURES_HPP
#define RSTPARSE_FEATURES_HPP

// Organizational features of the (S2, S1, Q1) configuration.
//
// Slot layout (index: meaning):
//   0- 7  S2:  starts-sentence, ends-sentence, starts-paragraph, ends-paragraph,
//              starts-document, ends-document, is-one-sentence, is-one-paragraph
//   8-15  S1:  same eight flags
//  16-23  Q1:  same eight flags
//  24-25  (S2, S1): within-one-sentence, within-one-paragraph
//  26-27  (S1, Q1): within-one-sentence, within-one-paragraph
// A slot whose constituent is absent is Missing and embeds to zeros.

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "rstparse/random.hpp"
#include "rstparse/transition.hpp"

namespace rstparse
{
  enum class FeatureValue : std::int8_t { False = 0, True = 1, Missing = -1 };

  inline constexpr int kNumFeatureSlots = 28;
  inline constexpr int kFeatureEmbeddingDim = 10;
  inline constexpr int kFeatureVectorDim = kNumFeatureSlots * kFeatureEmbeddingDim;

  inline constexpr int kSpanFlags = 8;
  inline constexpr int kSlotS2 = 0;
  inline constexpr int kSlotS1 = 8;
  inline constexpr int kSlotQ1 = 16;
  inline constexpr int kSlotS2S1 = 24;
  inline constexpr int kSlotS1Q1 = 26;

  enum SpanFlag
  {
    kStartsSentence = 0,
    kEndsSentence,
    kStartsParagraph,
    kEndsParagraph,
    kStartsDocument,
    kEndsDocument,
    kOneSentence,
    kOneParagraph
  };

  enum PairFlag { kWithinSentence = 0, kWithinParagraph };

  std::string_view slot_name(int slot);

  struct StructuralFeatureVector
  {
    std::array<FeatureValue, kNumFeatureSlots> slots;

    StructuralFeatureVector() { slots.fill(FeatureValue::Missing); }
    FeatureValue operator[](int k) const { return slots[k]; }
    bool operator==(const StructuralFeatureVector&) const = default;
  };

  // Depends only on spans and layout, never on token content.
  StructuralFeatureVector extract_structural(std::optional<Span> s2, std::optional<Span> s1, std::optional<int> q1,
                                             const DocLayout& layout);
  StructuralFeatureVector extract_structural(const ParserState& state);

  // One {0, 1} -> R^10 table per slot, stored as a 56 x 10 matrix whose row
  // 2k + v holds slot k's vector for value v.
  class FeatureEmbeddingTable
  {
  public:
    FeatureEmbeddingTable() : rows_(Eigen::MatrixXd::Zero(2 * kNumFeatureSlots, kFeatureEmbeddingDim)) {}
    explicit FeatureEmbeddingTable(Eigen::MatrixXd rows);

    // N(0, stddev^2) entries.
    static FeatureEmbeddingTable random(Rng& rng, double stddev = 0.02);

    static int row_of(int slot, FeatureValue v) { return 2 * slot + (v == FeatureValue::True ? 1 : 0); }

    Eigen::VectorXd embed(const StructuralFeatureVector& f) const;

    // grad.row(row_of(k, v)) += du.segment(10 k, 10) for each present slot.
    static void accumulate_gradient(const StructuralFeatureVector& f, const Eigen::Ref<const Eigen::VectorXd>& du,
                                    Eigen::MatrixXd& grad);

    const Eigen::MatrixXd& rows() const { return rows_; }
    Eigen::MatrixXd& rows() { return rows_; }

  private:
    Eigen::MatrixXd rows_;
  };

  Eigen::VectorXd embed_features(const StructuralFeatureVector& f, const FeatureEmbeddingTable& tables);
}

#endif
