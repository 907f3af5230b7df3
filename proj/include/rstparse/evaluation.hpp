#ifndef RSTPARSE_EVALUATION_HPP
#define RSTPARSE_EVALUATION_HPP

// Span-based discourse evaluation.
//
// Original Parseval scores the internal nodes of binary trees, each labeled
// with its own nuclearity (NN/NS/SN); the root is left out by default.
// RST-Parseval scores every node except the root, leaves included, each
// labeled with its role (N/S) under its parent. Both report micro-averaged
// precision, recall and F1 from counts pooled over the corpus.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rstparse/tree.hpp"

namespace rstparse
{
  enum class Metric { Original, RstParseval };
  enum class Facet { Structure, Nuclearity };

  std::string_view to_string(Metric m);
  std::string_view to_string(Facet f);

  enum class SpanLabel { NN, NS, SN, N, S };
  std::string_view to_string(SpanLabel l);

  struct ScoredSpan
  {
    Span span;
    SpanLabel label;

    auto operator<=>(const ScoredSpan&) const = default;
  };

  // Sorted by span; at most one entry per span.
  using ScoredSpanSet = std::vector<ScoredSpan>;

  ScoredSpanSet spans_original(const TreeNode& tree, bool include_root = false);
  ScoredSpanSet spans_rst(const TreeNode& tree);

  struct PRF
  {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long matched = 0;
    long gold = 0;
    long predicted = 0;
  };

  // Percentages from pooled counts. With nothing to find and nothing
  // predicted, all three are 100.
  PRF prf_from_counts(long matched, long gold, long predicted);

  // Throws IntegrityError if paired trees cover different numbers of EDUs.
  PRF micro_f1(const std::vector<TreeNode>& gold, const std::vector<TreeNode>& pred, Metric metric, Facet facet,
               bool include_root = false);

  struct ScoreReport
  {
    struct Entry
    {
      Metric metric;
      Facet facet;
      bool include_root;
      PRF score;
    };

    std::vector<Entry> entries;
    long n_docs = 0;

    const PRF& get(Metric metric, Facet facet, bool include_root = false) const;
    std::string to_text() const;
    // One record per entry: {metric, facet, include_root, P, R, F1, n_docs, n_gold_spans, n_pred_spans}
    nlohmann::ordered_json to_json() const;
  };

  struct EvalOptions
  {
    bool original = true;
    bool rst = true;
    bool include_root = false;
    bool both_root_conventions = false;
  };

  ScoreReport score_trees(const std::vector<TreeNode>& gold, const std::vector<TreeNode>& pred,
                          const EvalOptions& options = {});

  // Pairs documents by doc_id. Gold trees are binarized first. Throws
  // InputError listing ids that are missing on either side.
  ScoreReport evaluate_corpus(const std::vector<Document>& gold, const std::vector<Document>& pred,
                              const EvalOptions& options = {});
}

#endif
