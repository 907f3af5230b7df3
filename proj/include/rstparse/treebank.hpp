#ifndef RSTPARSE_TREEBANK_HPP
#define RSTPARSE_TREEBANK_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "rstparse/random.hpp"
#include "rstparse/tree.hpp"

namespace rstparse
{
  // Right-branching binarization: node(c1..ck) -> node(c1, node(c2..ck)).
  // A remainder is a nucleus iff any of its members is.
  TreeNode binarize(const TreeNode& tree);

  // Combines adjacent roots t1..tk into t1 over (t2 over (... tk)), all NN.
  TreeNode merge_multi_root(std::vector<TreeNode> roots);

  struct CorpusSplit
  {
    std::vector<Document> train;
    std::vector<Document> heldout;
  };

  // Seeded shuffle, then the first round(ratio * N) documents go to train.
  CorpusSplit split_corpus(std::vector<Document> docs, double ratio, std::uint64_t seed);

  // Uniform split points, uniform nuclearity labels.
  TreeNode random_binary_tree(Rng& rng, int first, int last);

  // Random tree built bottom-up over the layout: within each sentence, then
  // over the sentences of each paragraph, then over paragraphs. No node
  // crosses a sentence or paragraph boundary without covering whole units.
  TreeNode random_layered_tree(Rng& rng, const DocLayout& layout);

  // Documents with skewed random words, random sentence and paragraph breaks
  // and layered random trees.
  std::vector<Document> generate_synthetic_corpus(std::uint64_t seed, int n_docs, int min_edus, int max_edus);

  // Fraction of internal nodes of the gold trees that cross a sentence
  // boundary without being made of whole sentences.
  double sentence_boundary_violation_rate(const std::vector<Document>& docs);
}

#endif
