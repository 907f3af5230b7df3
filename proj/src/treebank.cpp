#include "rstparse/treebank.hpp"

#include <cmath>
#include <cstdio>

#include "rstparse/errors.hpp"

namespace rstparse
{
  namespace
  {
    struct Binarized
    {
      TreeNode node;
      Role role;
    };

    Binarized binarize_range(const TreeNode& parent, std::size_t from)
    {
      const auto& children = parent.children;
      if (from + 1 == children.size()) return {binarize(children[from]), parent.roles[from]};
      auto rest = binarize_range(parent, from + 1);
      const Role head = parent.roles[from];
      const Role role = (head == Role::Nucleus || rest.role == Role::Nucleus) ? Role::Nucleus : Role::Satellite;
      return {TreeNode::join(binarize(children[from]), std::move(rest.node), nuclearity_from_roles(head, rest.role)),
              role};
    }
  }

  TreeNode binarize(const TreeNode& tree)
  {
    if (tree.is_leaf()) return tree;
    if (tree.roles.size() != tree.children.size())
      throw IntegrityError("internal node without nuclearity cannot be binarized");
    return binarize_range(tree, 0).node;
  }

  TreeNode merge_multi_root(std::vector<TreeNode> roots)
  {
    if (roots.empty()) throw IntegrityError("merge_multi_root: no trees");
    for (std::size_t k = 1; k < roots.size(); ++k)
      if (roots[k - 1].span.last + 1 != roots[k].span.first)
        throw IntegrityError("merge_multi_root: roots (" + std::to_string(roots[k - 1].span.first) + ","
                             + std::to_string(roots[k - 1].span.last) + ") and ("
                             + std::to_string(roots[k].span.first) + "," + std::to_string(roots[k].span.last)
                             + ") are not adjacent");
    TreeNode merged = std::move(roots.back());
    for (std::size_t k = roots.size() - 1; k-- > 0;)
      merged = TreeNode::join(std::move(roots[k]), std::move(merged), Nuclearity::NN);
    return merged;
  }

  CorpusSplit split_corpus(std::vector<Document> docs, double ratio, std::uint64_t seed)
  {
    if (docs.empty()) throw InputError("split_corpus: empty corpus");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("split_corpus: ratio must lie in (0, 1)");
    Rng rng(seed);
    rng.shuffle(docs);
    const auto n_train = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(docs.size())));
    CorpusSplit split;
    split.train.assign(std::make_move_iterator(docs.begin()), std::make_move_iterator(docs.begin() + n_train));
    split.heldout.assign(std::make_move_iterator(docs.begin() + n_train), std::make_move_iterator(docs.end()));
    return split;
  }

  TreeNode random_binary_tree(Rng& rng, int first, int last)
  {
    if (first == last) return TreeNode::leaf(first);
    const int split = rng.uniform_int(first, last - 1);
    auto left = random_binary_tree(rng, first, split);
    auto right = random_binary_tree(rng, split + 1, last);
    return TreeNode::join(std::move(left), std::move(right), static_cast<Nuclearity>(rng.index(3)));
  }

  namespace
  {
    TreeNode random_join(Rng& rng, std::vector<TreeNode>& units, std::size_t lo, std::size_t hi)
    {
      if (lo == hi) return std::move(units[lo]);
      const auto split = lo + rng.index(hi - lo);
      auto left = random_join(rng, units, lo, split);
      auto right = random_join(rng, units, split + 1, hi);
      return TreeNode::join(std::move(left), std::move(right), static_cast<Nuclearity>(rng.index(3)));
    }
  }

  TreeNode random_layered_tree(Rng& rng, const DocLayout& layout)
  {
    std::vector<TreeNode> paragraphs;
    for (const auto& para : layout.paragraphs()) {
      std::vector<TreeNode> sentences;
      for (const auto& sent : layout.sentences())
        if (para.contains(sent)) sentences.push_back(random_binary_tree(rng, sent.first, sent.last));
      paragraphs.push_back(random_join(rng, sentences, 0, sentences.size() - 1));
    }
    return random_join(rng, paragraphs, 0, paragraphs.size() - 1);
  }

  std::vector<Document> generate_synthetic_corpus(std::uint64_t seed, int n_docs, int min_edus, int max_edus)
  {
    if (min_edus < 1 || max_edus < min_edus) throw InputError("synthetic corpus: bad EDU range");
    Rng rng(seed);
    std::vector<Document> docs;
    docs.reserve(n_docs);
    for (int d = 0; d < n_docs; ++d) {
      const int n = rng.uniform_int(min_edus, max_edus);
      std::vector<std::vector<std::string>> edus(n);
      for (auto& tokens : edus) {
        const int len = rng.uniform_int(3, 12);
        for (int t = 0; t < len; ++t) {
          // Skewed draw so that frequent words recur across documents.
          const auto word = static_cast<int>(std::floor(std::pow(rng.uniform(), 2.0) * 500.0));
          tokens.push_back("w" + std::to_string(word));
        }
      }
      std::vector<int> sentence_breaks, paragraph_breaks;
      for (int k = 1; k < n; ++k) {
        if (!rng.bernoulli(0.4)) continue;
        sentence_breaks.push_back(k);
        if (rng.bernoulli(0.25)) paragraph_breaks.push_back(k);
      }
      char id[32];
      std::snprintf(id, sizeof(id), "synth-%05d", d);
      auto layout = DocLayout::from_breaks(n, sentence_breaks, paragraph_breaks);
      auto tree = random_layered_tree(rng, layout);
      docs.push_back(make_document(id, std::move(edus), std::move(layout), std::move(tree)));
    }
    return docs;
  }

  namespace
  {
    void count_violations(const TreeNode& node, const DocLayout& layout, long& internal, long& violating)
    {
      if (node.is_leaf()) return;
      ++internal;
      const auto& s = node.span;
      const bool one_sentence = layout.sentence_of(s.first) == layout.sentence_of(s.last);
      const bool whole_sentences = layout.sentence_span(s.first).first == s.first
                                   && layout.sentence_span(s.last).last == s.last;
      if (!one_sentence && !whole_sentences) ++violating;
      for (const auto& child : node.children) count_violations(child, layout, internal, violating);
    }
  }

  double sentence_boundary_violation_rate(const std::vector<Document>& docs)
  {
    long internal = 0, violating = 0;
    for (const auto& doc : docs)
      if (doc.gold_tree) count_violations(*doc.gold_tree, doc.layout, internal, violating);
    return internal == 0 ? 0.0 : static_cast<double>(violating) / static_cast<double>(internal);
  }
}
