#ifndef RSTPARSE_TESTS_SUPPORT_HPP
#define RSTPARSE_TESTS_SUPPORT_HPP

#include <filesystem>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "rstparse/random.hpp"
#include "rstparse/tree.hpp"
#include "rstparse/treebank.hpp"

namespace testing_support
{
  using namespace rstparse;

  inline std::filesystem::path fixtures() { return RSTPARSE_FIXTURES_DIR; }

  inline TreeNode L(int i) { return TreeNode::leaf(i); }
  inline TreeNode J(TreeNode l, TreeNode r, Nuclearity nuc) { return TreeNode::join(std::move(l), std::move(r), nuc); }

  // Random n-ary tree with arity 2..max_arity and random N/S roles (at least one nucleus per node).
  inline TreeNode random_nary_tree(Rng& rng, int first, int last, int max_arity = 4)
  {
    if (first == last) return TreeNode::leaf(first);
    const int size = last - first + 1;
    const int arity = std::min(size, rng.uniform_int(2, max_arity));
    // Choose arity - 1 distinct cut points.
    std::vector<int> cuts;
    std::vector<int> candidates;
    for (int k = first; k < last; ++k) candidates.push_back(k);
    rng.shuffle(candidates);
    cuts.assign(candidates.begin(), candidates.begin() + (arity - 1));
    std::sort(cuts.begin(), cuts.end());
    std::vector<TreeNode> children;
    std::vector<Role> roles;
    int start = first;
    for (int c : cuts) {
      children.push_back(random_nary_tree(rng, start, c, max_arity));
      start = c + 1;
    }
    children.push_back(random_nary_tree(rng, start, last, max_arity));
    bool any_nucleus = false;
    for (std::size_t k = 0; k < children.size(); ++k) {
      roles.push_back(rng.bernoulli(0.5) ? Role::Nucleus : Role::Satellite);
      any_nucleus |= roles.back() == Role::Nucleus;
    }
    if (!any_nucleus) roles[rng.index(roles.size())] = Role::Nucleus;
    return TreeNode::nary(std::move(children), std::move(roles));
  }

  // Every node span of a tree, leaves included.
  inline void all_spans(const TreeNode& t, std::set<std::pair<int, int>>& out)
  {
    out.insert({t.span.first, t.span.last});
    for (const auto& c : t.children) all_spans(c, out);
  }

  // Independent span-set extraction for metric oracles, written against the
  // definitions rather than the library's traversal.
  using Labeled = std::set<std::tuple<int, int, std::string>>;

  inline std::string nuc_name(const TreeNode& t)
  {
    const bool l = t.roles[0] == Role::Nucleus, r = t.roles[1] == Role::Nucleus;
    return l && r ? "NN" : (l ? "NS" : "SN");
  }

  inline void brute_original(const TreeNode& t, bool is_root, bool include_root, Labeled& out)
  {
    if (t.children.empty()) return;
    if (!is_root || include_root) out.insert({t.span.first, t.span.last, nuc_name(t)});
    for (const auto& c : t.children) brute_original(c, false, include_root, out);
  }

  inline void brute_rst(const TreeNode& t, Labeled& out)
  {
    for (std::size_t k = 0; k < t.children.size(); ++k) {
      out.insert({t.children[k].span.first, t.children[k].span.last, t.roles[k] == Role::Nucleus ? "N" : "S"});
      brute_rst(t.children[k], out);
    }
  }

  struct Counts
  {
    long matched = 0, gold = 0, pred = 0;
  };

  inline Counts brute_counts(const Labeled& gold, const Labeled& pred, bool labeled)
  {
    Counts c{0, static_cast<long>(gold.size()), static_cast<long>(pred.size())};
    for (const auto& [i, j, lab] : gold) {
      for (const auto& [pi, pj, plab] : pred)
        if (pi == i && pj == j && (!labeled || plab == lab)) ++c.matched;
    }
    return c;
  }

  inline double brute_f1(const Counts& c)
  {
    if (c.gold == 0 && c.pred == 0) return 100.0;
    const double p = c.pred ? 100.0 * c.matched / c.pred : 0.0;
    const double r = c.gold ? 100.0 * c.matched / c.gold : 0.0;
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }

  inline Document doc_with_tree(const std::string& id, TreeNode tree, std::vector<int> sentence_breaks = {},
                                std::vector<int> paragraph_breaks = {})
  {
    const int n = tree.span.last;
    std::vector<std::vector<std::string>> tokens;
    for (int k = 1; k <= n; ++k) tokens.push_back({"word" + std::to_string(k), "x"});
    return make_document(id, std::move(tokens), DocLayout::from_breaks(n, sentence_breaks, paragraph_breaks),
                         std::move(tree));
  }
}

#endif
