#include "rstparse/tree.hpp"

#include <algorithm>
#include <set>

#include "rstparse/errors.hpp"

namespace rstparse
{
  std::string_view to_string(Nuclearity nuc)
  {
    switch (nuc) {
    case Nuclearity::NN: return "NN";
    case Nuclearity::NS: return "NS";
    case Nuclearity::SN: return "SN";
    }
    return "??";
  }

  std::optional<Nuclearity> parse_nuclearity(std::string_view text)
  {
    if (text == "NN") return Nuclearity::NN;
    if (text == "NS") return Nuclearity::NS;
    if (text == "SN") return Nuclearity::SN;
    return std::nullopt;
  }

  Nuclearity nuclearity_from_roles(Role left, Role right)
  {
    if (left == Role::Nucleus && right == Role::Satellite) return Nuclearity::NS;
    if (left == Role::Satellite && right == Role::Nucleus) return Nuclearity::SN;
    // Satellite/Satellite has no label of its own; treat it as multi-nuclear.
    return Nuclearity::NN;
  }

  Role left_role(Nuclearity nuc) { return nuc == Nuclearity::SN ? Role::Satellite : Role::Nucleus; }
  Role right_role(Nuclearity nuc) { return nuc == Nuclearity::NS ? Role::Satellite : Role::Nucleus; }

  TreeNode TreeNode::leaf(int index)
  {
    TreeNode node;
    node.span = {index, index};
    return node;
  }

  TreeNode TreeNode::join(TreeNode left, TreeNode right, Nuclearity nuc)
  {
    if (left.span.last + 1 != right.span.first)
      throw IntegrityError("cannot join non-adjacent spans (" + std::to_string(left.span.first) + ","
                           + std::to_string(left.span.last) + ") and (" + std::to_string(right.span.first)
                           + "," + std::to_string(right.span.last) + ")");
    TreeNode node;
    node.span = {left.span.first, right.span.last};
    node.roles = {left_role(nuc), right_role(nuc)};
    node.children.reserve(2);
    node.children.push_back(std::move(left));
    node.children.push_back(std::move(right));
    return node;
  }

  TreeNode TreeNode::nary(std::vector<TreeNode> children, std::vector<Role> roles)
  {
    if (children.size() < 2 || children.size() != roles.size())
      throw IntegrityError("internal node needs >= 2 children with one role each");
    for (std::size_t k = 1; k < children.size(); ++k)
      if (children[k - 1].span.last + 1 != children[k].span.first)
        throw IntegrityError("children spans are not contiguous");
    TreeNode node;
    node.span = {children.front().span.first, children.back().span.last};
    node.roles = std::move(roles);
    node.children = std::move(children);
    return node;
  }

  bool TreeNode::is_binary() const
  {
    if (is_leaf()) return true;
    if (children.size() != 2) return false;
    return children[0].is_binary() && children[1].is_binary();
  }

  std::optional<Nuclearity> TreeNode::nuclearity() const
  {
    if (children.size() != 2) return std::nullopt;
    return nuclearity_from_roles(roles[0], roles[1]);
  }

  namespace
  {
    void validate_node(const TreeNode& node)
    {
      const auto& s = node.span;
      if (s.first > s.last)
        throw IntegrityError("empty span (" + std::to_string(s.first) + "," + std::to_string(s.last) + ")");
      if (node.is_leaf()) {
        if (s.first != s.last)
          throw IntegrityError("leaf with multi-EDU span (" + std::to_string(s.first) + ","
                               + std::to_string(s.last) + ")");
        if (!node.roles.empty()) throw IntegrityError("leaf carries nuclearity");
        return;
      }
      if (node.children.size() < 2)
        throw IntegrityError("internal node (" + std::to_string(s.first) + "," + std::to_string(s.last)
                             + ") has fewer than two children");
      if (node.roles.size() != node.children.size())
        throw IntegrityError("internal node (" + std::to_string(s.first) + "," + std::to_string(s.last)
                             + ") lacks nuclearity");
      int expect = s.first;
      for (const auto& child : node.children) {
        if (child.span.first != expect)
          throw IntegrityError("child spans of (" + std::to_string(s.first) + "," + std::to_string(s.last)
                               + ") are not contiguous");
        expect = child.span.last + 1;
        validate_node(child);
      }
      if (expect != s.last + 1)
        throw IntegrityError("child spans of (" + std::to_string(s.first) + "," + std::to_string(s.last)
                             + ") do not cover the node");
    }

    void brackets(const TreeNode& node, std::string& out)
    {
      if (node.is_leaf()) {
        out += std::to_string(node.span.first);
        return;
      }
      out += '(';
      for (std::size_t k = 0; k < node.children.size(); ++k) {
        if (k) out += ' ';
        brackets(node.children[k], out);
      }
      out += ')';
      if (auto nuc = node.nuclearity())
        out += to_string(*nuc);
      else
        for (auto r : node.roles) out += r == Role::Nucleus ? 'N' : 'S';
    }
  }

  void validate_tree(const TreeNode& tree, int n)
  {
    if (tree.span != Span{1, n})
      throw IntegrityError("tree root spans (" + std::to_string(tree.span.first) + ","
                           + std::to_string(tree.span.last) + "), expected (1," + std::to_string(n) + ")");
    validate_node(tree);
  }

  int count_internal(const TreeNode& tree)
  {
    int count = tree.is_leaf() ? 0 : 1;
    for (const auto& child : tree.children) count += count_internal(child);
    return count;
  }

  std::string to_brackets(const TreeNode& tree)
  {
    std::string out;
    brackets(tree, out);
    return out;
  }

  DocLayout DocLayout::from_breaks(int n, const std::vector<int>& sentence_breaks,
                                   const std::vector<int>& paragraph_breaks)
  {
    if (n < 1) throw IntegrityError("document has no EDUs");
    std::set<int> para(paragraph_breaks.begin(), paragraph_breaks.end());
    std::set<int> sent(sentence_breaks.begin(), sentence_breaks.end());
    sent.insert(para.begin(), para.end());
    for (int k : sent)
      if (k < 1 || k >= n)
        throw IntegrityError("break after EDU " + std::to_string(k) + " outside 1.." + std::to_string(n - 1));

    DocLayout layout;
    layout.n_ = n;
    auto partition = [n](const std::set<int>& breaks, std::vector<Span>& spans, std::vector<int>& owner) {
      int start = 1;
      for (int k : breaks) {
        spans.push_back({start, k});
        start = k + 1;
      }
      spans.push_back({start, n});
      owner.resize(n);
      for (std::size_t id = 0; id < spans.size(); ++id)
        for (int e = spans[id].first; e <= spans[id].last; ++e) owner[e - 1] = static_cast<int>(id);
    };
    partition(sent, layout.sentences_, layout.sentence_of_);
    partition(para, layout.paragraphs_, layout.paragraph_of_);
    return layout;
  }

  std::vector<int> DocLayout::sentence_breaks() const
  {
    std::vector<int> breaks;
    for (std::size_t k = 0; k + 1 < sentences_.size(); ++k) breaks.push_back(sentences_[k].last);
    return breaks;
  }

  std::vector<int> DocLayout::paragraph_breaks() const
  {
    std::vector<int> breaks;
    for (std::size_t k = 0; k + 1 < paragraphs_.size(); ++k) breaks.push_back(paragraphs_[k].last);
    return breaks;
  }

  Document make_document(std::string doc_id, std::vector<std::vector<std::string>> edu_tokens,
                         DocLayout layout, std::optional<TreeNode> tree)
  {
    const int n = static_cast<int>(edu_tokens.size());
    if (n < 1) throw IntegrityError("document '" + doc_id + "' has no EDUs");
    if (layout.size() != n)
      throw IntegrityError("document '" + doc_id + "': layout covers " + std::to_string(layout.size())
                           + " EDUs but text has " + std::to_string(n));
    if (tree) {
      try {
        validate_tree(*tree, n);
      } catch (const IntegrityError& e) {
        throw IntegrityError("document '" + doc_id + "': " + e.what());
      }
    }
    Document doc;
    doc.doc_id = std::move(doc_id);
    doc.edus.resize(n);
    for (int i = 1; i <= n; ++i) {
      auto& edu = doc.edus[i - 1];
      edu.index = i;
      edu.tokens = std::move(edu_tokens[i - 1]);
      edu.sentence_id = layout.sentence_of(i);
      edu.paragraph_id = layout.paragraph_of(i);
    }
    doc.layout = std::move(layout);
    doc.gold_tree = std::move(tree);
    return doc;
  }
}
