#ifndef RSTPARSE_TREE_HPP
#define RSTPARSE_TREE_HPP

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rstparse
{
  // Inclusive 1-based EDU index range.
  struct Span
  {
    int first = 1;
    int last = 1;

    int size() const { return last - first + 1; }
    bool contains(const Span& other) const { return first <= other.first && other.last <= last; }

    auto operator<=>(const Span&) const = default;
  };

  enum class Role { Nucleus, Satellite };

  enum class Nuclearity { NN, NS, SN };

  std::string_view to_string(Nuclearity nuc);
  std::optional<Nuclearity> parse_nuclearity(std::string_view text);

  Nuclearity nuclearity_from_roles(Role left, Role right);
  Role left_role(Nuclearity nuc);
  Role right_role(Nuclearity nuc);

  // Discourse constituent. Leaves have no children; internal nodes carry one
  // role per child, which for binary nodes is equivalent to a nuclearity label.
  struct TreeNode
  {
    Span span;
    std::vector<Role> roles;
    std::vector<TreeNode> children;

    static TreeNode leaf(int index);
    static TreeNode join(TreeNode left, TreeNode right, Nuclearity nuc);
    static TreeNode nary(std::vector<TreeNode> children, std::vector<Role> roles);

    bool is_leaf() const { return children.empty(); }
    bool is_binary() const;

    // Label of a binary internal node; empty for leaves and n-ary nodes.
    std::optional<Nuclearity> nuclearity() const;

    bool operator==(const TreeNode&) const = default;
  };

  // Throws IntegrityError unless the tree is well formed and covers (1, n).
  void validate_tree(const TreeNode& tree, int n);

  int count_internal(const TreeNode& tree);

  // Compact bracket view, e.g. ((1 2)NS 3)NN
  std::string to_brackets(const TreeNode& tree);

  struct EDU
  {
    int index = 1;
    std::vector<std::string> tokens;
    int sentence_id = 0;
    int paragraph_id = 0;
  };

  // Sentence and paragraph partition of a document's EDUs. A paragraph break
  // is always also a sentence break.
  class DocLayout
  {
  public:
    DocLayout() = default;

    // Breaks are EDU indices k (1 <= k < n) with a boundary between k and k + 1.
    static DocLayout from_breaks(int n, const std::vector<int>& sentence_breaks,
                                 const std::vector<int>& paragraph_breaks);

    int size() const { return n_; }
    Span document() const { return {1, n_}; }

    const std::vector<Span>& sentences() const { return sentences_; }
    const std::vector<Span>& paragraphs() const { return paragraphs_; }

    int sentence_of(int edu) const { return sentence_of_[edu - 1]; }
    int paragraph_of(int edu) const { return paragraph_of_[edu - 1]; }

    const Span& sentence_span(int edu) const { return sentences_[sentence_of(edu)]; }
    const Span& paragraph_span(int edu) const { return paragraphs_[paragraph_of(edu)]; }

    std::vector<int> sentence_breaks() const;
    std::vector<int> paragraph_breaks() const;

    bool operator==(const DocLayout&) const = default;

  private:
    int n_ = 0;
    std::vector<Span> sentences_;
    std::vector<Span> paragraphs_;
    std::vector<int> sentence_of_;
    std::vector<int> paragraph_of_;
  };

  struct Document
  {
    std::string doc_id;
    std::vector<EDU> edus;
    std::optional<TreeNode> gold_tree;
    DocLayout layout;

    int size() const { return static_cast<int>(edus.size()); }
  };

  // Builds EDUs with indices and layout ids filled in; validates the tree if given.
  Document make_document(std::string doc_id, std::vector<std::vector<std::string>> edu_tokens,
                         DocLayout layout, std::optional<TreeNode> tree = std::nullopt);
}

#endif
