#ifndef RSTPARSE_TRANSITION_HPP
#define RSTPARSE_TRANSITION_HPP

// Shift-reduce transition system over EDUs.
//
// The configuration is a stack of partial trees and a queue of unread EDUs.
//  - Shift moves the front EDU of the queue onto the stack.
//  - Reduce_X pops S1 (top) and S2 (below it) and pushes the node
//    (S2, S1) with nuclearity X.
// A parse is complete when the queue is empty and the stack holds one tree,
// which takes exactly n shifts and n - 1 reduces.

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "rstparse/tree.hpp"

namespace rstparse
{
  // Order is significant: classifier outputs, loss weights and greedy
  // tie-breaking all follow it.
  enum class Action { Shift = 0, ReduceNN = 1, ReduceNS = 2, ReduceSN = 3 };

  inline constexpr std::size_t kNumActions = 4;
  inline constexpr std::array<Action, kNumActions> kAllActions = {Action::Shift, Action::ReduceNN, Action::ReduceNS,
                                                                 Action::ReduceSN};

  inline std::size_t action_index(Action a) { return static_cast<std::size_t>(a); }
  std::string_view to_string(Action a);
  std::optional<Action> parse_action(std::string_view name);
  bool is_reduce(Action a);
  Nuclearity reduce_label(Action a);
  Action reduce_action(Nuclearity nuc);

  class ActionSet
  {
  public:
    void insert(Action a) { bits_ |= 1u << action_index(a); }
    bool contains(Action a) const { return bits_ & (1u << action_index(a)); }
    bool empty() const { return bits_ == 0; }
    std::size_t size() const { return static_cast<std::size_t>(__builtin_popcount(bits_)); }
    bool operator==(const ActionSet&) const = default;

  private:
    unsigned bits_ = 0;
  };

  using ActionScores = std::array<double, kNumActions>;

  class ParserState
  {
  public:
    const std::vector<TreeNode>& stack() const { return stack_; }
    std::size_t stack_size() const { return stack_.size(); }

    // Unread EDUs are next_edu() .. doc_size().
    int next_edu() const { return next_; }
    int queue_size() const { return n_ - next_ + 1; }
    bool queue_empty() const { return next_ > n_; }
    std::vector<int> queue() const;

    int doc_size() const { return n_; }
    const DocLayout& layout() const { return *layout_; }
    const std::shared_ptr<const DocLayout>& layout_ptr() const { return layout_; }

    // The three constituents the classifier looks at; empty when absent.
    std::optional<Span> s1() const;
    std::optional<Span> s2() const;
    std::optional<int> q1() const;

  private:
    friend ParserState initial_state(const std::vector<EDU>& edus, std::shared_ptr<const DocLayout> layout);
    friend ParserState apply(ParserState state, Action action);

    std::vector<TreeNode> stack_;
    int next_ = 1;
    int n_ = 0;
    std::shared_ptr<const DocLayout> layout_;
  };

  ParserState initial_state(const std::vector<EDU>& edus, std::shared_ptr<const DocLayout> layout);
  ParserState initial_state(const Document& doc);

  // Throws IllegalActionError on a terminal state.
  ActionSet legal_actions(const ParserState& state);

  // Throws IllegalActionError if `action` is not legal in `state`.
  ParserState apply(ParserState state, Action action);

  bool is_terminal(const ParserState& state);

  // Shift per leaf and Reduce_X per internal node in left-to-right post-order.
  std::vector<Action> oracle_actions(const TreeNode& tree);

  // Applies `actions` to a fresh n-EDU configuration and returns the
  // resulting tree. Throws IllegalActionError if the sequence does not end
  // in a terminal state.
  TreeNode replay(const std::vector<Action>& actions, int n);

  // Maps a configuration to a distribution over all four actions.
  using Policy = std::function<ActionScores(const ParserState&)>;

  // Among the legal actions picks the most probable one after masking and
  // renormalizing. Ties go to the earliest action in Action order.
  Action select_action(const ActionScores& probabilities, const ActionSet& legal);

  TreeNode greedy_parse(const std::vector<EDU>& edus, std::shared_ptr<const DocLayout> layout, const Policy& policy);
  TreeNode greedy_parse(const Document& doc, const Policy& policy);
}

#endif
