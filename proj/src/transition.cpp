#include "rstparse/transition.hpp"

#include <cmath>
#include <string>

#include "rstparse/errors.hpp"

namespace rstparse
{
  std::string_view to_string(Action a)
  {
    switch (a) {
    case Action::Shift: return "Shift";
    case Action::ReduceNN: return "Reduce_NN";
    case Action::ReduceNS: return "Reduce_NS";
    case Action::ReduceSN: return "Reduce_SN";
    }
    return "?";
  }

  std::optional<Action> parse_action(std::string_view name)
  {
    for (auto a : kAllActions)
      if (to_string(a) == name) return a;
    return std::nullopt;
  }

  bool is_reduce(Action a) { return a != Action::Shift; }

  Nuclearity reduce_label(Action a)
  {
    switch (a) {
    case Action::ReduceNN: return Nuclearity::NN;
    case Action::ReduceNS: return Nuclearity::NS;
    case Action::ReduceSN: return Nuclearity::SN;
    case Action::Shift: break;
    }
    throw std::invalid_argument("Shift has no nuclearity");
  }

  Action reduce_action(Nuclearity nuc)
  {
    switch (nuc) {
    case Nuclearity::NN: return Action::ReduceNN;
    case Nuclearity::NS: return Action::ReduceNS;
    case Nuclearity::SN: return Action::ReduceSN;
    }
    return Action::ReduceNN;
  }

  std::vector<int> ParserState::queue() const
  {
    std::vector<int> q;
    for (int i = next_; i <= n_; ++i) q.push_back(i);
    return q;
  }

  std::optional<Span> ParserState::s1() const
  {
    if (stack_.empty()) return std::nullopt;
    return stack_.back().span;
  }

  std::optional<Span> ParserState::s2() const
  {
    if (stack_.size() < 2) return std::nullopt;
    return stack_[stack_.size() - 2].span;
  }

  std::optional<int> ParserState::q1() const
  {
    if (queue_empty()) return std::nullopt;
    return next_;
  }

  ParserState initial_state(const std::vector<EDU>& edus, std::shared_ptr<const DocLayout> layout)
  {
    if (edus.empty()) throw IntegrityError("initial_state: no EDUs");
    if (!layout || layout->size() != static_cast<int>(edus.size()))
      throw IntegrityError("initial_state: layout does not match the EDU list");
    ParserState state;
    state.n_ = static_cast<int>(edus.size());
    state.next_ = 1;
    state.layout_ = std::move(layout);
    return state;
  }

  ParserState initial_state(const Document& doc)
  {
    return initial_state(doc.edus, std::make_shared<const DocLayout>(doc.layout));
  }

  bool is_terminal(const ParserState& state) { return state.queue_empty() && state.stack_size() == 1; }

  ActionSet legal_actions(const ParserState& state)
  {
    if (is_terminal(state)) throw IllegalActionError("legal_actions: state is terminal");
    ActionSet legal;
    if (!state.queue_empty()) legal.insert(Action::Shift);
    if (state.stack_size() >= 2)
      for (auto a : {Action::ReduceNN, Action::ReduceNS, Action::ReduceSN}) legal.insert(a);
    return legal;
  }

  ParserState apply(ParserState state, Action action)
  {
    if (is_terminal(state) || !legal_actions(state).contains(action))
      throw IllegalActionError(std::string("illegal action ") + std::string(to_string(action)) + " with stack size "
                               + std::to_string(state.stack_size()) + " and queue size "
                               + std::to_string(state.queue_size()));
    if (action == Action::Shift) {
      state.stack_.push_back(TreeNode::leaf(state.next_++));
    } else {
      auto right = std::move(state.stack_.back());
      state.stack_.pop_back();
      auto left = std::move(state.stack_.back());
      state.stack_.pop_back();
      state.stack_.push_back(TreeNode::join(std::move(left), std::move(right), reduce_label(action)));
    }
    return state;
  }

  namespace
  {
    void post_order(const TreeNode& node, std::vector<Action>& out)
    {
      if (node.is_leaf()) {
        out.push_back(Action::Shift);
        return;
      }
      const auto nuc = node.nuclearity();
      if (!nuc) throw IntegrityError("oracle_actions: tree is not binary");
      post_order(node.children[0], out);
      post_order(node.children[1], out);
      out.push_back(reduce_action(*nuc));
    }
  }

  std::vector<Action> oracle_actions(const TreeNode& tree)
  {
    std::vector<Action> actions;
    actions.reserve(2 * static_cast<std::size_t>(tree.span.size()) - 1);
    post_order(tree, actions);
    return actions;
  }

  TreeNode replay(const std::vector<Action>& actions, int n)
  {
    std::vector<EDU> edus(n);
    auto state = initial_state(edus, std::make_shared<const DocLayout>(DocLayout::from_breaks(n, {}, {})));
    for (auto a : actions) state = apply(std::move(state), a);
    if (!is_terminal(state)) throw IllegalActionError("replay: action sequence does not complete the parse");
    return state.stack().front();
  }

  Action select_action(const ActionScores& probabilities, const ActionSet& legal)
  {
    if (legal.empty()) throw IllegalActionError("select_action: no legal action");
    double mass = 0.0;
    for (auto a : kAllActions) {
      const double p = probabilities[action_index(a)];
      if (!std::isfinite(p) || p < 0.0)
        throw std::invalid_argument("policy returned an invalid probability for " + std::string(to_string(a)));
      if (legal.contains(a)) mass += p;
    }
    std::optional<Action> best;
    double best_p = -1.0;
    for (auto a : kAllActions) {
      if (!legal.contains(a)) continue;
      const double p = mass > 0.0 ? probabilities[action_index(a)] / mass : 1.0;
      if (p > best_p) {
        best = a;
        best_p = p;
      }
    }
    return *best;
  }

  TreeNode greedy_parse(const std::vector<EDU>& edus, std::shared_ptr<const DocLayout> layout, const Policy& policy)
  {
    auto state = initial_state(edus, std::move(layout));
    while (!is_terminal(state)) {
      const auto action = select_action(policy(state), legal_actions(state));
      state = apply(std::move(state), action);
    }
    return state.stack().front();
  }

  TreeNode greedy_parse(const Document& doc, const Policy& policy)
  {
    return greedy_parse(doc.edus, std::make_shared<const DocLayout>(doc.layout), policy);
  }
}
