#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rstparse/errors.hpp"
#include "rstparse/transition.hpp"
#include "support.hpp"

using namespace rstparse;
using namespace testing_support;

namespace
{
  ActionSet set_of(std::initializer_list<Action> actions)
  {
    ActionSet s;
    for (auto a : actions) s.insert(a);
    return s;
  }

  // Stack subtrees followed by queue leaves cover 1..n once, in order.
  bool covers_in_order(const ParserState& s)
  {
    int next = 1;
    for (const auto& t : s.stack()) {
      if (t.span.first != next) return false;
      next = t.span.last + 1;
    }
    return next == s.next_edu() && s.next_edu() + s.queue_size() - 1 == s.doc_size();
  }

  const ActionScores kUniform{0.25, 0.25, 0.25, 0.25};
}

TEST_CASE("initial state")
{
  const auto doc = doc_with_tree("d", J(J(L(1), L(2), Nuclearity::NS), L(3), Nuclearity::NN), {1}, {});
  const auto s = initial_state(doc);
  CHECK(s.stack().empty());
  CHECK(s.queue() == std::vector<int>{1, 2, 3});
  CHECK(s.layout() == doc.layout);
  CHECK_FALSE(s.s1().has_value());
  CHECK_FALSE(s.s2().has_value());
  CHECK(s.q1() == 1);
  CHECK_FALSE(is_terminal(s));
  CHECK_THROWS(initial_state({}, std::make_shared<const DocLayout>()));
}

TEST_CASE("legal actions")
{
  const auto doc = doc_with_tree("d", J(J(L(1), L(2), Nuclearity::NS), L(3), Nuclearity::NN));
  auto s = initial_state(doc);
  CHECK(legal_actions(s) == set_of({Action::Shift}));
  s = apply(s, Action::Shift);
  CHECK(legal_actions(s) == set_of({Action::Shift}));
  s = apply(s, Action::Shift);
  CHECK(legal_actions(s) == set_of({Action::Shift, Action::ReduceNN, Action::ReduceNS, Action::ReduceSN}));
  CHECK_THROWS_AS(apply(initial_state(doc), Action::ReduceNN), IllegalActionError);
  s = apply(s, Action::Shift);
  CHECK(legal_actions(s) == set_of({Action::ReduceNN, Action::ReduceNS, Action::ReduceSN}));
  CHECK_THROWS_AS(apply(s, Action::Shift), IllegalActionError);
  s = apply(apply(s, Action::ReduceNN), Action::ReduceNN);
  CHECK(is_terminal(s));
  CHECK_THROWS_AS(legal_actions(s), IllegalActionError);
}

TEST_CASE("apply shift and reduce")
{
  const auto doc = doc_with_tree("d", J(J(L(1), L(2), Nuclearity::NS), L(3), Nuclearity::NN));
  auto s = apply(initial_state(doc), Action::Shift);
  s = apply(s, Action::Shift);
  CHECK(s.stack_size() == 2);
  CHECK(s.queue() == std::vector<int>{3});
  CHECK(s.s2() == Span{1, 1});
  CHECK(s.s1() == Span{2, 2});
  const auto r = apply(s, Action::ReduceNS);
  REQUIRE(r.stack_size() == 1);
  CHECK(r.stack()[0] == J(L(1), L(2), Nuclearity::NS));
  // The input state is a value and stays untouched.
  CHECK(s.stack_size() == 2);
}

TEST_CASE("single EDU document")
{
  const auto doc = doc_with_tree("d", L(1));
  CHECK(oracle_actions(L(1)) == std::vector<Action>{Action::Shift});
  const auto s = apply(initial_state(doc), Action::Shift);
  CHECK(is_terminal(s));
  CHECK(greedy_parse(doc, [](const ParserState&) { return kUniform; }) == L(1));
}

TEST_CASE("oracle example")
{
  const auto t = J(J(L(1), L(2), Nuclearity::NS), L(3), Nuclearity::NN);
  CHECK(oracle_actions(t)
        == std::vector<Action>{Action::Shift, Action::Shift, Action::ReduceNS, Action::Shift, Action::ReduceNN});
  CHECK(replay(oracle_actions(t), 3) == t);
  CHECK_THROWS(oracle_actions(TreeNode::nary({L(1), L(2), L(3)}, {Role::Nucleus, Role::Nucleus, Role::Nucleus})));
  CHECK_THROWS_AS(replay({Action::Shift, Action::Shift}, 2), IllegalActionError);
}

TEST_CASE("oracle round trip and action counts")
{
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.uniform_int(1, 50);
    const auto t = random_binary_tree(rng, 1, n);
    const auto actions = oracle_actions(t);
    CHECK(actions.size() == static_cast<std::size_t>(2 * n - 1));
    CHECK(std::count(actions.begin(), actions.end(), Action::Shift) == n);
    CHECK(replay(actions, n) == t);
  }
}

TEST_CASE("coverage invariant under random legal sequences")
{
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = rng.uniform_int(1, 30);
    auto doc = doc_with_tree("d", random_binary_tree(rng, 1, n));
    auto s = initial_state(doc);
    int steps = 0;
    while (!is_terminal(s)) {
      CHECK(covers_in_order(s));
      std::vector<Action> options;
      const auto legal = legal_actions(s);
      for (auto a : kAllActions)
        if (legal.contains(a)) options.push_back(a);
      s = apply(s, options[rng.index(options.size())]);
      ++steps;
    }
    CHECK(covers_in_order(s));
    CHECK(steps == 2 * n - 1);
    CHECK(s.stack()[0].span == Span{1, n});
  }
}

TEST_CASE("greedy parse with a uniform policy")
{
  // Step 3 offers {Shift, three Reduces} with equal probability; Shift comes first in
  // the tie order. Then only reduces are legal and ReduceNN wins twice.
  const auto doc = doc_with_tree("d", J(J(L(1), L(2), Nuclearity::NS), L(3), Nuclearity::NN));
  const auto tree = greedy_parse(doc, [](const ParserState&) { return kUniform; });
  CHECK(tree == J(L(1), J(L(2), L(3), Nuclearity::NN), Nuclearity::NN));
}

TEST_CASE("greedy parse with an oracle policy reproduces gold")
{
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(1, 30);
    const auto gold = random_binary_tree(rng, 1, n);
    const auto doc = doc_with_tree("d", gold);
    const auto actions = oracle_actions(gold);
    std::size_t step = 0;
    const auto tree = greedy_parse(doc, [&](const ParserState&) {
      ActionScores p{0.01, 0.01, 0.01, 0.01};
      p[action_index(actions[step++])] = 0.97;
      return p;
    });
    CHECK(tree == gold);
    CHECK(step == actions.size());
  }
}

TEST_CASE("legality masking and invalid distributions")
{
  // Shift is the favourite but illegal once the queue is empty.
  const auto doc = doc_with_tree("d", J(L(1), L(2), Nuclearity::NN));
  const auto tree = greedy_parse(doc, [](const ParserState&) { return ActionScores{0.9, 0.02, 0.05, 0.03}; });
  CHECK(tree == J(L(1), L(2), Nuclearity::NS));

  CHECK(select_action({0.1, 0.2, 0.3, 0.4}, set_of({Action::Shift})) == Action::Shift);
  CHECK(select_action({0.0, 0.0, 0.0, 0.0}, set_of({Action::ReduceNS, Action::ReduceSN})) == Action::ReduceNS);
  CHECK_THROWS(select_action({-0.1, 0.5, 0.3, 0.3}, set_of({Action::Shift})));
  CHECK_THROWS(select_action({std::nan(""), 0.5, 0.3, 0.3}, set_of({Action::Shift})));
  CHECK_THROWS(greedy_parse(doc, [](const ParserState&) { return ActionScores{INFINITY, 0, 0, 0}; }));
}

TEST_CASE("action names")
{
  for (auto a : kAllActions) CHECK(parse_action(to_string(a)) == a);
  CHECK(to_string(Action::ReduceSN) == "Reduce_SN");
  CHECK(reduce_label(Action::ReduceNS) == Nuclearity::NS);
  CHECK(reduce_action(Nuclearity::SN) == Action::ReduceSN);
  CHECK_FALSE(is_reduce(Action::Shift));
}
