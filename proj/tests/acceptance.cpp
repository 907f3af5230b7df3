// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
// nonzero if any gating criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>

#include "rstparse/classifier.hpp"
#include "rstparse/encoding.hpp"
#include "rstparse/evaluation.hpp"
#include "rstparse/training.hpp"
#include "support.hpp"

using namespace rstparse;
using namespace testing_support;

namespace
{
  struct Outcome
  {
    bool pass;
    std::string detail;
  };

  std::string fmt(const char* f, auto... args)
  {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
  }

  // 1. Oracle/replay round trip, exact.
  Outcome transition_round_trip()
  {
    Rng rng(1001);
    int bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = rng.uniform_int(2, 50);
      const auto t = random_binary_tree(rng, 1, n);
      const auto actions = oracle_actions(t);
      const auto shifts = std::count(actions.begin(), actions.end(), Action::Shift);
      if (replay(actions, n) != t || actions.size() != static_cast<std::size_t>(2 * n - 1) || shifts != n) ++bad;
    }
    return {bad == 0, fmt("1000 trees (2-50 EDUs), %d mismatches", bad)};
  }

  // 2. 512-token layout and head/tail truncation, exact.
  Outcome input_layout()
  {
    Rng rng(1002);
    const HashTokenizer tok;
    const auto sp = tok.specials();
    int bad = 0, empty_stack = 0, empty_queue = 0;
    for (int trial = 0; trial < 500; ++trial) {
      const int n = rng.uniform_int(1, 12);
      std::vector<std::vector<TokenId>> edus(n);
      for (auto& e : edus) {
        const int len = rng.uniform_int(1, 150);
        for (int k = 0; k < len; ++k) e.push_back(100 + rng.uniform_int(0, 5000));
      }
      const auto doc = doc_with_tree("d", random_binary_tree(rng, 1, n));
      auto state = initial_state(doc);
      const int steps = rng.uniform_int(0, 2 * n - 1);
      for (int s = 0; s < steps; ++s) {
        std::vector<Action> options;
        const auto legal = legal_actions(state);
        for (auto a : kAllActions)
          if (legal.contains(a)) options.push_back(a);
        state = apply(state, options[rng.index(options.size())]);
      }
      empty_stack += state.stack().empty();
      empty_queue += state.queue_empty();
      const auto in = assemble_input(state, edus, sp);
      bool ok = in.tokens.size() == 512 && in.tokens[0] == sp.cls && in.tokens[241] == sp.sep &&
                in.tokens[482] == sp.sep && in.tokens[511] == sp.sep;
      if (state.stack().empty())
        for (int p = 1; p < 482; ++p) ok &= p == 241 || in.tokens[p] == sp.mask;
      if (state.queue_empty())
        for (int p = 483; p < 511; ++p) ok &= in.tokens[p] == sp.mask;
      bad += !ok;
    }
    std::vector<TokenId> t300(300);
    for (int k = 0; k < 300; ++k) t300[k] = k;
    const auto cut = fit_to_budget(t300, 240, 120, 120, -1);
    bool trunc = cut.size() == 240;
    for (int k = 0; trunc && k < 120; ++k) trunc = cut[k] == k && cut[120 + k] == 180 + k;
    return {bad == 0 && trunc && empty_stack > 0 && empty_queue > 0,
            fmt("500 states (%d empty-stack, %d empty-queue), %d layout errors; 300-token truncation %s", empty_stack,
                empty_queue, bad, trunc ? "keeps [0..119]+[180..299]" : "WRONG")};
  }

  // 3. Metrics against a brute-force span-set oracle, tolerance 1e-9.
  Outcome metric_oracle()
  {
    constexpr double tol = 1e-9;
    Rng rng(1003);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const int n = rng.uniform_int(1, 30);
      const auto g = random_binary_tree(rng, 1, n), p = random_binary_tree(rng, 1, n);
      Labeled go, po, gr, pr;
      brute_original(g, true, false, go);
      brute_original(p, true, false, po);
      brute_rst(g, gr);
      brute_rst(p, pr);
      auto strip = [](const Labeled& s) {
        Labeled out;
        for (const auto& [i, j, l] : s) out.insert({i, j, ""});
        return out;
      };
      const double expected[4] = {brute_f1(brute_counts(strip(go), strip(po), false)),
                                  brute_f1(brute_counts(go, po, true)),
                                  brute_f1(brute_counts(strip(gr), strip(pr), false)),
                                  brute_f1(brute_counts(gr, pr, true))};
      const double got[4] = {micro_f1({g}, {p}, Metric::Original, Facet::Structure).f1,
                             micro_f1({g}, {p}, Metric::Original, Facet::Nuclearity).f1,
                             micro_f1({g}, {p}, Metric::RstParseval, Facet::Structure).f1,
                             micro_f1({g}, {p}, Metric::RstParseval, Facet::Nuclearity).f1};
      for (int k = 0; k < 4; ++k) worst = std::max(worst, std::abs(expected[k] - got[k]));
      for (auto m : {Metric::Original, Metric::RstParseval})
        for (auto f : {Facet::Structure, Facet::Nuclearity})
          worst = std::max(worst, std::abs(micro_f1({g}, {g}, m, f).f1 - 100.0));
    }
    const auto gold = J(J(L(1), L(2), Nuclearity::NS), L(3), Nuclearity::NN);
    const auto pred = J(L(1), J(L(2), L(3), Nuclearity::NS), Nuclearity::NS);
    const double rs = micro_f1({gold}, {pred}, Metric::RstParseval, Facet::Structure).f1;
    const double rn = micro_f1({gold}, {pred}, Metric::RstParseval, Facet::Nuclearity).f1;
    const double os = micro_f1({gold}, {pred}, Metric::Original, Facet::Structure).f1;
    const bool worked = std::abs(rs - 75.0) <= tol && std::abs(rn - 25.0) <= tol && std::abs(os) <= tol;
    return {worst <= tol && worked,
            fmt("200 pairs x 4 metric/facet, max |diff| %.3g (tol 1e-9); worked example %.1f/%.1f/%.1f", worst, rs, rn,
                os)};
  }

  // 4. Weighted loss on uniform logits, tolerance 1e-9.
  Outcome loss_arithmetic()
  {
    const LossWeights w;
    const ActionScores zero{0, 0, 0, 0};
    double worst = std::abs(weighted_loss(zero, Action::Shift, w) - 3.0 / 6.0 * std::log(4.0));
    for (auto a : {Action::ReduceNN, Action::ReduceNS, Action::ReduceSN})
      worst = std::max(worst, std::abs(weighted_loss(zero, a, w) - 1.0 / 6.0 * std::log(4.0)));
    const bool sum_exact = w[Action::ReduceNN] + w[Action::ReduceNS] + w[Action::ReduceSN] == w[Action::Shift];
    return {worst <= 1e-9 && sum_exact,
            fmt("max |diff| %.3g (tol 1e-9); reduce weights sum to shift weight: %s", worst, sum_exact ? "yes" : "no")};
  }

  // 5. Analytic vs central-difference gradients, relative error <= 1e-4.
  Outcome gradient_check()
  {
    constexpr double eps = 1e-5, tol = 1e-4, floor = 1e-5;
    Rng rng(1005);
    double worst = 0.0;
    long checked = 0;
    const LossWeights weights;
    for (int inst = 0; inst < 20; ++inst) {
      ModelConfig cfg;
      cfg.hash_dim = 8;
      cfg.hidden_dim = 6;
      auto model = ParserModel::create(cfg, 2000 + inst);
      for (auto* t : model.parameters().tensors())
        for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] += rng.normal(0.0, 0.3);
      const auto doc = generate_synthetic_corpus(3000 + inst, 1, 3, 10)[0];
      const auto instances = build_instances(doc);
      const auto& pick = instances[rng.index(instances.size())];
      const auto prepared = model.prepare(doc);
      const auto state = model.encode_state(pick.s2, pick.s1, pick.q1, prepared);
      const Action gold = kAllActions[rng.index(kNumActions)];

      auto grad = model.parameters().zeros_like();
      model.loss_and_gradient(state, gold, weights, grad);
      auto scratch = model.parameters().zeros_like();
      auto loss = [&] { return model.loss_and_gradient(state, gold, weights, scratch); };
      auto check = [&](Eigen::MatrixXd& p, const Eigen::MatrixXd& g, Eigen::Index r, Eigen::Index c) {
        const double saved = p(r, c);
        p(r, c) = saved + eps;
        const double up = loss();
        p(r, c) = saved - eps;
        const double down = loss();
        p(r, c) = saved;
        const double numeric = (up - down) / (2 * eps);
        worst = std::max(worst, std::abs(g(r, c) - numeric) / std::max({std::abs(g(r, c)), std::abs(numeric), floor}));
        ++checked;
      };
      auto& s = model.parameters().scorer;
      auto& gs = grad.scorer;
      for (auto [p, g] : {std::pair{&s.w1(), &gs.w1()}, {&s.b1(), &gs.b1()}, {&s.w2(), &gs.w2()}, {&s.b2(), &gs.b2()}})
        for (Eigen::Index r = 0; r < p->rows(); ++r)
          for (Eigen::Index c = 0; c < p->cols(); ++c) check(*p, *g, r, c);
      for (int k = 0; k < kNumFeatureSlots; ++k) {
        if (state.features[k] == FeatureValue::Missing) continue;
        const int r = FeatureEmbeddingTable::row_of(k, state.features[k]);
        for (int c = 0; c < kFeatureEmbeddingDim; ++c)
          check(model.parameters().features.rows(), grad.features.rows(), r, c);
      }
    }
    return {worst <= tol, fmt("20 instances, %ld entries, max relative error %.3g (tol 1e-4, eps 1e-5)", checked, worst)};
  }

  // 6. Schedule values, exact.
  Outcome schedule()
  {
    const TrainConfig cfg;
    const double a = lr_at(2000, cfg), b = lr_at(4000, cfg), c = lr_at(16000, cfg);
    return {a == 0.0005 && b == 0.001 && c == 0.0005, fmt("lr_at(2000)=%.17g lr_at(4000)=%.17g lr_at(16000)=%.17g", a, b, c)};
  }

  // 7. Toy overfit with the hash encoder; dev = train.
  Outcome toy_overfit()
  {
    const auto corpus = generate_synthetic_corpus(13, 20, 3, 12);
    TrainConfig cfg;
    cfg.seed = 13;
    cfg.max_epochs = 50;
    cfg.warmup_steps = 200;              // see the decisions ledger
    cfg.early_stop_patience_epochs = 50;  // all 50 epochs are available
    auto run = [&] {
      auto model = ParserModel::create(ModelConfig{}, cfg.seed);
      std::vector<double> losses;
      TrainHooks hooks;
      hooks.on_batch = [&](long, double, double loss) { losses.push_back(loss); };
      const auto result = train(model, corpus, corpus, cfg, cfg.batch_docs_finetune, hooks);
      return std::tuple{model, losses, result};
    };
    auto [m1, l1, r1] = run();
    auto [m2, l2, r2] = run();
    const auto dev = evaluate_dev(m1, corpus);
    bool identical = l1 == l2 && r1.best_epoch == r2.best_epoch;
    auto t1 = m1.parameters().tensors(), t2 = m2.parameters().tensors();
    for (std::size_t k = 0; k < t1.size(); ++k) identical &= *t1[k] == *t2[k];
    return {dev.action_accuracy >= 95.0 && dev.struct_f1 >= 90.0 && identical,
            fmt("action accuracy %.2f%% (>= 95), structure F1 %.2f (>= 90), best epoch %d/50, rerun bit-identical: %s",
                dev.action_accuracy, dev.struct_f1, r1.best_epoch, identical ? "yes" : "no")};
  }

  // 8. Ablation widths; each variant trains.
  Outcome ablations()
  {
    const auto corpus = generate_synthetic_corpus(8, 6, 3, 8);
    ModelConfig base;
    const int d = base.hash_dim;
    std::string detail;
    bool ok = true;
    const std::pair<Ablation, int> cases[] = {
      {Ablation::NoEncoder, 280}, {Ablation::NoFeatures, d}, {Ablation::RandomInitEncoder, d + 280}};
    for (const auto& [ablation, width] : cases) {
      auto cfg = base;
      cfg.apply(ablation, 13);
      auto model = ParserModel::create(cfg, 13);
      TrainConfig tc;
      tc.max_epochs = 2;
      bool trained = true;
      try {
        train(model, corpus, corpus, tc, 5);
      } catch (const std::exception&) {
        trained = false;
      }
      bool fresh = true;
      if (ablation == Ablation::RandomInitEncoder) {
        const auto doc = corpus[0];
        const auto pa = model.prepare(doc);
        const auto plain = ParserModel::create(base, 13);
        const auto pb = plain.prepare(doc);
        const auto s = apply(initial_state(doc), Action::Shift);
        fresh = cfg.encoder_seed != kPretrainedHashSeed &&
                !model.encode_state(s, pa).summary.isApprox(plain.encode_state(s, pb).summary);
      }
      ok &= model.input_dim() == width && trained && fresh;
      detail += fmt("%s=%d%s ", std::string(to_string(ablation)).c_str(), model.input_dim(),
                    trained ? "" : " (training failed)");
    }
    return {ok, detail + fmt("(d=%d)", d)};
  }

  // 9. Early stopping on a scripted dev sequence.
  Outcome early_stopping()
  {
    const auto corpus = generate_synthetic_corpus(9, 5, 3, 6);
    TrainConfig cfg;
    cfg.max_epochs = 30;
    cfg.warmup_steps = 10;
    const std::vector<std::pair<double, double>> script = {{20, 10}, {30, 15}, {35, 14}, {40, 20},
                                                           {39, 19}, {40, 20}, {10, 5},  {90, 90}};
    HeadParameters at_best;
    TrainHooks hooks;
    hooks.evaluator = [&](const ParserModel& m, int epoch) {
      if (epoch == 4) at_best = m.parameters();
      return DevMetrics{script[epoch - 1].first, script[epoch - 1].second, 0.0};
    };
    auto model = ParserModel::create(ModelConfig{}, 3);
    const auto result = train(model, corpus, {}, cfg, 5, hooks);
    bool restored = true;
    auto kept = model.parameters().tensors(), expected = at_best.tensors();
    for (std::size_t k = 0; k < kept.size(); ++k) restored &= *kept[k] == *expected[k];
    return {result.best_epoch == 4 && result.epochs_run == result.best_epoch + 3 && result.stopped_early && restored,
            fmt("best epoch %d, halted after epoch %d (expected %d), best parameters restored: %s", result.best_epoch,
                result.epochs_run, result.best_epoch + 3, restored ? "yes" : "no")};
  }
}

int main()
{
  struct Criterion
  {
    int id;
    const char* name;
    std::function<Outcome()> check;
  };
  const Criterion criteria[] = {
    {1, "transition round trip", transition_round_trip},
    {2, "input layout", input_layout},
    {3, "metric oracle", metric_oracle},
    {4, "loss arithmetic", loss_arithmetic},
    {5, "gradient check", gradient_check},
    {6, "schedule", schedule},
    {7, "toy overfit", toy_overfit},
    {8, "ablation wiring", ablations},
    {9, "early stopping", early_stopping},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s [%d] %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    failures += !o.pass;
  }

  // Non-gating: needs licensed RST-DT, a pretrained encoder and encoder fine-tuning.
  const bool have_data = std::getenv("RSTPARSE_RSTDT_DIR") && std::getenv("RSTPARSE_ENCODER_DIR");
  std::printf("SKIP [10] RST-DT reproduction (non-gating): %s\n",
              have_data ? "data present, but this build keeps the encoder frozen; run it as a separate experiment"
                        : "RSTPARSE_RSTDT_DIR / RSTPARSE_ENCODER_DIR not set");

  std::printf("%s: %d of 9 gating criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
