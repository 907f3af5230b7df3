#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "rstparse/errors.hpp"
#include "rstparse/training.hpp"
#include "support.hpp"

using namespace rstparse;
using namespace testing_support;

namespace
{
  ModelConfig small_model()
  {
    ModelConfig m;
    m.hash_dim = 32;
    m.hidden_dim = 24;
    return m;
  }

  TrainConfig quick_config(int epochs)
  {
    TrainConfig cfg;
    cfg.max_epochs = epochs;
    cfg.warmup_steps = 20;
    cfg.early_stop_patience_epochs = 1000;
    return cfg;
  }

  bool same_parameters(ParserModel& a, ParserModel& b)
  {
    auto ta = a.parameters().tensors(), tb = b.parameters().tensors();
    if (ta.size() != tb.size()) return false;
    for (std::size_t k = 0; k < ta.size(); ++k)
      if (*ta[k] != *tb[k]) return false;
    return true;
  }

  DevMetrics scripted(double s, double n) { return {s, n, 0.0}; }
}

TEST_CASE("learning rate schedule")
{
  const TrainConfig cfg;
  CHECK(lr_at(4000, cfg) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(lr_at(2000, cfg) == doctest::Approx(0.0005).epsilon(1e-12));
  CHECK(lr_at(16000, cfg) == doctest::Approx(0.0005).epsilon(1e-12));
  CHECK(lr_at(1, cfg) == doctest::Approx(0.001 / 4000));
  CHECK_THROWS(lr_at(0, cfg));
  double prev = 0.0;
  for (long s = 1; s <= 4000; s += 37) {
    CHECK(lr_at(s, cfg) > prev);
    prev = lr_at(s, cfg);
  }
  for (long s = 4001; s < 40000; s += 997) CHECK(lr_at(s, cfg) < lr_at(s - 1, cfg));
}

TEST_CASE("training instances follow the oracle")
{
  const auto doc = doc_with_tree("d", J(J(L(1), L(2), Nuclearity::NS), L(3), Nuclearity::SN));
  const auto inst = build_instances(doc, 7);
  REQUIRE(inst.size() == 5);
  const std::vector<Action> gold = {Action::Shift, Action::Shift, Action::ReduceNS, Action::Shift, Action::ReduceSN};
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(inst[k].gold == gold[k]);
    CHECK(inst[k].step == static_cast<int>(k));
    CHECK(inst[k].doc == 7);
  }
  CHECK_FALSE(inst[0].s1.has_value());
  CHECK(inst[0].q1 == 1);
  CHECK(inst[2].s2 == Span{1, 1});
  CHECK(inst[2].s1 == Span{2, 2});
  CHECK(inst[2].q1 == 3);
  CHECK(inst[4].s2 == Span{1, 2});
  CHECK_FALSE(inst[4].q1.has_value());

  Document no_tree = doc;
  no_tree.gold_tree.reset();
  CHECK_THROWS_AS(build_instances(no_tree), InputError);

  for (const auto& d : generate_synthetic_corpus(4, 30, 1, 20)) {
    const auto xs = build_instances(d);
    const auto shifts = std::count_if(xs.begin(), xs.end(), [](const auto& x) { return x.gold == Action::Shift; });
    CHECK(shifts == d.size());
    CHECK(static_cast<int>(xs.size()) - shifts == d.size() - 1);
    CHECK(xs.front().gold == Action::Shift);
  }
}

TEST_CASE("gradient clipping")
{
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd a(3, 4), b(5, 1);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal(0, 0.3);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal(0, 0.3);
    const Eigen::MatrixXd a0 = a, b0 = b;
    const double before = clip_gradients({&a, &b}, 0.2);
    CHECK(before == doctest::Approx(std::sqrt(a0.squaredNorm() + b0.squaredNorm())));
    const double after = global_norm({&a, &b});
    if (before > 0.2) {
      CHECK(after <= 0.2 + 1e-6);
      CHECK(after == doctest::Approx(0.2));
      CHECK(a.isApprox(a0 * (0.2 / before), 1e-9));
    } else {
      CHECK(a == a0);
    }
  }
}

TEST_CASE("AdamW first step")
{
  TrainConfig cfg;
  cfg.weight_decay = 0.01;
  AdamW opt(cfg);
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(2, 2, 1.0), g(2, 2);
  g << 0.5, -0.5, 2.0, 0.0;
  opt.step({&p}, {&g}, 0.1);
  CHECK(opt.steps_taken() == 1);
  // Bias-corrected first step moves by lr * sign(g), after decoupled decay.
  CHECK(p(0, 0) == doctest::Approx(1.0 * (1 - 0.001) - 0.1));
  CHECK(p(0, 1) == doctest::Approx(1.0 * (1 - 0.001) + 0.1));
  CHECK(p(1, 0) == doctest::Approx(1.0 * (1 - 0.001) - 0.1));
  CHECK(p(1, 1) == doctest::Approx(1.0 * (1 - 0.001)));
  opt.reset();
  CHECK(opt.steps_taken() == 0);
}

TEST_CASE("early stopping rule")
{
  EarlyStopping es(3);
  CHECK(es.update(1, 50, 40));
  CHECK(es.update(2, 60, 40));
  CHECK_FALSE(es.update(3, 60, 40));  // equal is not an improvement
  CHECK(es.stale_epochs() == 1);
  CHECK_FALSE(es.update(4, 55, 45));  // nuclearity improved: the counter resets
  CHECK(es.stale_epochs() == 0);
  CHECK_FALSE(es.update(5, 55, 44));
  CHECK_FALSE(es.update(6, 59, 45));
  CHECK_FALSE(es.should_stop());
  CHECK_FALSE(es.update(7, 60, 30));
  CHECK(es.should_stop());
  CHECK(es.best_epoch() == 2);

  EarlyStopping tie(2);
  tie.update(1, 70, 50);
  CHECK(tie.update(2, 70, 55));
  CHECK(tie.best_epoch() == 2);
}

TEST_CASE("train stops after patience epochs and keeps the best parameters")
{
  const auto corpus = generate_synthetic_corpus(3, 6, 3, 6);
  auto model = ParserModel::create(small_model(), 1);
  auto cfg = quick_config(20);
  cfg.early_stop_patience_epochs = 2;
  const std::vector<DevMetrics> script = {scripted(10, 10), scripted(30, 20), scripted(30, 20), scripted(20, 15),
                                          scripted(50, 50)};
  HeadParameters at_best;
  TrainHooks hooks;
  hooks.evaluator = [&](const ParserModel& m, int epoch) {
    if (epoch == 2) at_best = m.parameters();
    return script[epoch - 1];
  };
  const auto result = train(model, corpus, {}, cfg, 5, hooks);
  CHECK(result.stopped_early);
  CHECK(result.epochs_run == 4);
  CHECK(result.history.size() == 4);
  CHECK(result.best_epoch == 2);
  auto kept = model.parameters().tensors();
  auto expected = at_best.tensors();
  for (std::size_t k = 0; k < kept.size(); ++k) CHECK(*kept[k] == *expected[k]);
}

TEST_CASE("batches group documents of equal size")
{
  // Sizes {3, 3, 3, 4, 4} in batches of 2 give 2 + 1 steps per epoch.
  std::vector<Document> corpus;
  for (int k = 0; k < 3; ++k) corpus.push_back(doc_with_tree("a" + std::to_string(k), J(J(L(1), L(2), Nuclearity::NN), L(3), Nuclearity::NS)));
  for (int k = 0; k < 2; ++k)
    corpus.push_back(doc_with_tree("b" + std::to_string(k),
                                   J(J(L(1), L(2), Nuclearity::NN), J(L(3), L(4), Nuclearity::SN), Nuclearity::NS)));
  auto model = ParserModel::create(small_model(), 1);
  const auto result = train(model, corpus, corpus, quick_config(3), 2);
  CHECK(result.final_step == 9);
  CHECK(result.history[0].step == 3);
}

TEST_CASE("batch loss is the mean instance loss")
{
  // One batch per epoch: three 4-EDU documents with batch size 5.
  std::vector<Document> corpus;
  for (int k = 0; k < 3; ++k)
    corpus.push_back(doc_with_tree("d" + std::to_string(k), J(L(1), J(L(2), J(L(3), L(4), Nuclearity::NS), Nuclearity::SN), Nuclearity::NN)));
  std::vector<TrainingInstance> all;
  for (int d = 0; d < 3; ++d) {
    const auto xs = build_instances(corpus[d], d);
    all.insert(all.end(), xs.begin(), xs.end());
  }
  auto model = ParserModel::create(small_model(), 2);
  const auto cfg = quick_config(1);
  const double expected = mean_instance_loss(model, corpus, all, cfg.loss_weights);
  double reported = -1.0;
  TrainHooks hooks;
  hooks.on_batch = [&](long step, double, double loss) {
    if (step == 1) reported = loss;
  };
  train(model, corpus, corpus, cfg, 5, hooks);
  CHECK(reported == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("training is bit-reproducible")
{
  const auto corpus = generate_synthetic_corpus(8, 10, 2, 8);
  auto run = [&](int workers) {
    auto model = ParserModel::create(small_model(), 5);
    auto cfg = quick_config(4);
    cfg.workers = workers;
    std::vector<double> losses;
    TrainHooks hooks;
    hooks.on_batch = [&](long, double, double loss) { losses.push_back(loss); };
    const auto result = train(model, corpus, corpus, cfg, 3, hooks);
    return std::tuple{model, losses, result.history.back().dev.struct_f1};
  };
  auto [m1, l1, f1] = run(1);
  auto [m2, l2, f2] = run(1);
  auto [m3, l3, f3] = run(3);
  CHECK(l1 == l2);
  CHECK(l1 == l3);
  CHECK(f1 == f2);
  CHECK(f1 == f3);
  CHECK(same_parameters(m1, m2));
  CHECK(same_parameters(m1, m3));
}

TEST_CASE("non-finite loss is reported")
{
  const auto corpus = generate_synthetic_corpus(9, 3, 3, 4);
  auto model = ParserModel::create(small_model(), 1);
  model.parameters().scorer.b2()(0, 0) = std::nan("");
  try {
    train(model, corpus, corpus, quick_config(1), 5);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
    CHECK(std::string(e.what()).find("document") != std::string::npos);
  }
}

TEST_CASE("ablations set the classifier input width")
{
  auto width = [](auto tweak) {
    TrainConfig cfg;
    tweak(cfg);
    auto m = small_model();
    cfg.apply_ablations(m);
    return ParserModel::create(m, 1).input_dim();
  };
  CHECK(width([](TrainConfig&) {}) == 32 + 280);
  CHECK(width([](TrainConfig& c) { c.no_encoder = true; }) == 280);
  CHECK(width([](TrainConfig& c) { c.no_features = true; }) == 32);

  TrainConfig fresh;
  fresh.random_init_encoder = true;
  auto m = small_model();
  fresh.apply_ablations(m);
  CHECK(m.random_init_encoder);
  CHECK(m.encoder_seed != kPretrainedHashSeed);
}

TEST_CASE("fine-tuning restarts the schedule")
{
  const auto silver = generate_synthetic_corpus(10, 8, 2, 6);
  const auto gold = generate_synthetic_corpus(11, 6, 2, 6);
  auto model = ParserModel::create(small_model(), 3);
  auto cfg = quick_config(2);
  cfg.batch_docs_pretrain = 4;
  cfg.batch_docs_finetune = 2;
  std::vector<std::pair<long, double>> calls;
  TrainHooks hooks;
  hooks.on_batch = [&](long step, double lr, double) { calls.emplace_back(step, lr); };
  const auto result = pretrain_then_finetune(model, {silver, silver}, {gold, gold}, cfg, hooks);
  REQUIRE(result.pretrain.has_value());
  const long pre_steps = result.pretrain->final_step;
  REQUIRE(calls.size() > static_cast<std::size_t>(pre_steps));
  CHECK(calls[0].first == 1);
  CHECK(calls[pre_steps].first == 1);
  CHECK(calls[pre_steps].second == lr_at(1, cfg));
  CHECK(result.finetune.final_step == static_cast<long>(calls.size()) - pre_steps);
}

TEST_CASE("empty silver corpus degrades to fine-tuning")
{
  const auto gold = generate_synthetic_corpus(12, 4, 2, 5);
  auto model = ParserModel::create(small_model(), 3);
  std::ostringstream warnings;
  const auto result = pretrain_then_finetune(model, {}, {gold, gold}, quick_config(2), {}, &warnings);
  CHECK_FALSE(result.pretrain.has_value());
  CHECK(result.finetune.epochs_run == 2);
  CHECK(warnings.str().find("warning") != std::string::npos);
}

TEST_CASE("checkpoint round trip")
{
  const auto corpus = generate_synthetic_corpus(13, 5, 2, 7);
  auto model = ParserModel::create(small_model(), 4);
  const auto result = train(model, corpus, corpus, quick_config(2), 5);
  const auto path = std::filesystem::temp_directory_path() / "rstparse_test_checkpoint.json";
  save_checkpoint(path, make_checkpoint(model, result, {{"note", "test"}}));
  const auto loaded = load_checkpoint(path);
  std::filesystem::remove(path);
  CHECK(loaded.best_epoch == result.best_epoch);
  CHECK(loaded.schedule_step == result.final_step);
  CHECK(loaded.history.size() == result.history.size());
  CHECK(loaded.run_config["note"] == "test");
  auto restored = ParserModel::from_json(loaded.model);
  CHECK(same_parameters(model, restored));
  for (const auto& d : corpus) CHECK(restored.parse(d) == model.parse(d));

  CHECK_THROWS_AS(load_checkpoint(fixtures() / "segmented.txt"), InputError);
}

TEST_CASE("train config json")
{
  TrainConfig cfg;
  cfg.base_lr = 0.5;
  cfg.no_features = true;
  cfg.loss_weights.weights = {0.4, 0.2, 0.2, 0.2};
  const auto back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.base_lr == 0.5);
  CHECK(back.no_features);
  CHECK(back.loss_weights.weights == cfg.loss_weights.weights);
  CHECK(back.to_json() == cfg.to_json());
  CHECK_THROWS_AS(TrainConfig::from_json({{"learning_rate", 0.1}}), InputError);
  CHECK(TrainConfig::from_json({{"max_epochs", 7}}, back).base_lr == 0.5);
  TrainConfig bad;
  bad.warmup_steps = 0;
  CHECK_THROWS_AS(bad.validate(), InputError);
}
