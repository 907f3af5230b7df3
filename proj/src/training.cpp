#include "rstparse/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "rstparse/errors.hpp"
#include "rstparse/evaluation.hpp"
#include "rstparse/parallel.hpp"
#include "rstparse/random.hpp"

namespace rstparse
{
  using json = nlohmann::ordered_json;

  void TrainConfig::validate() const
  {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string(name) + " must be positive");
    };
    positive(base_lr, "base_lr");
    if (!(weight_decay >= 0.0)) throw InputError("weight_decay must not be negative");
    positive(grad_clip_norm, "grad_clip_norm");
    positive(warmup_steps, "warmup_steps");
    positive(batch_docs_pretrain, "batch_docs_pretrain");
    positive(batch_docs_finetune, "batch_docs_finetune");
    positive(early_stop_patience_epochs, "early_stop_patience_epochs");
    positive(max_epochs, "max_epochs");
    positive(adam_eps, "adam_eps");
    positive(workers, "workers");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      throw InputError("adam betas must lie in [0, 1)");
    try {
      loss_weights.validate();
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  }

  void TrainConfig::apply_ablations(ModelConfig& model) const
  {
    if (no_encoder) model.apply(Ablation::NoEncoder, seed);
    if (no_features) model.apply(Ablation::NoFeatures, seed);
    if (random_init_encoder) model.apply(Ablation::RandomInitEncoder, seed);
  }

  json TrainConfig::to_json() const
  {
    json j;
    j["base_lr"] = base_lr;
    j["weight_decay"] = weight_decay;
    j["grad_clip_norm"] = grad_clip_norm;
    j["warmup_steps"] = warmup_steps;
    j["batch_docs_pretrain"] = batch_docs_pretrain;
    j["batch_docs_finetune"] = batch_docs_finetune;
    j["early_stop_patience_epochs"] = early_stop_patience_epochs;
    j["max_epochs"] = max_epochs;
    j["adam_beta1"] = adam_beta1;
    j["adam_beta2"] = adam_beta2;
    j["adam_eps"] = adam_eps;
    j["loss_weights"] = loss_weights.weights;
    j["seed"] = seed;
    j["no_encoder"] = no_encoder;
    j["no_features"] = no_features;
    j["random_init_encoder"] = random_init_encoder;
    j["cache_encodings"] = cache_encodings;
    j["workers"] = workers;
    return j;
  }

  TrainConfig TrainConfig::from_json(const json& j) { return from_json(j, TrainConfig{}); }

  TrainConfig TrainConfig::from_json(const json& j, const TrainConfig& base)
  {
    if (!j.is_object()) throw InputError("training config must be a JSON object");
    TrainConfig c = base;
    for (const auto& [key, value] : j.items()) {
      try {
        if (key == "base_lr") c.base_lr = value.get<double>();
        else if (key == "weight_decay") c.weight_decay = value.get<double>();
        else if (key == "grad_clip_norm") c.grad_clip_norm = value.get<double>();
        else if (key == "warmup_steps") c.warmup_steps = value.get<int>();
        else if (key == "batch_docs_pretrain") c.batch_docs_pretrain = value.get<int>();
        else if (key == "batch_docs_finetune") c.batch_docs_finetune = value.get<int>();
        else if (key == "early_stop_patience_epochs") c.early_stop_patience_epochs = value.get<int>();
        else if (key == "max_epochs") c.max_epochs = value.get<int>();
        else if (key == "adam_beta1") c.adam_beta1 = value.get<double>();
        else if (key == "adam_beta2") c.adam_beta2 = value.get<double>();
        else if (key == "adam_eps") c.adam_eps = value.get<double>();
        else if (key == "loss_weights") c.loss_weights.weights = value.get<std::array<double, kNumActions>>();
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "no_encoder") c.no_encoder = value.get<bool>();
        else if (key == "no_features") c.no_features = value.get<bool>();
        else if (key == "random_init_encoder") c.random_init_encoder = value.get<bool>();
        else if (key == "cache_encodings") c.cache_encodings = value.get<bool>();
        else if (key == "workers") c.workers = value.get<int>();
        else throw InputError("unknown training config key: " + key);
      } catch (const nlohmann::json::exception& e) {
        throw InputError("training config key " + key + ": " + e.what());
      }
    }
    c.validate();
    return c;
  }

  std::vector<TrainingInstance> build_instances(const Document& doc, int doc_index)
  {
    if (!doc.gold_tree) throw InputError("document " + doc.doc_id + " has no gold tree");
    const auto actions = oracle_actions(*doc.gold_tree);
    std::vector<TrainingInstance> out;
    out.reserve(actions.size());
    auto state = initial_state(doc);
    for (std::size_t k = 0; k < actions.size(); ++k) {
      out.push_back({doc_index, static_cast<int>(k), state.s2(), state.s1(), state.q1(), actions[k]});
      state = apply(std::move(state), actions[k]);
    }
    return out;
  }

  double lr_at(long step, const TrainConfig& cfg)
  {
    if (step < 1) throw std::invalid_argument("lr_at: step must be at least 1");
    const double s = static_cast<double>(step);
    const double w = static_cast<double>(cfg.warmup_steps);
    return cfg.base_lr * std::min(s / w, std::sqrt(w / s));
  }

  void AdamW::reset()
  {
    t_ = 0;
    m_.clear();
    v_.clear();
  }

  void AdamW::step(const std::vector<Eigen::MatrixXd*>& params, const std::vector<Eigen::MatrixXd*>& grads, double lr)
  {
    if (params.size() != grads.size()) throw std::invalid_argument("AdamW: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
        v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      const auto& g = *grads[k];
      p *= 1.0 - lr * cfg_.weight_decay;
      m_[k] = b1 * m_[k] + (1.0 - b1) * g;
      v_[k] = b2 * v_[k] + (1.0 - b2) * g.cwiseProduct(g);
      p.array() -= lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + cfg_.adam_eps);
    }
  }

  double global_norm(const std::vector<Eigen::MatrixXd*>& grads)
  {
    double sq = 0.0;
    for (const auto* g : grads) sq += g->squaredNorm();
    return std::sqrt(sq);
  }

  double clip_gradients(const std::vector<Eigen::MatrixXd*>& grads, double max_norm)
  {
    const double norm = global_norm(grads);
    if (norm > max_norm) {
      const double scale = max_norm / (norm + 1e-12);
      for (auto* g : grads) *g *= scale;
    }
    return norm;
  }

  EarlyStopping::EarlyStopping(int patience) : patience_(patience)
  {
    if (patience < 1) throw std::invalid_argument("early stopping patience must be at least 1");
  }

  bool EarlyStopping::update(int epoch, double struct_f1, double nuc_f1)
  {
    const bool improved = struct_f1 > best_struct_ || nuc_f1 > best_nuc_;
    best_struct_ = std::max(best_struct_, struct_f1);
    best_nuc_ = std::max(best_nuc_, nuc_f1);
    stale_ = improved ? 0 : stale_ + 1;
    if (struct_f1 > keep_struct_ || (struct_f1 == keep_struct_ && nuc_f1 > keep_nuc_)) {
      keep_struct_ = struct_f1;
      keep_nuc_ = nuc_f1;
      best_epoch_ = epoch;
      return true;
    }
    return false;
  }

  json EpochRecord::to_json() const
  {
    json j;
    j["epoch"] = epoch;
    j["step"] = step;
    j["lr"] = lr;
    j["loss"] = loss;
    j["dev_struct_F1"] = dev.struct_f1;
    j["dev_nuc_F1"] = dev.nuc_f1;
    j["dev_action_accuracy"] = dev.action_accuracy;
    return j;
  }

  namespace
  {
    EpochRecord record_from_json(const json& j)
    {
      EpochRecord r;
      r.epoch = j.at("epoch").get<int>();
      r.step = j.at("step").get<long>();
      r.lr = j.at("lr").get<double>();
      r.loss = j.at("loss").get<double>();
      r.dev.struct_f1 = j.at("dev_struct_F1").get<double>();
      r.dev.nuc_f1 = j.at("dev_nuc_F1").get<double>();
      r.dev.action_accuracy = j.value("dev_action_accuracy", 0.0);
      return r;
    }

    Action argmax_legal(const ActionScores& logits, const ActionSet& legal)
    {
      return select_action(action_distribution(logits, legal), legal);
    }

    // Replays the oracle and counts steps where the model agrees with it.
    std::pair<long, long> count_correct(const ParserModel& model, const Document& doc)
    {
      if (!doc.gold_tree) throw InputError("document " + doc.doc_id + " has no gold tree");
      const auto prepared = model.prepare(doc);
      auto state = initial_state(doc);
      long correct = 0, total = 0;
      for (Action gold : oracle_actions(*doc.gold_tree)) {
        const auto predicted = argmax_legal(model.logits(model.encode_state(state, prepared)), legal_actions(state));
        correct += predicted == gold;
        ++total;
        state = apply(std::move(state), gold);
      }
      return {correct, total};
    }

    std::vector<std::vector<int>> make_batches(const std::vector<Document>& corpus, int batch_docs, Rng& rng)
    {
      std::map<int, std::vector<int>> by_size;
      for (std::size_t d = 0; d < corpus.size(); ++d)
        by_size[static_cast<int>(corpus[d].edus.size())].push_back(static_cast<int>(d));
      std::vector<std::vector<int>> batches;
      for (auto& [size, docs] : by_size) {
        rng.shuffle(docs);
        for (std::size_t k = 0; k < docs.size(); k += static_cast<std::size_t>(batch_docs)) {
          const auto end = std::min(docs.size(), k + static_cast<std::size_t>(batch_docs));
          batches.emplace_back(docs.begin() + static_cast<std::ptrdiff_t>(k), docs.begin() + static_cast<std::ptrdiff_t>(end));
        }
      }
      rng.shuffle(batches);
      return batches;
    }

    void zero(HeadParameters& grad)
    {
      for (auto* t : grad.tensors()) t->setZero();
    }
  }

  double action_accuracy(const ParserModel& model, const std::vector<Document>& docs)
  {
    long correct = 0, total = 0;
    for (const auto& doc : docs) {
      const auto [c, t] = count_correct(model, doc);
      correct += c;
      total += t;
    }
    return total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 100.0;
  }

  DevMetrics evaluate_dev(const ParserModel& model, const std::vector<Document>& dev, int workers)
  {
    std::vector<TreeNode> gold(dev.size()), pred(dev.size());
    std::vector<std::pair<long, long>> counts(dev.size());
    parallel_for(dev.size(), workers, [&](std::size_t k) {
      if (!dev[k].gold_tree) throw InputError("dev document " + dev[k].doc_id + " has no gold tree");
      gold[k] = *dev[k].gold_tree;
      pred[k] = model.parse(dev[k]);
      counts[k] = count_correct(model, dev[k]);
    });
    DevMetrics m;
    m.struct_f1 = micro_f1(gold, pred, Metric::Original, Facet::Structure).f1;
    m.nuc_f1 = micro_f1(gold, pred, Metric::Original, Facet::Nuclearity).f1;
    long correct = 0, total = 0;
    for (const auto& [c, t] : counts) {
      correct += c;
      total += t;
    }
    m.action_accuracy = total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 100.0;
    return m;
  }

  double mean_instance_loss(const ParserModel& model, const std::vector<Document>& docs,
                            const std::vector<TrainingInstance>& instances, const LossWeights& weights)
  {
    if (instances.empty()) return 0.0;
    std::map<int, PreparedDocument> prepared;
    double sum = 0.0;
    for (const auto& inst : instances) {
      auto it = prepared.find(inst.doc);
      if (it == prepared.end()) it = prepared.emplace(inst.doc, model.prepare(docs.at(inst.doc))).first;
      sum += weighted_loss(model.logits(model.encode_state(inst.s2, inst.s1, inst.q1, it->second)), inst.gold, weights);
    }
    return sum / static_cast<double>(instances.size());
  }

  TrainResult train(ParserModel& model, const std::vector<Document>& corpus, const std::vector<Document>& dev,
                    const TrainConfig& cfg, int batch_docs, const TrainHooks& hooks)
  {
    cfg.validate();
    if (corpus.empty()) throw InputError("training corpus is empty");
    if (dev.empty() && !hooks.evaluator) throw InputError("dev corpus is empty");
    if (batch_docs < 1) throw InputError("batch size must be positive");

    std::vector<PreparedDocument> prepared;
    std::vector<std::vector<TrainingInstance>> instances;
    prepared.reserve(corpus.size());
    for (std::size_t d = 0; d < corpus.size(); ++d) {
      instances.push_back(build_instances(corpus[d], static_cast<int>(d)));
      prepared.push_back(model.prepare(corpus[d]));
    }

    // The encoder never changes, so what it produces for each instance can be
    // computed once. Attention pooling keeps whole hidden-state matrices, too
    // large to hold for a corpus, so it re-encodes instead.
    const bool cache = cfg.cache_encodings && model.config().summarizer != Summarizer::Attention;
    std::vector<std::vector<EncodedState>> encoded(corpus.size());
    if (cache) {
      parallel_for(corpus.size(), cfg.workers, [&](std::size_t d) {
        for (const auto& inst : instances[d])
          encoded[d].push_back(model.encode_state(inst.s2, inst.s1, inst.q1, prepared[d]));
      });
    }

    Rng rng(cfg.seed);
    AdamW optimizer(cfg);
    EarlyStopping stopper(cfg.early_stop_patience_epochs);
    HeadParameters grad = model.parameters().zeros_like();
    HeadParameters best = model.parameters();
    TrainResult result;
    long step = 0;
    double lr = 0.0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
      double epoch_loss = 0.0;
      long epoch_count = 0;
      for (const auto& batch : make_batches(corpus, batch_docs, rng)) {
        zero(grad);
        double batch_loss = 0.0;
        long count = 0;
        for (int d : batch) {
          for (std::size_t k = 0; k < instances[d].size(); ++k) {
            const auto& inst = instances[d][k];
            const double loss =
              cache ? model.loss_and_gradient(encoded[d][k], inst.gold, cfg.loss_weights, grad)
                    : model.loss_and_gradient(model.encode_state(inst.s2, inst.s1, inst.q1, prepared[d]), inst.gold,
                                              cfg.loss_weights, grad);
            if (!std::isfinite(loss)) {
              std::ostringstream msg;
              msg << "non-finite loss " << loss << " at epoch " << epoch << ", step " << step + 1 << ", document "
                  << corpus[d].doc_id << ", oracle step " << inst.step << " (gold " << to_string(inst.gold) << ")";
              throw TrainingError(msg.str());
            }
            batch_loss += loss;
            ++count;
          }
        }
        const double scale = 1.0 / static_cast<double>(count);
        auto grads = grad.tensors();
        for (auto* g : grads) *g *= scale;
        const double norm = clip_gradients(grads, cfg.grad_clip_norm);
        if (!std::isfinite(norm)) throw TrainingError("non-finite gradient norm at step " + std::to_string(step + 1));
        ++step;
        lr = lr_at(step, cfg);
        optimizer.step(model.parameters().tensors(), grads, lr);
        epoch_loss += batch_loss;
        epoch_count += count;
        if (hooks.on_batch) hooks.on_batch(step, lr, batch_loss * scale);
      }

      EpochRecord record;
      record.epoch = epoch;
      record.step = step;
      record.lr = lr;
      record.loss = epoch_loss / static_cast<double>(epoch_count);
      record.dev = hooks.evaluator ? hooks.evaluator(model, epoch) : evaluate_dev(model, dev, cfg.workers);
      result.history.push_back(record);
      result.epochs_run = epoch;
      if (hooks.log) *hooks.log << record.to_json().dump() << "\n" << std::flush;
      if (hooks.on_epoch) hooks.on_epoch(record);

      if (stopper.update(epoch, record.dev.struct_f1, record.dev.nuc_f1)) best = model.parameters();
      if (stopper.should_stop()) {
        result.stopped_early = true;
        break;
      }
    }

    model.parameters() = best;
    result.best_epoch = stopper.best_epoch();
    result.final_step = step;
    return result;
  }

  PretrainFinetuneResult pretrain_then_finetune(ParserModel& model, const PhaseCorpora& silver,
                                                const PhaseCorpora& gold, const TrainConfig& cfg,
                                                const TrainHooks& hooks, std::ostream* warnings)
  {
    PretrainFinetuneResult result;
    if (silver.train.empty()) {
      if (warnings) *warnings << "warning: silver corpus is empty; running fine-tuning only\n";
    } else {
      result.pretrain = train(model, silver.train, silver.dev.empty() ? silver.train : silver.dev, cfg,
                              cfg.batch_docs_pretrain, hooks);
    }
    // train() builds a fresh optimizer and starts the schedule at step 1.
    result.finetune = train(model, gold.train, gold.dev, cfg, cfg.batch_docs_finetune, hooks);
    return result;
  }

  Checkpoint make_checkpoint(const ParserModel& model, const TrainResult& result, json run_config)
  {
    Checkpoint c;
    c.model = model.to_json();
    c.run_config = std::move(run_config);
    c.schedule_step = result.final_step;
    c.best_epoch = result.best_epoch;
    c.history = result.history;
    return c;
  }

  void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint)
  {
    json j;
    j["format"] = "rstparse-checkpoint/1";
    j["config"] = checkpoint.run_config;
    j["schedule_step"] = checkpoint.schedule_step;
    j["best_epoch"] = checkpoint.best_epoch;
    auto history = json::array();
    for (const auto& r : checkpoint.history) history.push_back(r.to_json());
    j["history"] = std::move(history);
    j["model"] = checkpoint.model;
    std::ofstream out(path);
    if (!out) throw InputError("cannot write checkpoint " + path.string());
    out << j.dump() << "\n";
    if (!out) throw InputError("failed writing checkpoint " + path.string());
  }

  Checkpoint load_checkpoint(const std::filesystem::path& path)
  {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open checkpoint " + path.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string(), e.byte, "checkpoint is not valid JSON");
    }
    try {
      if (j.at("format") != "rstparse-checkpoint/1") throw InputError(path.string() + ": unsupported checkpoint format");
      Checkpoint c;
      c.model = j.at("model");
      c.run_config = j.value("config", json::object());
      c.schedule_step = j.value("schedule_step", 0L);
      c.best_epoch = j.value("best_epoch", 0);
      for (const auto& r : j.value("history", json::array())) c.history.push_back(record_from_json(r));
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ": malformed checkpoint: " + e.what());
    }
  }
}
