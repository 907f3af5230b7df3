#ifndef RSTPARSE_TRAINING_HPP
#define RSTPARSE_TRAINING_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rstparse/classifier.hpp"
#include "rstparse/model.hpp"
#include "rstparse/tree.hpp"

namespace rstparse
{
  struct TrainConfig
  {
    double base_lr = 0.001;
    double weight_decay = 0.01;
    double grad_clip_norm = 0.2;
    int warmup_steps = 4000;
    int batch_docs_pretrain = 20;
    int batch_docs_finetune = 5;
    int early_stop_patience_epochs = 3;
    int max_epochs = 50;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    LossWeights loss_weights;
    std::uint64_t seed = 13;
    bool no_encoder = false;
    bool no_features = false;
    bool random_init_encoder = false;
    bool cache_encodings = true;  // the encoder is frozen, so its outputs can be reused across epochs
    int workers = 1;              // dev decoding threads

    // Throws InputError on a non-positive setting.
    void validate() const;
    void apply_ablations(ModelConfig& model) const;

    nlohmann::ordered_json to_json() const;
    // Missing keys keep their defaults; unknown keys throw InputError.
    static TrainConfig from_json(const nlohmann::ordered_json& j);
    static TrainConfig from_json(const nlohmann::ordered_json& j, const TrainConfig& base);
  };

  // One teacher-forced step. The three constituents are enough to rebuild
  // the encoder input and the structural features.
  struct TrainingInstance
  {
    int doc = 0;   // index into the corpus the instance was built from
    int step = 0;  // position along the oracle trajectory
    std::optional<Span> s2, s1;
    std::optional<int> q1;
    Action gold = Action::Shift;
  };

  // 2n - 1 instances along the oracle trajectory. Throws InputError when the
  // document has no gold tree and std::invalid_argument when it is not binary.
  std::vector<TrainingInstance> build_instances(const Document& doc, int doc_index = 0);

  double lr_at(long step, const TrainConfig& cfg);

  // Decoupled weight decay, applied to every tensor.
  class AdamW
  {
  public:
    explicit AdamW(const TrainConfig& cfg) : cfg_(cfg) {}

    // One update with learning rate `lr`; `params` and `grads` pair up by position.
    void step(const std::vector<Eigen::MatrixXd*>& params, const std::vector<Eigen::MatrixXd*>& grads, double lr);

    long steps_taken() const { return t_; }
    void reset();

  private:
    TrainConfig cfg_;
    long t_ = 0;
    std::vector<Eigen::MatrixXd> m_, v_;
  };

  double global_norm(const std::vector<Eigen::MatrixXd*>& grads);

  // Rescales so the global norm is at most max_norm; returns the norm before clipping.
  double clip_gradients(const std::vector<Eigen::MatrixXd*>& grads, double max_norm);

  struct DevMetrics
  {
    double struct_f1 = 0.0;
    double nuc_f1 = 0.0;
    double action_accuracy = 0.0;  // percent of gold steps predicted under teacher forcing
  };

  // Stops after `patience` consecutive epochs in which neither metric beat
  // its own best so far. Tracks the checkpoint to keep separately: best
  // structure F1, ties broken by nuclearity.
  class EarlyStopping
  {
  public:
    explicit EarlyStopping(int patience);

    // Returns true when this epoch becomes the kept checkpoint.
    bool update(int epoch, double struct_f1, double nuc_f1);
    bool should_stop() const { return stale_ >= patience_; }

    int best_epoch() const { return best_epoch_; }
    int stale_epochs() const { return stale_; }

  private:
    int patience_;
    int stale_ = 0;
    int best_epoch_ = 0;
    double best_struct_ = -1.0, best_nuc_ = -1.0;  // per-metric bests, for stopping
    double keep_struct_ = -1.0, keep_nuc_ = -1.0;  // kept checkpoint
  };

  struct EpochRecord
  {
    int epoch = 0;
    long step = 0;
    double lr = 0.0;
    double loss = 0.0;  // mean instance loss over the epoch
    DevMetrics dev;

    nlohmann::ordered_json to_json() const;
  };

  struct TrainResult
  {
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    int epochs_run = 0;
    long final_step = 0;
    bool stopped_early = false;
  };

  struct TrainHooks
  {
    // Replaces the default dev evaluation (greedy decoding + original Parseval).
    std::function<DevMetrics(const ParserModel&, int epoch)> evaluator;
    std::function<void(const EpochRecord&)> on_epoch;
    // Called after every optimizer step with the step number, its lr and the batch loss.
    std::function<void(long step, double lr, double loss)> on_batch;
    std::ostream* log = nullptr;  // JSON line per epoch
  };

  // Original-Parseval (root excluded) structure/nuclearity F1 of greedy
  // decoding, plus teacher-forced action accuracy.
  DevMetrics evaluate_dev(const ParserModel& model, const std::vector<Document>& dev, int workers = 1);

  // Teacher-forced accuracy of the model's argmax over legal actions, in percent.
  double action_accuracy(const ParserModel& model, const std::vector<Document>& docs);

  // Mean weighted loss over a set of instances, recomputed from scratch.
  double mean_instance_loss(const ParserModel& model, const std::vector<Document>& docs,
                            const std::vector<TrainingInstance>& instances, const LossWeights& weights);

  // Trains the head of `model` in place and leaves it holding the kept
  // checkpoint. Throws TrainingError when a loss is not finite.
  TrainResult train(ParserModel& model, const std::vector<Document>& corpus, const std::vector<Document>& dev,
                    const TrainConfig& cfg, int batch_docs, const TrainHooks& hooks = {});

  struct PhaseCorpora
  {
    std::vector<Document> train;
    std::vector<Document> dev;
  };

  struct PretrainFinetuneResult
  {
    std::optional<TrainResult> pretrain;
    TrainResult finetune;
  };

  // Trains on the silver corpus, keeps its best checkpoint, then trains on the
  // gold corpus with a fresh optimizer and schedule. An empty silver corpus
  // skips the first phase and writes a warning to `warnings`.
  PretrainFinetuneResult pretrain_then_finetune(ParserModel& model, const PhaseCorpora& silver,
                                                const PhaseCorpora& gold, const TrainConfig& cfg,
                                                const TrainHooks& hooks = {}, std::ostream* warnings = nullptr);

  struct Checkpoint
  {
    nlohmann::ordered_json model;
    nlohmann::ordered_json run_config;  // effective configuration of the producing run
    long schedule_step = 0;
    int best_epoch = 0;
    std::vector<EpochRecord> history;
  };

  Checkpoint make_checkpoint(const ParserModel& model, const TrainResult& result, nlohmann::ordered_json run_config);
  void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
  Checkpoint load_checkpoint(const std::filesystem::path& path);
}

#endif
