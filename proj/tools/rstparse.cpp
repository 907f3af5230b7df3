// rstparse: corpus conversion, training, parsing and evaluation.
//
// Exit codes: 0 success, 1 bad input or arguments, 2 internal error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rstparse/dis_reader.hpp"
#include "rstparse/errors.hpp"
#include "rstparse/evaluation.hpp"
#include "rstparse/interchange.hpp"
#include "rstparse/model.hpp"
#include "rstparse/parallel.hpp"
#include "rstparse/training.hpp"
#include "rstparse/treebank.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace rstparse;

namespace
{
  constexpr const char* kEncoderDirEnv = "RSTPARSE_ENCODER_DIR";

  // Everything a train or pretrain-finetune run depends on. Defaults, then
  // the --config file, then explicit flags.
  struct RunConfig
  {
    std::string command;
    std::string corpus;         // interchange path or "synthetic"
    std::string dev;            // interchange path, "train", or empty for a held-out split
    std::string silver;         // pretrain-finetune only
    std::string silver_dev;
    std::string output = "run";
    int synthetic_docs = 20;
    int synthetic_min_edus = 3;
    int synthetic_max_edus = 12;
    double heldout_ratio = 0.9;  // train share when no dev corpus is given
    std::string ablation = "none";
    ModelConfig model;
    TrainConfig train;

    json to_json() const
    {
      json m;
      m["encoder"] = to_string(model.encoder);
      m["model_dir"] = model.model_dir;
      m["hash_dim"] = model.hash_dim;
      m["hidden_dim"] = model.hidden_dim;
      m["summarizer"] = to_string(model.summarizer);
      json j;
      j["command"] = command;
      j["corpus"] = corpus;
      j["dev"] = dev;
      j["silver"] = silver;
      j["silver_dev"] = silver_dev;
      j["output"] = output;
      j["synthetic_docs"] = synthetic_docs;
      j["synthetic_min_edus"] = synthetic_min_edus;
      j["synthetic_max_edus"] = synthetic_max_edus;
      j["heldout_ratio"] = heldout_ratio;
      j["ablation"] = ablation;
      j["model"] = std::move(m);
      j["train"] = train.to_json();
      return j;
    }

    void merge(const json& j)
    {
      if (!j.is_object()) throw InputError("run config must be a JSON object");
      for (const auto& [key, value] : j.items()) {
        try {
          if (key == "command") continue;  // informational, the subcommand decides
          else if (key == "corpus") corpus = value.get<std::string>();
          else if (key == "dev") dev = value.get<std::string>();
          else if (key == "silver") silver = value.get<std::string>();
          else if (key == "silver_dev") silver_dev = value.get<std::string>();
          else if (key == "output") output = value.get<std::string>();
          else if (key == "synthetic_docs") synthetic_docs = value.get<int>();
          else if (key == "synthetic_min_edus") synthetic_min_edus = value.get<int>();
          else if (key == "synthetic_max_edus") synthetic_max_edus = value.get<int>();
          else if (key == "heldout_ratio") heldout_ratio = value.get<double>();
          else if (key == "ablation") ablation = value.get<std::string>();
          else if (key == "train") train = TrainConfig::from_json(value, train);
          else if (key == "model") merge_model(value);
          else throw InputError("unknown config key: " + key);
        } catch (const nlohmann::json::exception& e) {
          throw InputError("config key " + key + ": " + e.what());
        }
      }
    }

    void merge_model(const json& j)
    {
      if (!j.is_object()) throw InputError("config key model must be an object");
      for (const auto& [key, value] : j.items()) {
        if (key == "encoder") set_encoder(value.get<std::string>());
        else if (key == "model_dir") model.model_dir = value.get<std::string>();
        else if (key == "hash_dim") model.hash_dim = value.get<int>();
        else if (key == "hidden_dim") model.hidden_dim = value.get<int>();
        else if (key == "summarizer") set_summarizer(value.get<std::string>());
        else throw InputError("unknown config key: model." + key);
      }
    }

    void set_encoder(const std::string& name)
    {
      const auto kind = parse_encoder_kind(name);
      if (!kind) throw InputError("unknown encoder: " + name);
      model.encoder = *kind;
    }

    void set_summarizer(const std::string& name)
    {
      const auto s = parse_summarizer(name);
      if (!s) throw InputError("unknown summarizer: " + name);
      model.summarizer = *s;
    }
  };

  json read_json_file(const fs::path& path)
  {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
      return json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string(), e.byte, "invalid JSON");
    }
  }

  void write_text(const fs::path& path, const std::string& text)
  {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
  }

  long count_edus(const std::vector<Document>& docs)
  {
    long n = 0;
    for (const auto& d : docs) n += d.size();
    return n;
  }

  std::vector<Document> binarized(std::vector<Document> docs)
  {
    for (auto& d : docs)
      if (d.gold_tree) d.gold_tree = binarize(*d.gold_tree);
    return docs;
  }

  std::vector<Document> load_corpus(const RunConfig& run, const std::string& spec, std::uint64_t seed)
  {
    if (spec == "synthetic")
      return generate_synthetic_corpus(seed, run.synthetic_docs, run.synthetic_min_edus, run.synthetic_max_edus);
    return binarized(read_corpus(fs::path(spec)));
  }

  std::vector<Document> with_trees(std::vector<Document> docs, const std::string& what)
  {
    const auto before = docs.size();
    std::erase_if(docs, [](const Document& d) { return !d.gold_tree; });
    if (docs.size() != before)
      std::cerr << "warning: " << what << ": skipped " << before - docs.size() << " document(s) without a tree\n";
    return docs;
  }

  // Training and dev corpora for one phase.
  PhaseCorpora load_phase(const RunConfig& run, const std::string& corpus, const std::string& dev, const char* what)
  {
    PhaseCorpora phase;
    auto docs = with_trees(load_corpus(run, corpus, run.train.seed), what);
    if (docs.empty()) return phase;
    if (dev == "train") {
      phase.train = docs;
      phase.dev = std::move(docs);
    } else if (dev.empty()) {
      auto split = split_corpus(std::move(docs), run.heldout_ratio, run.train.seed);
      phase.train = std::move(split.train);
      phase.dev = std::move(split.heldout);
    } else {
      phase.train = std::move(docs);
      phase.dev = with_trees(load_corpus(run, dev, run.train.seed + 1), what);
    }
    return phase;
  }

  void finalize_model_config(RunConfig& run)
  {
    if (run.model.model_dir.empty())
      if (const char* env = std::getenv(kEncoderDirEnv)) run.model.model_dir = env;
    const auto ablation = parse_ablation(run.ablation);
    if (!ablation) throw InputError("unknown ablation: " + run.ablation);
    run.train.no_encoder |= *ablation == Ablation::NoEncoder;
    run.train.no_features |= *ablation == Ablation::NoFeatures;
    run.train.random_init_encoder |= *ablation == Ablation::RandomInitEncoder;
    run.train.validate();
  }

  // Per-epoch dev evaluation that also writes the full score report.
  TrainHooks make_hooks(const std::vector<Document>& dev, const TrainConfig& cfg, std::ostream& log,
                        std::ostream& reports, const std::string& phase)
  {
    TrainHooks hooks;
    hooks.log = &log;
    hooks.evaluator = [&dev, &reports, &cfg, phase](const ParserModel& model, int epoch) {
      std::vector<TreeNode> gold(dev.size()), pred(dev.size());
      parallel_for(dev.size(), cfg.workers, [&](std::size_t k) {
        gold[k] = *dev[k].gold_tree;
        pred[k] = model.parse(dev[k]);
      });
      EvalOptions options;
      options.both_root_conventions = true;
      const auto report = score_trees(gold, pred, options);
      json line;
      line["phase"] = phase;
      line["epoch"] = epoch;
      line["report"] = report.to_json();
      reports << line.dump() << "\n" << std::flush;
      DevMetrics m;
      m.struct_f1 = report.get(Metric::Original, Facet::Structure).f1;
      m.nuc_f1 = report.get(Metric::Original, Facet::Nuclearity).f1;
      m.action_accuracy = action_accuracy(model, dev);
      return m;
    };
    hooks.on_epoch = [phase](const EpochRecord& r) {
      std::cerr << phase << " epoch " << r.epoch << "  step " << r.step << "  loss " << r.loss << "  dev struct "
                << r.dev.struct_f1 << "  nuc " << r.dev.nuc_f1 << "  acc " << r.dev.action_accuracy << "\n";
    };
    return hooks;
  }

  void add_training_options(CLI::App* cmd, RunConfig& run, std::string& config_path, std::string& encoder,
                            std::string& summarizer)
  {
    cmd->add_option("--config", config_path, "JSON run config; unknown keys are rejected");
    cmd->add_option("--corpus", run.corpus, "interchange training corpus, or 'synthetic'");
    cmd->add_option("--dev", run.dev, "interchange dev corpus, or 'train' to reuse the training corpus");
    cmd->add_option("--output,-o", run.output, "output directory");
    cmd->add_option("--encoder", encoder, "toy | transformer");
    cmd->add_option("--model-dir", run.model.model_dir,
                    std::string("pretrained encoder directory (default: $") + kEncoderDirEnv + ")");
    cmd->add_option("--summarizer", summarizer, "cls | mean | attention");
    cmd->add_option("--hidden-dim", run.model.hidden_dim);
    cmd->add_option("--hash-dim", run.model.hash_dim, "toy encoder width");
    cmd->add_option("--ablation", run.ablation, "none | no_encoder | no_features | random_init_encoder");
    cmd->add_option("--seed", run.train.seed);
    cmd->add_option("--epochs", run.train.max_epochs, "maximum number of epochs");
    cmd->add_option("--lr", run.train.base_lr, "peak learning rate");
    cmd->add_option("--warmup", run.train.warmup_steps);
    cmd->add_option("--patience", run.train.early_stop_patience_epochs);
    cmd->add_option("--batch-docs-pretrain", run.train.batch_docs_pretrain);
    cmd->add_option("--batch-docs-finetune", run.train.batch_docs_finetune);
    cmd->add_option("--workers", run.train.workers, "dev decoding threads");
    cmd->add_option("--synthetic-docs", run.synthetic_docs);
  }

  // Re-applies flags given on the command line over a loaded config file.
  void apply_config_file(CLI::App* cmd, RunConfig& run, const std::string& config_path)
  {
    if (config_path.empty()) return;
    RunConfig from_file = run;
    from_file.merge(read_json_file(config_path));
    auto given = [cmd](const char* flag) { return cmd->get_option(flag)->count() > 0; };
    if (!given("--corpus")) run.corpus = from_file.corpus;
    if (!given("--dev")) run.dev = from_file.dev;
    if (!given("--output")) run.output = from_file.output;
    if (!given("--model-dir")) run.model.model_dir = from_file.model.model_dir;
    if (!given("--hidden-dim")) run.model.hidden_dim = from_file.model.hidden_dim;
    if (!given("--hash-dim")) run.model.hash_dim = from_file.model.hash_dim;
    if (!given("--ablation")) run.ablation = from_file.ablation;
    if (!given("--synthetic-docs")) run.synthetic_docs = from_file.synthetic_docs;
    auto maybe_given = [cmd](const char* flag) {
      const auto* opt = cmd->get_option_no_throw(flag);
      return opt && opt->count() > 0;
    };
    if (!maybe_given("--silver")) run.silver = from_file.silver;
    if (!maybe_given("--silver-dev")) run.silver_dev = from_file.silver_dev;
    run.synthetic_min_edus = from_file.synthetic_min_edus;
    run.synthetic_max_edus = from_file.synthetic_max_edus;
    run.heldout_ratio = from_file.heldout_ratio;
    const TrainConfig flags = run.train;
    run.train = from_file.train;
    if (given("--seed")) run.train.seed = flags.seed;
    if (given("--epochs")) run.train.max_epochs = flags.max_epochs;
    if (given("--lr")) run.train.base_lr = flags.base_lr;
    if (given("--warmup")) run.train.warmup_steps = flags.warmup_steps;
    if (given("--patience")) run.train.early_stop_patience_epochs = flags.early_stop_patience_epochs;
    if (given("--batch-docs-pretrain")) run.train.batch_docs_pretrain = flags.batch_docs_pretrain;
    if (given("--batch-docs-finetune")) run.train.batch_docs_finetune = flags.batch_docs_finetune;
    if (given("--workers")) run.train.workers = flags.workers;
    if (!given("--encoder")) run.model.encoder = from_file.model.encoder;
    if (!given("--summarizer")) run.model.summarizer = from_file.model.summarizer;
  }

  int run_training(RunConfig run, bool pretrain)
  {
    finalize_model_config(run);
    if (run.corpus.empty()) throw InputError("--corpus is required");
    const fs::path out_dir(run.output);
    fs::create_directories(out_dir);
    const json effective = run.to_json();
    write_text(out_dir / "config.json", effective.dump(2) + "\n");

    ModelConfig model_config = run.model;
    run.train.apply_ablations(model_config);
    auto model = ParserModel::create(model_config, run.train.seed);
    std::cerr << "classifier input width " << model.input_dim() << " (encoder " << model.encoder_dim() << ")\n";

    std::ofstream log(out_dir / "train_log.jsonl");
    std::ofstream reports(out_dir / "dev_reports.jsonl");
    if (!log || !reports) throw InputError("cannot write logs in " + out_dir.string());

    const auto gold = load_phase(run, run.corpus, run.dev, "gold corpus");
    std::cerr << "gold: " << gold.train.size() << " train / " << gold.dev.size() << " dev documents\n";
    if (gold.train.empty() || gold.dev.empty()) throw InputError("training and dev corpora must not be empty");

    TrainResult final_result;
    json phases = json::object();
    if (pretrain) {
      PhaseCorpora silver;
      if (!run.silver.empty()) silver = load_phase(run, run.silver, run.silver_dev, "silver corpus");
      if (!silver.train.empty() && silver.dev.empty()) throw InputError("silver dev corpus is empty");
      std::cerr << "silver: " << silver.train.size() << " train / " << silver.dev.size() << " dev documents\n";
      PretrainFinetuneResult result;
      if (silver.train.empty()) {
        std::cerr << "warning: silver corpus is empty; running fine-tuning only\n";
      } else {
        result.pretrain = train(model, silver.train, silver.dev, run.train, run.train.batch_docs_pretrain,
                                make_hooks(silver.dev, run.train, log, reports, "pretrain"));
        phases["pretrain_best_epoch"] = result.pretrain->best_epoch;
      }
      result.finetune = train(model, gold.train, gold.dev, run.train, run.train.batch_docs_finetune,
                              make_hooks(gold.dev, run.train, log, reports, "finetune"));
      final_result = result.finetune;
    } else {
      final_result = train(model, gold.train, gold.dev, run.train, run.train.batch_docs_finetune,
                           make_hooks(gold.dev, run.train, log, reports, "train"));
    }

    save_checkpoint(out_dir / "checkpoint.json", make_checkpoint(model, final_result, effective));
    const auto& best = final_result.history.at(static_cast<std::size_t>(final_result.best_epoch - 1));
    json summary;
    summary["best_epoch"] = final_result.best_epoch;
    summary["epochs_run"] = final_result.epochs_run;
    summary["stopped_early"] = final_result.stopped_early;
    summary["dev_struct_F1"] = best.dev.struct_f1;
    summary["dev_nuc_F1"] = best.dev.nuc_f1;
    summary["dev_action_accuracy"] = best.dev.action_accuracy;
    summary["input_dim"] = model.input_dim();
    if (!phases.empty()) summary["phases"] = phases;
    summary["config"] = effective;
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump() << "\n";
    return 0;
  }

  int run_convert(const std::string& format, const std::string& input, const std::string& output)
  {
    std::vector<Document> docs;
    if (format == "rstdt_dis") {
      const fs::path src(input);
      if (fs::is_directory(src)) docs = load_dis_corpus(src);
      else docs.push_back(read_dis_file(src).document);
      docs = binarized(std::move(docs));
    } else if (format == "interchange") {
      docs = binarized(read_corpus(fs::path(input)));
    } else {
      throw InputError("unknown source format: " + format);
    }
    if (output.empty() || output == "-") write_corpus(std::cout, docs);
    else write_corpus(fs::path(output), docs);
    std::cerr << "documents: " << docs.size() << "  EDUs: " << count_edus(docs) << "\n";
    return 0;
  }

  int run_parse(const std::string& checkpoint_path, const std::string& input, const std::string& format,
                const std::string& output, const std::string& brackets, const std::string& model_dir, int workers)
  {
    const auto checkpoint = load_checkpoint(checkpoint_path);
    std::string dir = model_dir;
    if (dir.empty())
      if (const char* env = std::getenv(kEncoderDirEnv)) dir = env;
    const auto model = ParserModel::from_json(checkpoint.model, dir);

    std::vector<Document> docs;
    if (format == "segmented") {
      std::ifstream in(input);
      if (!in) throw InputError("cannot open " + input);
      std::vector<std::string> skipped;
      docs = read_segmented(in, input, &skipped);
      for (const auto& id : skipped) std::cerr << "warning: skipping empty document " << id << "\n";
    } else if (format == "interchange") {
      docs = read_corpus(fs::path(input));
      std::erase_if(docs, [](const Document& d) {
        if (d.edus.empty()) std::cerr << "warning: skipping empty document " << d.doc_id << "\n";
        return d.edus.empty();
      });
    } else {
      throw InputError("unknown input format: " + format);
    }

    std::vector<Document> parsed(docs.size());
    parallel_for(docs.size(), workers, [&](std::size_t k) {
      parsed[k] = docs[k];
      parsed[k].gold_tree = model.parse(docs[k]);
    });

    if (output.empty() || output == "-") {
      write_corpus(std::cout, parsed);
    } else {
      write_corpus(fs::path(output), parsed);
      json sidecar;
      sidecar["checkpoint"] = checkpoint_path;
      sidecar["input"] = input;
      sidecar["input_format"] = format;
      sidecar["model_config"] = checkpoint.model.at("model_config");
      sidecar["training_config"] = checkpoint.run_config;
      write_text(output + ".config.json", sidecar.dump(2) + "\n");
    }
    if (!brackets.empty()) {
      std::ostringstream view;
      for (const auto& d : parsed) view << d.doc_id << "\t" << to_brackets(*d.gold_tree) << "\n";
      write_text(brackets, view.str());
    }
    std::cerr << "parsed " << parsed.size() << " documents\n";
    return 0;
  }

  int run_eval(const std::string& gold_path, const std::string& pred_path, const std::string& metric,
               bool include_root, bool both_roots, const std::string& json_path)
  {
    EvalOptions options;
    if (metric == "original") options.rst = false;
    else if (metric == "rst") options.original = false;
    else if (metric != "both") throw InputError("unknown metric: " + metric);
    options.include_root = include_root;
    options.both_root_conventions = both_roots;

    const auto gold = read_corpus(fs::path(gold_path));
    const auto pred = read_corpus(fs::path(pred_path));
    const auto report = evaluate_corpus(gold, pred, options);
    std::cout << report.to_text();
    if (!json_path.empty()) {
      json j;
      j["gold"] = gold_path;
      j["pred"] = pred_path;
      j["options"] = {{"metric", metric}, {"include_root", include_root}, {"both_root_conventions", both_roots}};
      j["records"] = report.to_json();
      if (json_path == "-") std::cout << j.dump() << "\n";
      else write_text(json_path, j.dump(2) + "\n");
    }
    return 0;
  }
}

int main(int argc, char** argv)
{
  CLI::App app{"Shift-reduce discourse parser"};
  app.require_subcommand(1);

  std::string format = "rstdt_dis", input, output;
  auto* convert = app.add_subcommand("convert", "convert a treebank to interchange records (trees binarized)");
  convert->add_option("--from", format, "rstdt_dis | interchange")->capture_default_str();
  convert->add_option("input", input, "source file or directory")->required();
  convert->add_option("output", output, "destination file, '-' for stdout");

  int synth_docs = 20, synth_min = 3, synth_max = 12;
  std::uint64_t synth_seed = 13;
  auto* synth = app.add_subcommand("synth", "write a synthetic corpus");
  synth->add_option("--docs", synth_docs)->capture_default_str();
  synth->add_option("--min-edus", synth_min)->capture_default_str();
  synth->add_option("--max-edus", synth_max)->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("output", output, "destination file, '-' for stdout");

  RunConfig train_run, pre_run;
  std::string train_config, train_encoder, train_summarizer;
  std::string pre_config, pre_encoder, pre_summarizer;
  auto* train_cmd = app.add_subcommand("train", "train on a gold corpus");
  add_training_options(train_cmd, train_run, train_config, train_encoder, train_summarizer);
  auto* pre_cmd = app.add_subcommand("pretrain-finetune", "pretrain on a silver corpus, then fine-tune on gold");
  add_training_options(pre_cmd, pre_run, pre_config, pre_encoder, pre_summarizer);
  pre_cmd->add_option("--silver", pre_run.silver, "interchange silver corpus, or 'synthetic'");
  pre_cmd->add_option("--silver-dev", pre_run.silver_dev, "interchange silver dev corpus, or 'train'");

  std::string checkpoint, input_format = "segmented", brackets, model_dir;
  int workers = 1;
  auto* parse = app.add_subcommand("parse", "parse segmented documents with a trained checkpoint");
  parse->add_option("--checkpoint", checkpoint)->required();
  parse->add_option("--input-format", input_format, "segmented | interchange")->capture_default_str();
  parse->add_option("--brackets", brackets, "also write a bracket view to this file");
  parse->add_option("--model-dir", model_dir, "override the stored encoder directory");
  parse->add_option("--workers", workers)->capture_default_str();
  parse->add_option("input", input)->required();
  parse->add_option("output", output, "destination file, '-' for stdout");

  std::string gold, pred, metric = "both", json_path;
  bool include_root = false, both_roots = false;
  auto* eval = app.add_subcommand("eval", "score predicted trees against gold trees");
  eval->add_option("gold", gold)->required();
  eval->add_option("pred", pred)->required();
  eval->add_option("--metric", metric, "original | rst | both")->capture_default_str();
  eval->add_flag("--include-root", include_root, "count the root span under original Parseval");
  eval->add_flag("--both-root-conventions", both_roots, "report original Parseval with and without the root");
  eval->add_option("--json", json_path, "write machine-readable records here ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*convert) return run_convert(format, input, output);
    if (*synth) {
      const auto docs = generate_synthetic_corpus(synth_seed, synth_docs, synth_min, synth_max);
      if (output.empty() || output == "-") write_corpus(std::cout, docs);
      else write_corpus(fs::path(output), docs);
      return 0;
    }
    if (train_cmd->parsed() || pre_cmd->parsed()) {
      const bool pretrain = pre_cmd->parsed();
      auto* cmd = pretrain ? pre_cmd : train_cmd;
      auto& run = pretrain ? pre_run : train_run;
      const auto& encoder = pretrain ? pre_encoder : train_encoder;
      const auto& summarizer = pretrain ? pre_summarizer : train_summarizer;
      run.command = pretrain ? "pretrain-finetune" : "train";
      if (!encoder.empty()) run.set_encoder(encoder);
      if (!summarizer.empty()) run.set_summarizer(summarizer);
      apply_config_file(cmd, run, pretrain ? pre_config : train_config);
      return run_training(run, pretrain);
    }
    if (*parse) return run_parse(checkpoint, input, input_format, output, brackets, model_dir, workers);
    if (*eval) return run_eval(gold, pred, metric, include_root, both_roots, json_path);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
