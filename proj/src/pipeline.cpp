#include "crl/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include "crl/errors.hpp"
#include "crl/io.hpp"
#include "crl/metrics.hpp"

namespace crl {

using nlohmann::json;

json experiment_config_to_json(const ExperimentConfig& c) {
  json doc;
  doc["synth"] = {{"num_examples", c.synth.num_examples},
                  {"facts_per_doc", c.synth.facts_per_doc},
                  {"vocab_size", c.synth.vocab_size}};
  doc["train_size"] = c.train_size;
  doc["valid_size"] = c.valid_size;
  doc["test_size"] = c.test_size;
  doc["hidden_size"] = c.hidden_size;
  doc["context_window"] = c.context_window;
  doc["pretrain_epochs"] = c.pretrain_epochs;
  doc["pretrain_lr"] = c.pretrain_lr;
  doc["pretrain_batch"] = c.pretrain_batch;
  doc["candidate_beam"] = {{"beam_width", c.candidate_beam.beam_width},
                           {"max_length", c.candidate_beam.max_length},
                           {"num_groups", c.candidate_beam.num_groups},
                           {"diversity_strength",
                            c.candidate_beam.diversity_strength}};
  doc["finetune"] = {{"learning_rate", c.finetune.learning_rate},
                     {"gamma", c.finetune.crl.gamma},
                     {"lambda", c.finetune.crl.lambda},
                     {"alpha", c.finetune.crl.alpha},
                     {"batch_size", c.finetune.batch_size},
                     {"max_epochs", c.finetune.max_epochs},
                     {"patience", c.finetune.patience},
                     {"valid_beam_width", c.finetune.valid_beam_width},
                     {"max_decode_length", c.finetune.max_decode_length},
                     {"dae_window", c.finetune.dae_window}};
  doc["eval_beam_width"] = c.eval_beam_width;
  doc["seeds"] = c.seeds;
  return doc;
}

ExperimentConfig experiment_config_from_json(const json& doc) {
  ExperimentConfig c;
  c.synth.num_examples = doc.at("synth").at("num_examples").get<int>();
  c.synth.facts_per_doc = doc.at("synth").at("facts_per_doc").get<int>();
  c.synth.vocab_size = doc.at("synth").at("vocab_size").get<int>();
  c.train_size = doc.at("train_size").get<int>();
  c.valid_size = doc.at("valid_size").get<int>();
  c.test_size = doc.at("test_size").get<int>();
  c.hidden_size = doc.at("hidden_size").get<int>();
  c.context_window = doc.at("context_window").get<int>();
  c.pretrain_epochs = doc.at("pretrain_epochs").get<int>();
  c.pretrain_lr = doc.at("pretrain_lr").get<double>();
  c.pretrain_batch = doc.at("pretrain_batch").get<int>();
  const auto& beam = doc.at("candidate_beam");
  c.candidate_beam.beam_width = beam.at("beam_width").get<int>();
  c.candidate_beam.max_length = beam.at("max_length").get<int>();
  c.candidate_beam.num_groups = beam.at("num_groups").get<int>();
  c.candidate_beam.diversity_strength =
      beam.at("diversity_strength").get<double>();
  const auto& ft = doc.at("finetune");
  c.finetune.learning_rate = ft.at("learning_rate").get<double>();
  c.finetune.crl.gamma = ft.at("gamma").get<double>();
  c.finetune.crl.lambda = ft.at("lambda").get<double>();
  c.finetune.crl.alpha = ft.at("alpha").get<double>();
  c.finetune.batch_size = ft.at("batch_size").get<int>();
  c.finetune.max_epochs = ft.at("max_epochs").get<int>();
  c.finetune.patience = ft.at("patience").get<int>();
  c.finetune.valid_beam_width = ft.at("valid_beam_width").get<int>();
  c.finetune.max_decode_length = ft.at("max_decode_length").get<int>();
  c.finetune.dae_window = ft.at("dae_window").get<int>();
  c.eval_beam_width = doc.at("eval_beam_width").get<int>();
  c.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
  return c;
}

namespace {

const std::vector<MetricKind>& all_metric_kinds() {
  static const std::vector<MetricKind> kinds = {
      MetricKind::Rouge1,   MetricKind::Rouge2,   MetricKind::RougeL,
      MetricKind::RougeMean, MetricKind::BartLike, MetricKind::DaeLike};
  return kinds;
}

SeedOutcome run_seed(const ExperimentConfig& config, std::uint64_t seed,
                     const std::filesystem::path& seed_dir) {
  std::filesystem::create_directories(seed_dir);

  SynthConfig synth = config.synth;
  synth.seed = seed;
  SynthCorpus corpus = generate_synthetic(synth);
  corpus.vocab.save(seed_dir / "vocab.txt");
  save_corpus(seed_dir / "corpus.jsonl", corpus.pairs, corpus.vocab);

  const auto begin = corpus.pairs.begin();
  const std::vector<ExamplePair> train(begin, begin + config.train_size);
  const std::vector<ExamplePair> valid(begin + config.train_size,
                                       begin + config.train_size +
                                           config.valid_size);
  const std::vector<ExamplePair> test(
      begin + config.train_size + config.valid_size,
      begin + config.train_size + config.valid_size + config.test_size);

  ModelConfig model_config;
  model_config.vocab_size = corpus.vocab.size();
  model_config.hidden_size = config.hidden_size;
  model_config.context_window = config.context_window;

  const SeqModel base =
      pretrain_base(train, config.pretrain_epochs, config.pretrain_lr, seed,
                    model_config, config.pretrain_batch);
  save_checkpoint(seed_dir / "base.ckpt", checkpoint_of(base));
  const SeqModel& scorer = base;  // frozen likelihood scorer

  BeamConfig beam = config.candidate_beam;
  beam.seed = seed;
  const CandidateSetMap generated = generate_candidate_sets(
      base, train, beam, all_metric_kinds(), scorer, corpus.vocab,
      config.finetune.dae_window);
  write_candidate_sets(seed_dir / "candidates.jsonl", train, generated,
                       corpus.vocab);
  // The file is the canonical hand-off, exactly as in the CLI flow.
  const CandidateSetMap candidates =
      read_candidate_sets(seed_dir / "candidates.jsonl");

  SeedOutcome outcome;
  outcome.seed = seed;
  outcome.report.dataset = "synthetic-seed" + std::to_string(seed);
  outcome.report.sample_count = static_cast<int>(test.size());

  for (std::size_t s = 0; s < kSystemMetrics.size(); ++s) {
    TrainConfig ft = config.finetune;
    ft.metric = kSystemMetrics[s];
    ft.seed = seed;
    const TrainedSystem system =
        finetune(base, candidates, train, valid, ft, scorer, corpus.vocab);

    const std::string tag = to_string(ft.metric);
    save_checkpoint(seed_dir / ("system_" + tag + ".ckpt"), system.checkpoint);
    write_train_log(seed_dir / ("train_log_" + tag + ".tsv"), system.log);

    const SeqModel tuned = model_from_checkpoint(system.checkpoint);
    const SystemScores scores = evaluate_system(
        system.name, tuned, test, scorer, corpus.vocab, config.eval_beam_width,
        config.finetune.max_decode_length, config.finetune.dae_window);

    outcome.report.rows.push_back(scores.row);
    outcome.rouge_mean[s] = (scores.row.r1 + scores.row.r2 + scores.row.rl) / 3.0;
    outcome.bart[s] = scores.row.b;
    outcome.dae[s] = scores.row.d;
    outcome.hallucination[s] = scores.hallucination;
    outcome.best_epoch[s] = system.best_epoch;
  }

  const auto strict_best = [](const std::array<double, 3>& v, std::size_t who) {
    for (std::size_t i = 0; i < 3; ++i) {
      if (i != who && v[i] >= v[who]) return false;
    }
    return true;
  };
  outcome.diagonal_rouge = strict_best(outcome.rouge_mean, 0);
  outcome.diagonal_bart = strict_best(outcome.bart, 1);
  outcome.diagonal_dae = strict_best(outcome.dae, 2);
  outcome.diagonal_all =
      outcome.diagonal_rouge && outcome.diagonal_bart && outcome.diagonal_dae;

  outcome.report_text_path = seed_dir / "report.txt";
  outcome.report_csv_path = seed_dir / "report.csv";
  {
    std::ofstream text(outcome.report_text_path, std::ios::binary);
    text << render_report(outcome.report, ReportStyle::Text);
    std::ofstream csv(outcome.report_csv_path, std::ios::binary);
    csv << render_report(outcome.report, ReportStyle::Delimited);
  }

  json summary;
  summary["seed"] = seed;
  summary["systems"] = json::array();
  for (std::size_t s = 0; s < kSystemMetrics.size(); ++s) {
    json row;
    row["metric"] = to_string(kSystemMetrics[s]);
    row["system"] = outcome.report.rows[s].system;
    row["rouge_mean"] = outcome.rouge_mean[s];
    row["bart_like"] = outcome.bart[s];
    row["dae_like"] = outcome.dae[s];
    row["hallucination_rate"] = outcome.hallucination[s];
    row["best_epoch"] = outcome.best_epoch[s];
    summary["systems"].push_back(row);
  }
  summary["diagonal"] = {{"rouge", outcome.diagonal_rouge},
                         {"bart", outcome.diagonal_bart},
                         {"dae", outcome.diagonal_dae},
                         {"all", outcome.diagonal_all}};
  std::ofstream sum(seed_dir / "summary.json", std::ios::binary);
  sum << summary.dump(2) << '\n';

  return outcome;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config,
                                 const std::filesystem::path& out_dir) {
  if (config.synth.num_examples !=
      config.train_size + config.valid_size + config.test_size) {
    throw DataError(
        "experiment: synth.num_examples must equal train+valid+test");
  }
  if (config.seeds.empty()) throw DataError("experiment: no seeds");

  std::filesystem::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "experiment";
  manifest.config = experiment_config_to_json(config);
  manifest.seed = config.seeds.front();
  for (std::uint64_t seed : config.seeds) {
    manifest.outputs.push_back("seed" + std::to_string(seed) + "/report.txt");
    manifest.outputs.push_back("seed" + std::to_string(seed) + "/report.csv");
    manifest.outputs.push_back("seed" + std::to_string(seed) + "/summary.json");
  }
  write_manifest(out_dir, manifest);

  ExperimentOutcome outcome;
  for (std::uint64_t seed : config.seeds) {
    const auto seed_dir = out_dir / ("seed" + std::to_string(seed));
    outcome.seeds.push_back(run_seed(config, seed, seed_dir));
  }
  for (const auto& seed : outcome.seeds) {
    if (seed.diagonal_all) ++outcome.full_diagonal_count;
    for (std::size_t s = 0; s < 3; ++s) {
      outcome.mean_hallucination[s] +=
          seed.hallucination[s] / static_cast<double>(outcome.seeds.size());
    }
  }
  return outcome;
}

ExperimentOutcome replay_experiment(const std::filesystem::path& manifest_path,
                                    const std::filesystem::path& out_dir) {
  const json doc = read_manifest(manifest_path);
  if (doc.at("command").get<std::string>() != "experiment") {
    throw DataError("manifest does not describe an experiment: " +
                    manifest_path.string());
  }
  return run_experiment(experiment_config_from_json(doc.at("config")), out_dir);
}

}  // namespace crl
