// crl: operator entry point for the contrastive reward learning pipeline.
//
//   synth -> pretrain -> gen-candidates -> finetune -> evaluate -> report
//
// Every subcommand writes a manifest.json with its resolved configuration
// and input checksums into --out-dir before doing any work. Exit codes:
// 0 success, 2 usage error, 3 data error, 4 numeric divergence.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "crl/checkpoint.hpp"
#include "crl/corpus.hpp"
#include "crl/errors.hpp"
#include "crl/evaluator.hpp"
#include "crl/gradcheck.hpp"
#include "crl/io.hpp"
#include "crl/metrics.hpp"
#include "crl/parallel.hpp"
#include "crl/pipeline.hpp"
#include "crl/trainer.hpp"

namespace {

using crl::RunManifest;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct SplitFlags {
  int train_size = 1000;
  int valid_size = 200;
  int test_size = 0;  // 0: everything after train+valid
};

void add_split_flags(CLI::App* cmd, SplitFlags* split, bool with_test) {
  cmd->add_option("--train-size", split->train_size,
                  "Examples from the start of the corpus used for training");
  cmd->add_option("--valid-size", split->valid_size,
                  "Examples after the training slice used for validation");
  if (with_test) {
    cmd->add_option("--test-size", split->test_size,
                    "Examples after the validation slice (0 = the rest)");
  }
}

struct LoadedCorpus {
  crl::Vocabulary vocab;
  std::vector<crl::ExamplePair> pairs;
};

LoadedCorpus load_inputs(const fs::path& corpus_path, const fs::path& vocab_path) {
  LoadedCorpus loaded;
  loaded.vocab = crl::Vocabulary::load(vocab_path);
  loaded.pairs = crl::load_corpus(corpus_path, loaded.vocab);
  return loaded;
}

std::vector<crl::ExamplePair> slice(const std::vector<crl::ExamplePair>& pairs,
                                    std::size_t from, std::size_t count) {
  if (from > pairs.size()) {
    throw crl::DataError("corpus slice starts past the end of the corpus");
  }
  const std::size_t stop = std::min(pairs.size(), from + count);
  return {pairs.begin() + static_cast<std::ptrdiff_t>(from),
          pairs.begin() + static_cast<std::ptrdiff_t>(stop)};
}

const std::vector<crl::MetricKind>& all_kinds() {
  static const std::vector<crl::MetricKind> kinds = {
      crl::MetricKind::Rouge1,    crl::MetricKind::Rouge2,
      crl::MetricKind::RougeL,    crl::MetricKind::RougeMean,
      crl::MetricKind::BartLike,  crl::MetricKind::DaeLike};
  return kinds;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"contrastive reward learning for desk-scale summarization"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from an INI/TOML file");
  bool serial = false;
  app.add_flag("--serial", serial,
               "Use the serial reference kernels instead of OpenMP");

  // ---- synth ----
  auto* synth_cmd = app.add_subcommand(
      "synth", "Generate a seeded synthetic corpus with checkable factuality");
  crl::SynthConfig synth;
  fs::path synth_out = "runs/synth";
  synth_cmd->add_option("--num-examples", synth.num_examples)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--facts-per-doc", synth.facts_per_doc);
  synth_cmd->add_option("--vocab-size", synth.vocab_size);
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--out-dir", synth_out);

  // ---- pretrain ----
  auto* pre_cmd = app.add_subcommand(
      "pretrain", "Train the maximum-likelihood base model from scratch");
  fs::path pre_corpus, pre_vocab;
  fs::path pre_out = "runs/pretrain";
  SplitFlags pre_split;
  int pre_epochs = 10;
  double pre_lr = 2e-3;
  int pre_batch = 8;
  int hidden = 64;
  int context = 64;
  std::uint64_t pre_seed = 1;
  pre_cmd->add_option("--corpus", pre_corpus)->required();
  pre_cmd->add_option("--vocab", pre_vocab)->required();
  pre_cmd->add_option("--out-dir", pre_out);
  add_split_flags(pre_cmd, &pre_split, false);
  pre_cmd->add_option("--epochs", pre_epochs);
  pre_cmd->add_option("--lr", pre_lr);
  pre_cmd->add_option("--batch-size", pre_batch);
  pre_cmd->add_option("--hidden", hidden);
  pre_cmd->add_option("--context", context);
  pre_cmd->add_option("--seed", pre_seed);

  // ---- gen-candidates ----
  auto* gen_cmd = app.add_subcommand(
      "gen-candidates", "Decode candidate summaries with diverse beam search");
  fs::path gen_corpus, gen_vocab, gen_model, gen_scorer;
  fs::path gen_out = "runs/candidates";
  SplitFlags gen_split;
  int gen_candidates = 8;
  int gen_groups = 0;  // 0: one group per candidate
  double gen_diversity = 1.0;
  int gen_max_length = 16;
  std::uint64_t gen_seed = 1;
  gen_cmd->add_option("--corpus", gen_corpus)->required();
  gen_cmd->add_option("--vocab", gen_vocab)->required();
  gen_cmd->add_option("--model", gen_model)->required();
  gen_cmd->add_option("--scorer", gen_scorer,
                      "Frozen likelihood scorer (defaults to --model)");
  gen_cmd->add_option("--out-dir", gen_out);
  add_split_flags(gen_cmd, &gen_split, false);
  gen_cmd->add_option("--candidates", gen_candidates,
                      "Candidates per document (beam width)");
  gen_cmd->add_option("--beam-groups", gen_groups);
  gen_cmd->add_option("--diversity", gen_diversity);
  gen_cmd->add_option("--max-length", gen_max_length);
  gen_cmd->add_option("--seed", gen_seed);

  // ---- finetune ----
  auto* ft_cmd = app.add_subcommand(
      "finetune", "Fine-tune with the combined contrastive objective");
  fs::path ft_corpus, ft_vocab, ft_base, ft_cands, ft_scorer;
  fs::path ft_out = "runs/finetune";
  SplitFlags ft_split;
  std::string ft_metric = "rouge";
  crl::TrainConfig ft_config;
  ft_cmd->add_option("--corpus", ft_corpus)->required();
  ft_cmd->add_option("--vocab", ft_vocab)->required();
  ft_cmd->add_option("--base", ft_base)->required();
  ft_cmd->add_option("--candidates-file", ft_cands)->required();
  ft_cmd->add_option("--scorer", ft_scorer,
                     "Frozen likelihood scorer (defaults to --base)");
  ft_cmd->add_option("--out-dir", ft_out);
  add_split_flags(ft_cmd, &ft_split, false);
  ft_cmd->add_option("--metric", ft_metric,
                     "Quality metric: rouge, bart-like, or dae-like");
  ft_cmd->add_option("--gamma", ft_config.crl.gamma);
  ft_cmd->add_option("--lambda", ft_config.crl.lambda);
  ft_cmd->add_option("--alpha", ft_config.crl.alpha);
  ft_cmd->add_option("--lr", ft_config.learning_rate);
  ft_cmd->add_option("--batch-size", ft_config.batch_size);
  ft_cmd->add_option("--patience", ft_config.patience);
  ft_cmd->add_option("--max-epochs", ft_config.max_epochs);
  ft_cmd->add_option("--max-length", ft_config.max_decode_length);
  ft_cmd->add_option("--dae-window", ft_config.dae_window);
  ft_cmd->add_option("--seed", ft_config.seed);

  // ---- evaluate ----
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Score a trained system on the held-out test slice");
  fs::path eval_corpus, eval_vocab, eval_model, eval_scorer;
  fs::path eval_out = "runs/evaluate";
  SplitFlags eval_split;
  std::string eval_name;
  int eval_beam = 4;
  int eval_max_length = 16;
  int eval_dae_window = 10;
  eval_cmd->add_option("--corpus", eval_corpus)->required();
  eval_cmd->add_option("--vocab", eval_vocab)->required();
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--scorer", eval_scorer)->required();
  eval_cmd->add_option("--out-dir", eval_out);
  add_split_flags(eval_cmd, &eval_split, true);
  eval_cmd->add_option("--system-name", eval_name);
  eval_cmd->add_option("--beam-width", eval_beam);
  eval_cmd->add_option("--max-length", eval_max_length);
  eval_cmd->add_option("--dae-window", eval_dae_window);

  // ---- report ----
  auto* rep_cmd = app.add_subcommand(
      "report", "Render evaluation rows (and human scores) as a table");
  std::vector<fs::path> rep_rows;
  fs::path rep_human;
  fs::path rep_out = "runs/report";
  std::string rep_dataset = "synthetic";
  rep_cmd->add_option("--rows", rep_rows, "row.json files from evaluate");
  rep_cmd->add_option("--human", rep_human, "Annotation CSV to aggregate");
  rep_cmd->add_option("--dataset", rep_dataset);
  rep_cmd->add_option("--out-dir", rep_out);

  // ---- grad-check ----
  auto* grad_cmd = app.add_subcommand(
      "grad-check", "Compare the analytic gradient with finite differences");
  int grad_hidden = 16;
  std::uint64_t grad_seed = 7;
  double grad_step = 1e-4;
  grad_cmd->add_option("--hidden", grad_hidden);
  grad_cmd->add_option("--seed", grad_seed);
  grad_cmd->add_option("--step", grad_step);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  }
  crl::par::enabled() = !serial;

  if (synth_cmd->parsed()) {
    RunManifest manifest;
    manifest.command = "synth";
    manifest.config = {{"num_examples", synth.num_examples},
                       {"facts_per_doc", synth.facts_per_doc},
                       {"vocab_size", synth.vocab_size}};
    manifest.seed = synth.seed;
    manifest.outputs = {"corpus.jsonl", "vocab.txt"};
    write_manifest(synth_out, manifest);

    const crl::SynthCorpus corpus = crl::generate_synthetic(synth);
    corpus.vocab.save(synth_out / "vocab.txt");
    crl::save_corpus(synth_out / "corpus.jsonl", corpus.pairs, corpus.vocab);
    std::cout << "wrote " << corpus.pairs.size() << " examples to "
              << (synth_out / "corpus.jsonl").string() << "\n";
    return kExitOk;
  }

  if (pre_cmd->parsed()) {
    RunManifest manifest;
    manifest.command = "pretrain";
    manifest.config = {{"train_size", pre_split.train_size},
                       {"epochs", pre_epochs},
                       {"lr", pre_lr},
                       {"batch_size", pre_batch},
                       {"hidden", hidden},
                       {"context", context}};
    manifest.seed = pre_seed;
    manifest.inputs = {{"corpus", pre_corpus}, {"vocab", pre_vocab}};
    manifest.outputs = {"base.ckpt"};
    write_manifest(pre_out, manifest);

    const LoadedCorpus loaded = load_inputs(pre_corpus, pre_vocab);
    const auto train =
        slice(loaded.pairs, 0, static_cast<std::size_t>(pre_split.train_size));
    crl::ModelConfig config;
    config.vocab_size = loaded.vocab.size();
    config.hidden_size = hidden;
    config.context_window = context;
    const crl::SeqModel model =
        crl::pretrain_base(train, pre_epochs, pre_lr, pre_seed, config, pre_batch);
    crl::save_checkpoint(pre_out / "base.ckpt", crl::checkpoint_of(model));
    std::cout << "trained base model on " << train.size() << " examples ("
              << model.param_count() << " parameters)\n";
    return kExitOk;
  }

  if (gen_cmd->parsed()) {
    if (gen_scorer.empty()) gen_scorer = gen_model;
    RunManifest manifest;
    manifest.command = "gen-candidates";
    manifest.config = {{"train_size", gen_split.train_size},
                       {"candidates", gen_candidates},
                       {"beam_groups", gen_groups},
                       {"diversity", gen_diversity},
                       {"max_length", gen_max_length}};
    manifest.seed = gen_seed;
    manifest.inputs = {{"corpus", gen_corpus},
                       {"vocab", gen_vocab},
                       {"model", gen_model},
                       {"scorer", gen_scorer}};
    manifest.outputs = {"candidates.jsonl"};
    write_manifest(gen_out, manifest);

    const LoadedCorpus loaded = load_inputs(gen_corpus, gen_vocab);
    const auto train =
        slice(loaded.pairs, 0, static_cast<std::size_t>(gen_split.train_size));
    const crl::SeqModel model =
        crl::model_from_checkpoint(crl::load_checkpoint(gen_model));
    const crl::SeqModel scorer =
        crl::model_from_checkpoint(crl::load_checkpoint(gen_scorer));

    crl::BeamConfig beam;
    beam.beam_width = gen_candidates;
    beam.num_groups = gen_groups == 0 ? gen_candidates : gen_groups;
    beam.diversity_strength = gen_diversity;
    beam.max_length = gen_max_length;
    beam.seed = gen_seed;

    const crl::CandidateSetMap sets = crl::generate_candidate_sets(
        model, train, beam, all_kinds(), scorer, loaded.vocab);
    crl::write_candidate_sets(gen_out / "candidates.jsonl", train, sets,
                              loaded.vocab);
    std::cout << "decoded candidates for " << sets.size() << " documents\n";
    return kExitOk;
  }

  if (ft_cmd->parsed()) {
    if (ft_scorer.empty()) ft_scorer = ft_base;
    ft_config.metric = crl::metric_from_string(ft_metric);

    RunManifest manifest;
    manifest.command = "finetune";
    manifest.config = {{"metric", crl::to_string(ft_config.metric)},
                       {"gamma", ft_config.crl.gamma},
                       {"lambda", ft_config.crl.lambda},
                       {"alpha", ft_config.crl.alpha},
                       {"lr", ft_config.learning_rate},
                       {"train_size", ft_split.train_size},
                       {"valid_size", ft_split.valid_size},
                       {"batch_size", ft_config.batch_size},
                       {"patience", ft_config.patience},
                       {"max_epochs", ft_config.max_epochs},
                       {"max_length", ft_config.max_decode_length},
                       {"dae_window", ft_config.dae_window}};
    manifest.seed = ft_config.seed;
    manifest.inputs = {{"corpus", ft_corpus},
                       {"vocab", ft_vocab},
                       {"base", ft_base},
                       {"candidates", ft_cands},
                       {"scorer", ft_scorer}};
    manifest.outputs = {"system.ckpt", "train_log.tsv", "ranked_sets.jsonl"};
    write_manifest(ft_out, manifest);

    const LoadedCorpus loaded = load_inputs(ft_corpus, ft_vocab);
    const auto train =
        slice(loaded.pairs, 0, static_cast<std::size_t>(ft_split.train_size));
    const auto valid = slice(loaded.pairs,
                             static_cast<std::size_t>(ft_split.train_size),
                             static_cast<std::size_t>(ft_split.valid_size));
    const crl::Checkpoint base_ckpt = crl::load_checkpoint(ft_base);
    crl::ModelConfig expected = base_ckpt.config;
    expected.vocab_size = loaded.vocab.size();
    crl::require_config(base_ckpt, expected);
    const crl::SeqModel base = crl::model_from_checkpoint(base_ckpt);
    const crl::SeqModel scorer =
        crl::model_from_checkpoint(crl::load_checkpoint(ft_scorer));
    const crl::CandidateSetMap sets = crl::read_candidate_sets(ft_cands);

    const crl::TrainedSystem system =
        crl::finetune(base, sets, train, valid, ft_config, scorer, loaded.vocab);
    crl::save_checkpoint(ft_out / "system.ckpt", system.checkpoint);
    crl::write_train_log(ft_out / "train_log.tsv", system.log);

    // Diagnostic ranking dump for the first few training examples.
    std::vector<crl::RankedCandidateSet> ranked;
    const std::size_t dump_count = std::min<std::size_t>(train.size(), 25);
    for (std::size_t e = 0; e < dump_count; ++e) {
      ranked.push_back(crl::rank_candidates(sets.at(train[e].id),
                                            ft_config.metric, train[e].id));
    }
    crl::write_ranked_dump(ft_out / "ranked_sets.jsonl", ranked, loaded.vocab);

    std::cout << system.name << ": best epoch " << system.best_epoch
              << ", validation " << crl::to_string(ft_config.metric) << " = "
              << system.validation_history[static_cast<std::size_t>(
                     system.best_epoch - 1)]
              << "\n";
    return kExitOk;
  }

  if (eval_cmd->parsed()) {
    RunManifest manifest;
    manifest.command = "evaluate";
    manifest.config = {{"train_size", eval_split.train_size},
                       {"valid_size", eval_split.valid_size},
                       {"test_size", eval_split.test_size},
                       {"system_name", eval_name},
                       {"beam_width", eval_beam},
                       {"max_length", eval_max_length},
                       {"dae_window", eval_dae_window}};
    manifest.inputs = {{"corpus", eval_corpus},
                       {"vocab", eval_vocab},
                       {"model", eval_model},
                       {"scorer", eval_scorer}};
    manifest.outputs = {"row.json"};
    write_manifest(eval_out, manifest);

    const LoadedCorpus loaded = load_inputs(eval_corpus, eval_vocab);
    const std::size_t from = static_cast<std::size_t>(eval_split.train_size) +
                             static_cast<std::size_t>(eval_split.valid_size);
    const std::size_t count =
        eval_split.test_size == 0
            ? loaded.pairs.size() - std::min(loaded.pairs.size(), from)
            : static_cast<std::size_t>(eval_split.test_size);
    const auto test = slice(loaded.pairs, from, count);
    if (test.empty()) throw crl::DataError("test slice is empty");

    const crl::SeqModel model =
        crl::model_from_checkpoint(crl::load_checkpoint(eval_model));
    const crl::SeqModel scorer =
        crl::model_from_checkpoint(crl::load_checkpoint(eval_scorer));
    const std::string name =
        eval_name.empty() ? eval_model.stem().string() : eval_name;
    const crl::SystemScores scores =
        crl::evaluate_system(name, model, test, scorer, loaded.vocab, eval_beam,
                             eval_max_length, eval_dae_window);

    json row;
    row["system"] = scores.row.system;
    row["r1"] = scores.row.r1;
    row["r2"] = scores.row.r2;
    row["rl"] = scores.row.rl;
    row["b"] = scores.row.b;
    row["d"] = scores.row.d;
    row["hallucination"] = scores.hallucination;
    row["count"] = test.size();
    std::ofstream out(eval_out / "row.json", std::ios::binary);
    out << row.dump(2) << '\n';
    std::cout << "evaluated " << name << " on " << test.size()
              << " examples\n";
    return kExitOk;
  }

  if (rep_cmd->parsed()) {
    if (rep_rows.empty() && rep_human.empty()) {
      std::cerr << "report: need --rows and/or --human\n";
      return kExitUsage;
    }
    RunManifest manifest;
    manifest.command = "report";
    manifest.config = {{"dataset", rep_dataset}};
    for (std::size_t i = 0; i < rep_rows.size(); ++i) {
      manifest.inputs.emplace("row" + std::to_string(i), rep_rows[i]);
    }
    if (!rep_human.empty()) manifest.inputs.emplace("human", rep_human);
    manifest.outputs = {"report.txt", "report.csv"};
    write_manifest(rep_out, manifest);

    std::vector<crl::HumanAggregate> human;
    if (!rep_human.empty()) {
      const auto records = crl::load_human_eval(rep_human);
      human = crl::aggregate_human_eval(records);
    }

    std::string text, csv;
    if (!rep_rows.empty()) {
      crl::EvalReport report;
      report.dataset = rep_dataset;
      for (const auto& row_path : rep_rows) {
        std::ifstream in(row_path);
        if (!in) throw crl::DataError("cannot open row file: " + row_path.string());
        json row = json::parse(in);
        crl::EvalRow eval_row;
        eval_row.system = row.at("system").get<std::string>();
        eval_row.r1 = row.at("r1").get<double>();
        eval_row.r2 = row.at("r2").get<double>();
        eval_row.rl = row.at("rl").get<double>();
        eval_row.b = row.at("b").get<double>();
        eval_row.d = row.at("d").get<double>();
        report.sample_count = row.at("count").get<int>();
        for (const auto& agg : human) {
          if (agg.system == eval_row.system) {
            eval_row.fac = agg.fac;
            eval_row.coh = agg.coh;
            eval_row.rel = agg.rel;
          }
        }
        report.rows.push_back(eval_row);
      }
      text = crl::render_report(report, crl::ReportStyle::Text);
      csv = crl::render_report(report, crl::ReportStyle::Delimited);
    } else {
      // Human-only aggregation table.
      std::ostringstream ts, cs;
      cs << "system,FAC,COH,REL\n";
      ts << rep_dataset << " human evaluation\n";
      char buf[160];
      for (const auto& agg : human) {
        std::snprintf(buf, sizeof(buf), "%-14s FAC %.2f  COH %.2f  REL %.2f\n",
                      agg.system.c_str(), agg.fac, agg.coh, agg.rel);
        ts << buf;
        std::snprintf(buf, sizeof(buf), "%s,%.2f,%.2f,%.2f\n",
                      agg.system.c_str(), agg.fac, agg.coh, agg.rel);
        cs << buf;
      }
      text = ts.str();
      csv = cs.str();
    }
    std::ofstream t(rep_out / "report.txt", std::ios::binary);
    t << text;
    std::ofstream c(rep_out / "report.csv", std::ios::binary);
    c << csv;
    std::cout << text;
    return kExitOk;
  }

  if (grad_cmd->parsed()) {
    const crl::GradCheckSetup setup =
        crl::make_gradcheck_setup(grad_hidden, grad_seed);
    crl::LossSpec spec;
    spec.batch = setup.batch;
    spec.candidate_sets = setup.candidate_sets;
    spec.metric = crl::MetricKind::RougeMean;
    spec.crl = setup.crl;
    const auto result =
        crl::check_loss_gradient(setup.model, spec, grad_step);
    std::printf("parameters: %zu\n", setup.model.param_count());
    std::printf("max relative gradient error: %.3e (slice %s)\n",
                result.max_rel_error, result.worst_slice.c_str());
    if (result.max_rel_error < 1e-3) {
      std::printf("gradient check passed (< 1e-3)\n");
      return kExitOk;
    }
    std::printf("gradient check FAILED (>= 1e-3)\n");
    return kExitNumeric;
  }

  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const crl::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const crl::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
