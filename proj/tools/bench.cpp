// Benchmark of the OpenMP kernels against the serial reference path, over
// the three data-parallel workloads: batch gradients, candidate decoding,
// and test-set evaluation. Both paths produce bit-identical results; this
// reports the speedup.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "crl/corpus.hpp"
#include "crl/evaluator.hpp"
#include "crl/loss.hpp"
#include "crl/parallel.hpp"
#include "crl/trainer.hpp"

using namespace crl;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

struct Workload {
  std::string name;
  std::function<double()> run;  // returns a result digest for verification
};

void run_all(const std::vector<Workload>& workloads, int repeats) {
  std::printf("%-24s %12s %12s %9s  %s\n", "workload", "serial(ms)",
              "openmp(ms)", "speedup", "match");
  for (const auto& w : workloads) {
    par::enabled() = false;
    double serial_ms = 1e300;
    double serial_digest = 0.0;
    for (int r = 0; r < repeats; ++r) {
      const auto t0 = Clock::now();
      serial_digest = w.run();
      serial_ms = std::min(serial_ms, ms_since(t0));
    }
    par::enabled() = true;
    double omp_ms = 1e300;
    double omp_digest = 0.0;
    for (int r = 0; r < repeats; ++r) {
      const auto t0 = Clock::now();
      omp_digest = w.run();
      omp_ms = std::min(omp_ms, ms_since(t0));
    }
    std::printf("%-24s %12.1f %12.1f %8.2fx  %s\n", w.name.c_str(), serial_ms,
                omp_ms, serial_ms / omp_ms,
                serial_digest == omp_digest ? "bit-exact" : "MISMATCH");
  }
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--quick") == 0) quick = true;
  }
  const int n_docs = quick ? 24 : 200;
  const int repeats = quick ? 1 : 3;

  SynthConfig synth;
  synth.num_examples = n_docs;
  synth.facts_per_doc = 4;
  synth.vocab_size = 50;
  synth.seed = 1;
  const SynthCorpus corpus = generate_synthetic(synth);

  ModelConfig config;
  config.vocab_size = corpus.vocab.size();
  config.hidden_size = 48;
  config.context_window = 64;
  const SeqModel model = pretrain_base(corpus.pairs, quick ? 2 : 4, 2e-3, 1,
                                       config, 8);

  BeamConfig beam;
  beam.beam_width = 8;
  beam.num_groups = 8;
  beam.max_length = 16;
  beam.diversity_strength = 1.0;
  const CandidateSetMap sets = generate_candidate_sets(
      model, corpus.pairs, beam,
      {MetricKind::RougeMean, MetricKind::BartLike, MetricKind::DaeLike},
      model, corpus.vocab);

  std::vector<Workload> workloads;

  workloads.push_back({"batch_gradient", [&]() {
    const std::size_t batch_size = 8;
    std::vector<ExamplePair> batch(corpus.pairs.begin(),
                                   corpus.pairs.begin() + batch_size);
    std::vector<std::vector<Candidate>> cands;
    for (const auto& pair : batch) cands.push_back(sets.at(pair.id));
    LossSpec spec;
    spec.batch = batch;
    spec.candidate_sets = cands;
    spec.metric = MetricKind::RougeMean;
    const auto grad = loss_gradient(model, spec);
    double digest = 0.0;
    for (double g : grad) digest += g;
    return digest;
  }});

  workloads.push_back({"candidate_generation", [&]() {
    const auto out = generate_candidate_sets(
        model, corpus.pairs, beam, {MetricKind::RougeMean}, model,
        corpus.vocab);
    double digest = 0.0;
    for (const auto& [id, cands] : out) {
      for (const auto& c : cands) digest += c.total_log_prob;
    }
    return digest;
  }});

  workloads.push_back({"test_evaluation", [&]() {
    const auto scores = evaluate_system("bench", model, corpus.pairs, model,
                                        corpus.vocab, 4, 16, 10);
    return scores.row.r1 + scores.row.b + scores.row.d;
  }});

  std::printf("documents: %d, hidden: %d, threads: %d\n", n_docs,
              config.hidden_size, par::max_threads());
  run_all(workloads, repeats);
  return 0;
}
