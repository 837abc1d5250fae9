#include "crl/decoding.hpp"

#include <algorithm>
#include <cmath>

#include "crl/errors.hpp"
#include "crl/vocab.hpp"

namespace crl {
namespace {

struct Hypothesis {
  TokenSeq tokens;
  std::vector<double> token_log_probs;
  double score = 0.0;           // penalty-free accumulated log-probability
  double penalized_score = 0.0; // selection key under diversity penalties
  std::vector<double> state;
};

// Token counts per position from earlier groups' returned candidates,
// including their end-marker position.
using PositionCounts = std::vector<std::map<TokenId, int>>;

double penalty_for(const PositionCounts& counts, std::size_t position,
                   TokenId token, double strength) {
  if (strength == 0.0 || position >= counts.size()) return 0.0;
  const auto& at = counts[position];
  const auto it = at.find(token);
  return it == at.end() ? 0.0 : strength * it->second;
}

std::vector<Candidate> decode_group(const SeqModel& model, const EncCache& enc,
                                    int width, int max_length,
                                    const PositionCounts& counts,
                                    double strength, int group_index) {
  const int v = model.config().vocab_size;
  const int h = model.config().hidden_size;

  std::vector<Hypothesis> beams(1);
  beams[0].state = model.decode_start(enc);

  std::vector<Hypothesis> completed;
  std::vector<double> logp(static_cast<std::size_t>(v));
  std::vector<double> next_state(static_cast<std::size_t>(h));

  struct Extension {
    int parent;
    TokenId token;
    double score;
    double penalized;
    double token_logp;
  };

  for (int step = 0; step < max_length && !beams.empty(); ++step) {
    // Score all single-token extensions of every live hypothesis.
    std::vector<std::vector<double>> parent_logp(beams.size());
    std::vector<std::vector<double>> parent_state(beams.size());
    for (std::size_t b = 0; b < beams.size(); ++b) {
      const TokenId prev =
          beams[b].tokens.empty() ? Vocabulary::kBos : beams[b].tokens.back();
      model.decode_step(enc, beams[b].state, prev, logp, next_state);
      parent_logp[b] = logp;
      parent_state[b] = next_state;
    }

    std::vector<Extension> extensions;
    extensions.reserve(beams.size() * static_cast<std::size_t>(v - 1));
    for (std::size_t b = 0; b < beams.size(); ++b) {
      for (TokenId tok = 0; tok < v; ++tok) {
        if (tok == Vocabulary::kBos) continue;
        const double lp = parent_logp[b][static_cast<std::size_t>(tok)];
        if (!std::isfinite(lp)) {
          throw NumericError("beam search: non-finite token score");
        }
        Extension ext;
        ext.parent = static_cast<int>(b);
        ext.token = tok;
        ext.token_logp = lp;
        ext.score = beams[b].score + lp;
        ext.penalized = beams[b].penalized_score + lp -
                        penalty_for(counts, static_cast<std::size_t>(step),
                                    tok, strength);
        extensions.push_back(ext);
      }
    }
    std::sort(extensions.begin(), extensions.end(),
              [](const Extension& a, const Extension& b) {
                if (a.penalized != b.penalized) return a.penalized > b.penalized;
                if (a.parent != b.parent) return a.parent < b.parent;
                return a.token < b.token;
              });

    std::vector<Hypothesis> next_beams;
    next_beams.reserve(static_cast<std::size_t>(width));
    for (const Extension& ext : extensions) {
      const Hypothesis& parent = beams[static_cast<std::size_t>(ext.parent)];
      if (ext.token == Vocabulary::kEos) {
        Hypothesis done = parent;
        done.score = ext.score;
        done.penalized_score = ext.penalized;
        completed.push_back(std::move(done));
        continue;
      }
      if (static_cast<int>(next_beams.size()) >= width) continue;
      Hypothesis hyp;
      hyp.tokens = parent.tokens;
      hyp.tokens.push_back(ext.token);
      hyp.token_log_probs = parent.token_log_probs;
      hyp.token_log_probs.push_back(ext.token_logp);
      hyp.score = ext.score;
      hyp.penalized_score = ext.penalized;
      hyp.state = parent_state[static_cast<std::size_t>(ext.parent)];
      next_beams.push_back(std::move(hyp));
    }
    beams = std::move(next_beams);
  }

  // Hypotheses alive at max_length complete as-is.
  for (auto& hyp : beams) completed.push_back(std::move(hyp));

  // The cut to `width` candidates respects the diversity penalties; the
  // surviving candidates are then presented in penalty-free score order.
  std::sort(completed.begin(), completed.end(),
            [](const Hypothesis& a, const Hypothesis& b) {
              if (a.penalized_score != b.penalized_score) {
                return a.penalized_score > b.penalized_score;
              }
              if (a.tokens.size() != b.tokens.size()) {
                return a.tokens.size() < b.tokens.size();
              }
              return a.tokens < b.tokens;
            });
  if (static_cast<int>(completed.size()) > width) {
    completed.resize(static_cast<std::size_t>(width));
  }
  std::sort(completed.begin(), completed.end(),
            [](const Hypothesis& a, const Hypothesis& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.tokens.size() != b.tokens.size()) {
                return a.tokens.size() < b.tokens.size();
              }
              return a.tokens < b.tokens;
            });

  std::vector<Candidate> out;
  out.reserve(completed.size());
  for (auto& hyp : completed) {
    Candidate cand;
    cand.tokens = std::move(hyp.tokens);
    cand.token_log_probs = std::move(hyp.token_log_probs);
    cand.total_log_prob = hyp.score;
    cand.group = group_index;
    out.push_back(std::move(cand));
  }
  return out;
}

void validate(const BeamConfig& config) {
  if (config.beam_width < 1) throw DataError("beam_width must be >= 1");
  if (config.max_length < 1) throw DataError("max_length must be >= 1");
  if (config.num_groups < 1) throw DataError("num_groups must be >= 1");
  if (config.diversity_strength < 0.0) {
    throw DataError("diversity_strength must be >= 0");
  }
  if (config.beam_width % config.num_groups != 0) {
    throw DataError("beam_width must divide into num_groups equal groups");
  }
}

}  // namespace

std::vector<Candidate> beam_search(const SeqModel& model,
                                   const TokenSeq& document,
                                   const BeamConfig& config) {
  BeamConfig single = config;
  single.num_groups = 1;
  validate(single);
  const EncCache enc = model.encode(document);
  return decode_group(model, enc, single.beam_width, single.max_length, {},
                      0.0, 0);
}

std::vector<Candidate> diverse_beam_search(const SeqModel& model,
                                           const TokenSeq& document,
                                           const BeamConfig& config) {
  validate(config);
  const EncCache enc = model.encode(document);
  const int group_width = config.beam_width / config.num_groups;

  PositionCounts counts(static_cast<std::size_t>(config.max_length + 1));
  std::vector<Candidate> out;
  for (int g = 0; g < config.num_groups; ++g) {
    std::vector<Candidate> group =
        decode_group(model, enc, group_width, config.max_length, counts,
                     config.diversity_strength, g);
    for (const Candidate& cand : group) {
      for (std::size_t t = 0; t < cand.tokens.size(); ++t) {
        counts[t][cand.tokens[t]] += 1;
      }
      // The end marker occupies the position after the surface tokens when
      // the candidate stopped before max_length.
      if (static_cast<int>(cand.tokens.size()) < config.max_length) {
        counts[cand.tokens.size()][Vocabulary::kEos] += 1;
      }
    }
    out.insert(out.end(), std::make_move_iterator(group.begin()),
               std::make_move_iterator(group.end()));
  }
  return out;
}

}  // namespace crl
