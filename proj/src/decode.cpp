#include "palx/decode.hpp"

#include <algorithm>
#include <cmath>

#include "palx/errors.hpp"

namespace palx {

ModelScorer::ModelScorer(Model& model, const Image& im) : model_(model) {
  autograd::NoGradGuard guard;
  grid_ = model_.encoder.encode(im);
}

std::vector<double> ModelScorer::step(const std::vector<int>& prefix) {
  if (prefix.empty() || prefix.front() != Vocabulary::kBos)
    throw ContractError("decode prefix must start with BOS");
  autograd::NoGradGuard guard;
  Tensor logits = model_.decoder.forward(grid_, prefix).logits;
  int v = vocab();
  const double* row = logits.data() + static_cast<size_t>(logits.dim(0) - 1) * v;
  double mx = row[0];
  for (int i = 1; i < v; ++i) mx = std::max(mx, row[i]);
  double denom = 0.0;
  for (int i = 0; i < v; ++i) denom += std::exp(row[i] - mx);
  double log_denom = std::log(denom) + mx;
  std::vector<double> out(v);
  for (int i = 0; i < v; ++i) out[i] = row[i] - log_denom;
  return out;
}

DecodeResult greedy_decode(StepScorer& scorer, int max_len) {
  if (max_len < 1) throw ContractError("max_len must be >= 1");
  std::vector<int> prefix{Vocabulary::kBos};
  DecodeResult res;
  for (int step = 0; step < max_len; ++step) {
    std::vector<double> lp = scorer.step(prefix);
    int best = 0;
    for (int i = 1; i < static_cast<int>(lp.size()); ++i)
      if (lp[i] > lp[best]) best = i;
    res.score += lp[best];
    if (best == Vocabulary::kEos) return res;
    res.ids.push_back(best);
    prefix.push_back(best);
  }
  res.truncated = true;
  return res;
}

namespace {

struct Hypothesis {
  std::vector<int> ids;  // BOS-prefixed, EOS included once finished
  double score = 0.0;
  bool finished = false;
};

// Score-descending, then lexicographically ascending token order.
bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.ids < b.ids;
}

}  // namespace

DecodeResult beam_search(StepScorer& scorer, int beam_width, int max_len) {
  if (beam_width < 1) throw ContractError("beam width must be >= 1");
  if (max_len < 1) throw ContractError("max_len must be >= 1");
  int v = scorer.vocab();
  std::vector<Hypothesis> live{{{Vocabulary::kBos}, 0.0, false}};
  std::vector<Hypothesis> finished;

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    candidates.reserve(live.size() * v);
    for (const Hypothesis& hyp : live) {
      std::vector<double> lp = scorer.step(hyp.ids);
      for (int tok = 0; tok < v; ++tok) {
        Hypothesis next = hyp;
        next.ids.push_back(tok);
        next.score += lp[tok];
        next.finished = tok == Vocabulary::kEos;
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better);
    live.clear();
    for (const Hypothesis& c : candidates) {
      if (static_cast<int>(live.size()) >= beam_width) break;
      if (c.finished) {
        finished.push_back(c);
      } else {
        live.push_back(c);
      }
    }
    if (static_cast<int>(finished.size()) > beam_width) {
      std::sort(finished.begin(), finished.end(), better);
      finished.resize(beam_width);
    }
  }

  std::vector<Hypothesis> pool = finished;
  pool.insert(pool.end(), live.begin(), live.end());
  std::sort(pool.begin(), pool.end(), better);
  const Hypothesis& best = pool.front();

  DecodeResult res;
  res.score = best.score;
  res.truncated = !best.finished;
  for (size_t i = 1; i < best.ids.size(); ++i)
    if (best.ids[i] != Vocabulary::kEos) res.ids.push_back(best.ids[i]);
  return res;
}

double exprate(const std::vector<std::string>& predictions,
               const std::vector<std::string>& references) {
  if (predictions.size() != references.size())
    throw ContractError("exprate needs equally many predictions and references");
  if (predictions.empty()) throw ContractError("exprate over an empty set is undefined");
  size_t hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == references[i];
  return static_cast<double>(hits) / predictions.size();
}

}  // namespace palx
