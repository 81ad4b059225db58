#pragma once

#include <string>
#include <vector>

#include "palx/model.hpp"

namespace palx {

// Anything that can score the next token given a BOS-prefixed id sequence.
// Returned vector holds log-softmax values over the full vocabulary.
struct StepScorer {
  virtual ~StepScorer() = default;
  virtual int vocab() const = 0;
  virtual std::vector<double> step(const std::vector<int>& prefix) = 0;
};

// Scorer backed by a trained recognizer; encodes the image once.
class ModelScorer : public StepScorer {
 public:
  ModelScorer(Model& model, const Image& im);
  int vocab() const override { return model_.cfg.decoder.vocab; }
  std::vector<double> step(const std::vector<int>& prefix) override;

 private:
  Model& model_;
  FeatureGrid grid_;
};

struct DecodeResult {
  std::vector<int> ids;  // emitted tokens, BOS/EOS stripped
  double score = 0.0;    // sum of per-step log-probabilities, EOS included
  bool truncated = false;
};

// Argmax continuation until EOS or max_len; ties break toward the lowest id.
DecodeResult greedy_decode(StepScorer& scorer, int max_len);

// Width-B best-first search over raw log-probability sums. Finished
// hypotheses retire to a pool; candidates tie-break by lexicographically
// smaller token sequence. B=1 reproduces greedy_decode exactly.
DecodeResult beam_search(StepScorer& scorer, int beam_width, int max_len);

// Exact-match expression rate.
struct EvalRecord {
  std::string id, prediction, reference;
  bool exact_match = false;
};
struct EvalReport {
  double exprate = 0.0;
  std::vector<EvalRecord> records;
};

double exprate(const std::vector<std::string>& predictions,
               const std::vector<std::string>& references);

}  // namespace palx
