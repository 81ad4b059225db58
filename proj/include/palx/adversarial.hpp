#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "palx/dataset.hpp"
#include "palx/decode.hpp"
#include "palx/discriminator.hpp"
#include "palx/model.hpp"

namespace palx {

// Mean over samples and steps of log D(printed) + log(1 - D(handwritten)).
// The trainer ascends this; it is <= 0 by construction.
Tensor loss_discriminator(Discriminator& disc, const std::vector<Tensor>& printed,
                          const std::vector<Tensor>& handwritten);

// -mean log D(handwritten): small when handwritten features pass as printed.
Tensor loss_adversarial(Discriminator& disc, const std::vector<Tensor>& handwritten);

// Per-sample teacher-forced cross-entropies averaged over the batch.
Tensor loss_recognition(const std::vector<Tensor>& logits,
                        const std::vector<std::vector<int>>& targets);

// P_R = P_Ch + P_Cp + delta * P_Dadv.
Tensor loss_total(const Tensor& p_ch, const Tensor& p_cp, const Tensor& p_dadv, double delta);

struct TrainConfig {
  double delta = 0.1;
  int batch = 16;       // n pairs per iteration
  int disc_steps = 1;   // m discriminator updates per iteration
  int epochs = 60;
  int64_t max_iters = 0;  // 0 = epoch budget only
  double lr_r = 1e-3;
  double lr_d = 1e-3;
  uint64_t seed = 1;
  int patience = 10;    // epochs without val-exprate improvement before stopping
  int val_max_len = 64;
  int log_every = 1;
};

struct MetricsRow {
  int64_t iter = 0;
  int epoch = 0;
  double p_ch = 0, p_cp = 0, p_d = 0, p_dadv = 0, p_r = 0;
  double disc_acc = 0;
  double val_exprate = -1;  // -1 until the first validation pass
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  int64_t iters = 0;
  int epochs = 0;
  double final_train_exprate = -1;
  double final_val_exprate = -1;
};

// Alternating optimization: each iteration updates the recognizer on
// P_Ch + P_Cp + delta*P_Dadv, then takes disc_steps ascent steps on P_D
// against freshly computed, detached features. Metrics go to metrics_csv
// when non-empty. Early-stops when validation exprate stalls for `patience`
// epochs (validation runs at every epoch end when val data exists).
TrainResult train(Model& model, Discriminator& disc, const Dataset& data,
                  const Vocabulary& vocab, const TrainConfig& cfg,
                  const std::string& metrics_csv = "");

// Exact-match rate of greedy decodes over a sample set.
double greedy_exprate(Model& model, const Vocabulary& vocab,
                      const std::vector<PairedSample>& samples, int max_len);

}  // namespace palx
