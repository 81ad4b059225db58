#include "palx/adversarial.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <span>

#include "palx/errors.hpp"
#include "palx/optim.hpp"

namespace palx {

Tensor loss_discriminator(Discriminator& disc, const std::vector<Tensor>& printed,
                          const std::vector<Tensor>& handwritten) {
  if (printed.empty() || printed.size() != handwritten.size())
    throw ContractError("discriminator loss needs equally many printed and handwritten "
                        "feature sequences");
  std::vector<Tensor> terms;
  terms.reserve(printed.size());
  for (size_t i = 0; i < printed.size(); ++i) {
    Tensor sp = disc.score_rows(printed[i]);
    Tensor sh = disc.score_rows(handwritten[i]);
    terms.push_back(mean(log_sigmoid(sp)) + mean(log_sigmoid(sh * -1.0)));
  }
  return add_n(terms) * (1.0 / static_cast<double>(terms.size()));
}

Tensor loss_adversarial(Discriminator& disc, const std::vector<Tensor>& handwritten) {
  if (handwritten.empty()) throw ContractError("adversarial loss needs at least one sample");
  std::vector<Tensor> terms;
  terms.reserve(handwritten.size());
  for (const Tensor& h : handwritten) terms.push_back(mean(log_sigmoid(disc.score_rows(h))));
  return add_n(terms) * (-1.0 / static_cast<double>(terms.size()));
}

Tensor loss_recognition(const std::vector<Tensor>& logits,
                        const std::vector<std::vector<int>>& targets) {
  if (logits.empty() || logits.size() != targets.size())
    throw ContractError("recognition loss needs matching logits and target sequences");
  std::vector<Tensor> terms;
  terms.reserve(logits.size());
  for (size_t i = 0; i < logits.size(); ++i)
    terms.push_back(cross_entropy(logits[i], targets[i]));
  return add_n(terms) * (1.0 / static_cast<double>(terms.size()));
}

Tensor loss_total(const Tensor& p_ch, const Tensor& p_cp, const Tensor& p_dadv, double delta) {
  if (delta < 0.0) throw ConfigError("delta must be nonnegative, got " + std::to_string(delta));
  if (p_ch.size() != 1 || p_cp.size() != 1 || p_dadv.size() != 1)
    throw ContractError("loss terms must be scalars");
  return p_ch + p_cp + p_dadv * delta;
}

double greedy_exprate(Model& model, const Vocabulary& vocab,
                      const std::vector<PairedSample>& samples, int max_len) {
  std::vector<std::string> preds, refs;
  preds.reserve(samples.size());
  refs.reserve(samples.size());
  for (const PairedSample& s : samples) {
    ModelScorer scorer(model, s.handwritten);
    preds.push_back(vocab.decode(greedy_decode(scorer, max_len).ids));
    refs.push_back(s.label);
  }
  return exprate(preds, refs);
}

namespace {

// sigma(z) > 0.5 exactly when z > 0; accuracy over both branches and steps.
double batch_disc_accuracy(Discriminator& disc, const std::vector<Tensor>& printed,
                           const std::vector<Tensor>& handwritten) {
  autograd::NoGradGuard guard;
  int64_t correct = 0, total = 0;
  for (size_t i = 0; i < printed.size(); ++i) {
    Tensor sp = disc.score_rows(printed[i]);
    Tensor sh = disc.score_rows(handwritten[i]);
    for (int64_t j = 0; j < sp.size(); ++j) correct += sp.data()[j] > 0.0;
    for (int64_t j = 0; j < sh.size(); ++j) correct += sh.data()[j] < 0.0;
    total += sp.size() + sh.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

void require_finite(double v, const char* term, int64_t iter) {
  if (!std::isfinite(v))
    throw NumericError(std::string(term) + " is not finite at iteration " +
                       std::to_string(iter));
}

}  // namespace

TrainResult train(Model& model, Discriminator& disc, const Dataset& data,
                  const Vocabulary& vocab, const TrainConfig& cfg,
                  const std::string& metrics_csv) {
  if (data.train.empty()) throw ContractError("training set is empty");
  if (cfg.batch < 1 || cfg.disc_steps < 1) throw ConfigError("batch and disc_steps must be >= 1");
  if (static_cast<size_t>(cfg.batch) > data.train.size())
    throw ContractError("batch size " + std::to_string(cfg.batch) +
                        " exceeds training set size " + std::to_string(data.train.size()));
  if (cfg.delta < 0.0) throw ConfigError("delta must be nonnegative");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");

  Adam adam_r(cfg.lr_r);
  for (auto& [name, t] : model.named_params()) adam_r.add_param(t);
  Adam adam_d(cfg.lr_d);
  for (auto& [name, t] : disc.named_params()) adam_d.add_param(t);

  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);  // decoupled from init draws

  std::ofstream csv;
  if (!metrics_csv.empty()) {
    csv.open(metrics_csv, std::ios::trunc);
    if (!csv) throw DataError("cannot open metrics file '" + metrics_csv + "'");
    csv << "iter,epoch,P_Ch,P_Cp,P_D,P_Dadv,P_R,disc_acc,val_exprate\n";
  }

  TrainResult result;
  std::vector<size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  int64_t iter = 0;
  double last_val = -1.0;
  double best_val = -1.0;
  int stale_epochs = 0;
  bool stop = false;
  double inv_n = 1.0 / cfg.batch;

  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    rng.shuffle(std::span<size_t>(order));
    size_t batches = data.train.size() / cfg.batch;
    for (size_t b = 0; b < batches && !stop; ++b, ++iter) {
      // --- recognizer step: accumulate per-pair gradients of P_R/n ---------
      double p_ch = 0, p_cp = 0, p_dadv = 0;
      for (int k = 0; k < cfg.batch; ++k) {
        const PairedSample& s = data.train[order[b * cfg.batch + k]];
        TeacherBatch tb = teacher_forcing(s.ids);
        FeatureGrid grid_h = model.encoder.encode(s.handwritten, true);
        DecoderOut out_h = model.decoder.forward(grid_h, tb.inputs, true, &rng);
        Tensor ce_h = cross_entropy(out_h.logits, tb.targets);
        FeatureGrid grid_p = model.encoder.encode(s.printed, true);
        DecoderOut out_p = model.decoder.forward(grid_p, tb.inputs, true, &rng);
        Tensor ce_p = cross_entropy(out_p.logits, tb.targets);
        Tensor adv = mean(log_sigmoid(disc.score_rows(out_h.features))) * -1.0;
        Tensor sample_loss = loss_total(ce_h, ce_p, adv, cfg.delta) * inv_n;
        sample_loss.backward();
        p_ch += ce_h.item() * inv_n;
        p_cp += ce_p.item() * inv_n;
        p_dadv += adv.item() * inv_n;
      }
      require_finite(p_ch, "P_Ch", iter);
      require_finite(p_cp, "P_Cp", iter);
      require_finite(p_dadv, "P_Dadv", iter);
      adam_r.step();
      adam_r.zero_grad();
      adam_d.zero_grad();  // P_Dadv deposits gradients there; never applied

      // --- discriminator steps on fresh post-update features ---------------
      std::vector<Tensor> feats_p, feats_h;
      feats_p.reserve(cfg.batch);
      feats_h.reserve(cfg.batch);
      {
        autograd::NoGradGuard guard;
        for (int k = 0; k < cfg.batch; ++k) {
          const PairedSample& s = data.train[order[b * cfg.batch + k]];
          TeacherBatch tb = teacher_forcing(s.ids);
          feats_h.push_back(
              model.decoder.forward(model.encoder.encode(s.handwritten), tb.inputs).features);
          feats_p.push_back(
              model.decoder.forward(model.encoder.encode(s.printed), tb.inputs).features);
        }
      }
      double disc_acc = batch_disc_accuracy(disc, feats_p, feats_h);
      double p_d = 0;
      for (int s = 0; s < cfg.disc_steps; ++s) {
        Tensor pd = loss_discriminator(disc, feats_p, feats_h);
        if (s == 0) p_d = pd.item();
        Tensor d_loss = pd * -1.0;
        d_loss.backward();
        adam_d.step();
        adam_d.zero_grad();
      }
      require_finite(p_d, "P_D", iter);

      MetricsRow row;
      row.iter = iter;
      row.epoch = epoch;
      row.p_ch = p_ch;
      row.p_cp = p_cp;
      row.p_d = p_d;
      row.p_dadv = p_dadv;
      row.p_r = p_ch + p_cp + cfg.delta * p_dadv;
      row.disc_acc = disc_acc;
      row.val_exprate = last_val;
      result.metrics.push_back(row);
      if (csv.is_open() && (iter % cfg.log_every == 0 || b + 1 == batches)) {
        csv << row.iter << ',' << row.epoch << ',' << row.p_ch << ',' << row.p_cp << ','
            << row.p_d << ',' << row.p_dadv << ',' << row.p_r << ',' << row.disc_acc << ','
            << row.val_exprate << '\n';
        csv.flush();  // keep the file tailable during long runs
      }
      if (cfg.max_iters > 0 && iter + 1 >= cfg.max_iters) stop = true;
    }
    result.epochs = epoch + 1;

    if (!data.val.empty()) {
      last_val = greedy_exprate(model, vocab, data.val, cfg.val_max_len);
      if (last_val > best_val + 1e-12) {
        best_val = last_val;
        stale_epochs = 0;
      } else if (++stale_epochs >= cfg.patience && cfg.patience > 0) {
        stop = true;
      }
    }
  }

  result.iters = iter;
  result.final_val_exprate = last_val;
  result.final_train_exprate = greedy_exprate(model, vocab, data.train, cfg.val_max_len);
  if (csv.is_open()) csv.flush();
  return result;
}

}  // namespace palx
