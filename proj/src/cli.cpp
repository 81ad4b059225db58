#include "palx/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "palx/adversarial.hpp"
#include "palx/config.hpp"
#include "palx/decode.hpp"
#include "palx/errors.hpp"
#include "palx/glyphs.hpp"
#include "palx/synth.hpp"

namespace palx {

namespace {

void cmd_synth(int count, int val_count, int depth, uint64_t seed, const std::string& out,
               int height, int width) {
  std::vector<PairedSample> samples = synth_generate(depth, count + val_count, seed, height, width);
  write_dataset(out, samples, count);
  std::printf("wrote %d train + %d val samples to %s\n", count, val_count, out.c_str());
}

void cmd_train(const std::string& data_dir, bool synthetic, const std::string& config_path,
               const std::string& out, std::string metrics_path) {
  RunConfig rc = load_run_config(config_path);
  Vocabulary vocab;
  Dataset ds;
  if (synthetic) {
    vocab = synth_vocabulary();
    std::vector<PairedSample> samples =
        synth_generate(rc.synth.depth, rc.synth.count + rc.synth.val_count, rc.synth.seed);
    ds.train.assign(samples.begin(), samples.begin() + rc.synth.count);
    ds.val.assign(samples.begin() + rc.synth.count, samples.end());
  } else {
    vocab = Vocabulary::from_labels(read_manifest_labels(data_dir));
    ds = load_dataset(data_dir, vocab);
  }
  rc.model.decoder.vocab = vocab.size();
  if (metrics_path.empty()) metrics_path = out + ".metrics.csv";

  Rng rng(rc.train.seed);
  Model model(rc.model, rng);
  Discriminator disc(rc.disc, rng);
  TrainResult res = train(model, disc, ds, vocab, rc.train, metrics_path);
  save_model(out, model, vocab, &disc);
  std::printf("trained %lld iterations over %d epochs\n",
              static_cast<long long>(res.iters), res.epochs);
  std::printf("train exprate %.4f", res.final_train_exprate);
  if (res.final_val_exprate >= 0) std::printf(", val exprate %.4f", res.final_val_exprate);
  std::printf("\ncheckpoint %s\nmetrics %s\n", out.c_str(), metrics_path.c_str());
}

void cmd_eval(const std::string& ckpt, const std::string& data_dir, int beam, int max_len,
              const std::string& report_path) {
  LoadedModel lm = load_model(ckpt);
  Dataset ds = load_dataset(data_dir, lm.vocab);
  std::vector<PairedSample> samples = ds.train;
  samples.insert(samples.end(), ds.val.begin(), ds.val.end());
  if (samples.empty()) throw DataError("dataset '" + data_dir + "' holds no samples");

  EvalReport report;
  size_t hits = 0;
  for (const PairedSample& s : samples) {
    ModelScorer scorer(*lm.model, s.handwritten);
    DecodeResult dr = beam_search(scorer, beam, max_len);
    EvalRecord rec;
    rec.id = s.id;
    rec.prediction = lm.vocab.decode(dr.ids);
    rec.reference = s.label;
    rec.exact_match = rec.prediction == rec.reference;
    hits += rec.exact_match;
    report.records.push_back(std::move(rec));
  }
  report.exprate = static_cast<double>(hits) / samples.size();

  std::ofstream csv(report_path, std::ios::trunc);
  if (!csv) throw DataError("cannot open report file '" + report_path + "'");
  csv << "id,prediction,reference,exact_match\n";
  for (const EvalRecord& rec : report.records)
    csv << csv_field(rec.id) << ',' << csv_field(rec.prediction) << ','
        << csv_field(rec.reference) << ',' << (rec.exact_match ? 1 : 0) << '\n';
  std::printf("exprate %.4f (%zu/%zu)\nreport %s\n", report.exprate, hits, samples.size(),
              report_path.c_str());
}

void cmd_predict(const std::string& ckpt, const std::string& image_path, int beam,
                 int max_len) {
  LoadedModel lm = load_model(ckpt);
  Image im = read_pgm(image_path);
  ModelScorer scorer(*lm.model, im);
  DecodeResult dr = beam_search(scorer, beam, max_len);
  if (dr.truncated) std::fprintf(stderr, "note: prediction hit the %d-token budget\n", max_len);
  std::printf("%s\n", lm.vocab.decode(dr.ids).c_str());
}

void cmd_render(const std::string& label, const std::string& out, int height, int width) {
  write_pgm(out, render_printed(label, height, width));
  std::printf("wrote %s\n", out.c_str());
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"paired-adversarial handwritten math expression recognizer", "hmer"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a paired synthetic dataset");
  int s_count = 300, s_val = 0, s_depth = 2, s_height = 64, s_width = 256;
  uint64_t s_seed = 7;
  std::string s_out;
  synth->add_option("--count", s_count, "training samples");
  synth->add_option("--val-count", s_val, "validation samples");
  synth->add_option("--depth", s_depth, "expression nesting depth");
  synth->add_option("--seed", s_seed, "generator seed");
  synth->add_option("--out", s_out, "output directory")->required();
  synth->add_option("--height", s_height, "image height");
  synth->add_option("--width", s_width, "image width");

  auto* tr = app.add_subcommand("train", "train a recognizer");
  std::string t_data, t_config, t_out, t_metrics;
  bool t_synth = false;
  tr->add_option("--data", t_data, "dataset directory");
  tr->add_flag("--synthetic", t_synth, "train on an in-memory synthetic corpus");
  tr->add_option("--config", t_config, "key=value config file")->required();
  tr->add_option("--out", t_out, "checkpoint path")->required();
  tr->add_option("--metrics", t_metrics, "metrics CSV path (default <out>.metrics.csv)");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string e_ckpt, e_data, e_report = "eval_report.csv";
  int e_beam = 10, e_max_len = 64;
  ev->add_option("--ckpt", e_ckpt, "checkpoint path")->required();
  ev->add_option("--data", e_data, "dataset directory")->required();
  ev->add_option("--beam", e_beam, "beam width");
  ev->add_option("--max-len", e_max_len, "decoding budget");
  ev->add_option("--report", e_report, "per-sample CSV path");

  auto* pr = app.add_subcommand("predict", "decode one PGM image");
  std::string p_ckpt, p_image;
  int p_beam = 10, p_max_len = 64;
  pr->add_option("--ckpt", p_ckpt, "checkpoint path")->required();
  pr->add_option("--image", p_image, "input PGM")->required();
  pr->add_option("--beam", p_beam, "beam width");
  pr->add_option("--max-len", p_max_len, "decoding budget");

  auto* re = app.add_subcommand("render", "render a LaTeX label to a printed-template PGM");
  std::string r_label, r_out;
  int r_height = 64, r_width = 256;
  re->add_option("--label", r_label, "LaTeX token string")->required();
  re->add_option("--out", r_out, "output PGM path")->required();
  re->add_option("--height", r_height, "image height");
  re->add_option("--width", r_width, "image width");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      cmd_synth(s_count, s_val, s_depth, s_seed, s_out, s_height, s_width);
    } else if (tr->parsed()) {
      if (t_synth == !t_data.empty()) {
        std::fprintf(stderr, "train needs exactly one of --data DIR or --synthetic\n");
        return 1;
      }
      cmd_train(t_data, t_synth, t_config, t_out, t_metrics);
    } else if (ev->parsed()) {
      cmd_eval(e_ckpt, e_data, e_beam, e_max_len, e_report);
    } else if (pr->parsed()) {
      cmd_predict(p_ckpt, p_image, p_beam, p_max_len);
    } else if (re->parsed()) {
      cmd_render(r_label, r_out, r_height, r_width);
    }
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const TokenError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IndexError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const DimensionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {  // config, contract, state
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace palx
