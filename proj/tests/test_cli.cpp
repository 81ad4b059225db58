// Config parsing, checkpoint round-trips, and the in-process CLI surface.

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "palx/cli.hpp"
#include "palx/config.hpp"
#include "palx/decode.hpp"
#include "palx/errors.hpp"
#include "palx/model.hpp"
#include "palx/synth.hpp"
#include "test_support.hpp"

using namespace palx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out << content;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string s(const std::string& child = "") const { return (path / child).string(); }
};

const char* kTinyConfig =
    "seed = 5\n"
    "epochs = 1\n"
    "max_iters = 2\n"
    "batch = 2\n"
    "delta = 0.1\n"
    "in_h = 16\n"
    "in_w = 32\n"
    "stem_channels = 4\n"
    "block_layers = 2\n"
    "growth = 3\n"
    "d_model = 8\n"
    "num_heads = 2\n"
    "num_layers = 1\n"
    "d_ff = 16\n"
    "dropout = 0.0\n"
    "disc_hidden = 6\n";

}  // namespace

TEST_CASE("empty config text yields the documented defaults") {
  RunConfig cfg = parse_run_config("");
  CHECK(cfg.train.delta == 0.1);
  CHECK(cfg.train.batch == 16);
  CHECK(cfg.train.disc_steps == 1);
  CHECK(cfg.model.encoder.d_model == 64);
  CHECK(cfg.model.decoder.d_model == 64);
  CHECK(cfg.disc.in_dim == 64);
  CHECK(cfg.synth.count == 300);
  CHECK(cfg.synth.val_count == 60);
  CHECK(cfg.synth.depth == 2);
  CHECK(cfg.synth.seed == 7);
}

TEST_CASE("config keys reach their fields and d_model stays synchronized") {
  RunConfig cfg = parse_run_config(
      "# a comment line\n"
      "\n"
      "d_model = 32   # trailing comment\n"
      "in_h=48\n"
      "  lr_r = 2e-4\n"
      "delta = 0.25\n"
      "max_iters = 123456789012\n"
      "disc_layers = 3\n"
      "synth_seed = 99\n");
  CHECK(cfg.model.encoder.d_model == 32);
  CHECK(cfg.model.decoder.d_model == 32);
  CHECK(cfg.disc.in_dim == 32);
  CHECK(cfg.model.encoder.in_h == 48);
  CHECK(cfg.train.lr_r == 2e-4);
  CHECK(cfg.train.delta == 0.25);
  CHECK(cfg.train.max_iters == 123456789012LL);
  CHECK(cfg.disc.layers == 3);
  CHECK(cfg.synth.seed == 99);
}

TEST_CASE("config parser reports the offending line") {
  try {
    parse_run_config("batch = 4\nnot_a_key = 9\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("not_a_key") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config("just some words\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("= 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("batch = soon\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("lr_r = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("batch = 4x\n"), ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/path.cfg"), DataError);
}

TEST_CASE("checkpoint round-trip preserves configuration, vocabulary and behavior") {
  TempDir dir("palx_ckpt_test");
  Vocabulary vocab = synth_vocabulary();

  ModelConfig mc;
  mc.encoder = EncoderConfig{16, 32, 4, 3, 2, 3, 8};
  mc.decoder = DecoderConfig{vocab.size(), 8, 1, 2, 16, 0.25};
  Rng rng(17);
  Model model(mc, rng);
  Discriminator disc(DiscriminatorConfig{8, 6, 3}, rng);

  // exercise training-mode batch norm so running stats are nontrivial
  std::vector<PairedSample> samples = synth_generate(1, 1, 18, 16, 32);
  model.encoder.encode(samples[0].handwritten, true);

  std::string path = dir.s("model.bin");
  save_model(path, model, vocab, &disc);
  LoadedModel lm = load_model(path);

  CHECK(lm.cfg.encoder.in_h == 16);
  CHECK(lm.cfg.encoder.in_w == 32);
  CHECK(lm.cfg.encoder.stem_channels == 4);
  CHECK(lm.cfg.encoder.block_layers == 2);
  CHECK(lm.cfg.encoder.growth == 3);
  CHECK(lm.cfg.decoder.d_model == 8);
  CHECK(lm.cfg.decoder.num_heads == 2);
  CHECK(lm.cfg.decoder.num_layers == 1);
  CHECK(lm.cfg.decoder.d_ff == 16);
  CHECK(lm.cfg.decoder.dropout == 0.25);
  CHECK(lm.cfg.decoder.vocab == vocab.size());
  REQUIRE(lm.disc != nullptr);
  CHECK(lm.disc->config().hidden == 6);
  CHECK(lm.disc->config().layers == 3);

  CHECK(lm.vocab.size() == vocab.size());
  CHECK(lm.vocab.ordered_tokens() == vocab.ordered_tokens());

  // bit-exact: saving the loaded model reproduces the file
  std::string again = dir.s("again.bin");
  save_model(again, *lm.model, lm.vocab, lm.disc.get());
  CHECK(slurp(path) == slurp(again));

  // behavioral parity on a fresh decode
  ModelScorer a(model, samples[0].handwritten), b(*lm.model, samples[0].handwritten);
  DecodeResult ra = greedy_decode(a, 6), rb = greedy_decode(b, 6);
  CHECK(ra.ids == rb.ids);
  CHECK(ra.score == rb.score);
}

TEST_CASE("checkpoints without a discriminator load with a null slot") {
  TempDir dir("palx_ckpt_nodisc");
  Vocabulary vocab = Vocabulary::from_labels({"x + 1", "y - 2"});
  ModelConfig mc;
  mc.encoder = EncoderConfig{16, 32, 4, 3, 2, 3, 8};
  mc.decoder = DecoderConfig{vocab.size(), 8, 1, 2, 16, 0.0};
  Rng rng(19);
  Model model(mc, rng);
  std::string path = dir.s("bare.bin");
  save_model(path, model, vocab);
  LoadedModel lm = load_model(path);
  CHECK(lm.disc == nullptr);
  CHECK(lm.vocab.size() == vocab.size());
}

TEST_CASE("loading a non-checkpoint file fails cleanly") {
  TempDir dir("palx_ckpt_bad");
  spit(dir.path / "junk.bin", "this is not a checkpoint at all");
  CHECK_THROWS_AS(load_model(dir.s("junk.bin")), ParseError);
  CHECK_THROWS_AS(load_model(dir.s("missing.bin")), DataError);
}

TEST_CASE("vocabulary size must match the decoder before saving") {
  Vocabulary vocab = Vocabulary::from_labels({"x + 1"});
  ModelConfig mc;
  mc.encoder = EncoderConfig{16, 32, 4, 3, 2, 3, 8};
  mc.decoder = DecoderConfig{vocab.size() + 3, 8, 1, 2, 16, 0.0};
  Rng rng(20);
  Model model(mc, rng);
  CHECK_THROWS_AS(save_model("/tmp/never_written.bin", model, vocab), ContractError);
}

TEST_CASE("cli rejects usage errors with exit code 1") {
  CHECK(run_cli({}) == 1);
  CHECK(run_cli({"frobnicate"}) == 1);
  CHECK(run_cli({"synth", "--no-such-flag"}) == 1);
  CHECK(run_cli({"synth"}) == 1);  // missing required --out
  CHECK(run_cli({"--help"}) == 0);
}

TEST_CASE("cli synth is byte-reproducible across runs") {
  TempDir dir("palx_cli_synth");
  CHECK(run_cli({"synth", "--count", "5", "--val-count", "2", "--depth", "2", "--seed", "7",
                 "--out", dir.s("a")}) == 0);
  CHECK(run_cli({"synth", "--count", "5", "--val-count", "2", "--depth", "2", "--seed", "7",
                 "--out", dir.s("b")}) == 0);

  std::vector<fs::path> names;
  for (const auto& entry : fs::directory_iterator(dir.s("a")))
    names.push_back(entry.path().filename());
  REQUIRE(names.size() == 15);  // 7 pairs + manifest
  for (const fs::path& name : names)
    CHECK(slurp(dir.path / "a" / name) == slurp(dir.path / "b" / name));

  // a different seed must change the corpus
  CHECK(run_cli({"synth", "--count", "5", "--val-count", "2", "--depth", "2", "--seed", "8",
                 "--out", dir.s("c")}) == 0);
  bool any_differ = false;
  for (const fs::path& name : names)
    if (slurp(dir.path / "a" / name) != slurp(dir.path / "c" / name)) any_differ = true;
  CHECK(any_differ);
}

TEST_CASE("cli pipeline: synth, train, eval, render, predict") {
  TempDir dir("palx_cli_pipeline");
  spit(dir.path / "tiny.cfg", kTinyConfig);
  REQUIRE(run_cli({"synth", "--count", "4", "--val-count", "2", "--depth", "1", "--seed", "3",
                   "--out", dir.s("data"), "--height", "16", "--width", "32"}) == 0);
  REQUIRE(run_cli({"train", "--data", dir.s("data"), "--config", dir.s("tiny.cfg"), "--out",
                   dir.s("model.bin")}) == 0);
  CHECK(fs::exists(dir.path / "model.bin"));
  CHECK(fs::exists(dir.path / "model.bin.metrics.csv"));

  CHECK(run_cli({"eval", "--ckpt", dir.s("model.bin"), "--data", dir.s("data"), "--beam", "2",
                 "--max-len", "6", "--report", dir.s("report.csv")}) == 0);
  std::string report = slurp(dir.path / "report.csv");
  CHECK(report.rfind("id,prediction,reference,exact_match\n", 0) == 0);

  CHECK(run_cli({"render", "--label", "x + 1", "--out", dir.s("label.pgm"), "--height", "16",
                 "--width", "32"}) == 0);
  CHECK(run_cli({"predict", "--ckpt", dir.s("model.bin"), "--image", dir.s("label.pgm"),
                 "--beam", "2", "--max-len", "6"}) == 0);
}

TEST_CASE("cli train demands exactly one data source") {
  TempDir dir("palx_cli_xor");
  spit(dir.path / "tiny.cfg", kTinyConfig);
  CHECK(run_cli({"train", "--config", dir.s("tiny.cfg"), "--out", dir.s("m.bin")}) == 1);
  CHECK(run_cli({"train", "--data", dir.s("nope"), "--synthetic", "--config", dir.s("tiny.cfg"),
                 "--out", dir.s("m.bin")}) == 1);
}

TEST_CASE("cli maps data failures to exit code 2") {
  TempDir dir("palx_cli_err");
  spit(dir.path / "tiny.cfg", kTinyConfig);
  REQUIRE(run_cli({"synth", "--count", "2", "--val-count", "0", "--depth", "1", "--seed", "4",
                   "--out", dir.s("data"), "--height", "16", "--width", "32"}) == 0);
  REQUIRE(run_cli({"train", "--data", dir.s("data"), "--config", dir.s("tiny.cfg"), "--out",
                   dir.s("model.bin")}) == 0);

  // a dataset directory holding no samples
  fs::create_directories(dir.path / "empty");
  spit(dir.path / "empty" / "manifest.csv", "id,label,split\n");
  CHECK(run_cli({"eval", "--ckpt", dir.s("model.bin"), "--data", dir.s("empty"), "--report",
                 dir.s("r.csv")}) == 2);
  // missing inputs
  CHECK(run_cli({"eval", "--ckpt", dir.s("model.bin"), "--data", dir.s("absent"), "--report",
                 dir.s("r.csv")}) == 2);
  CHECK(run_cli({"predict", "--ckpt", dir.s("model.bin"), "--image", dir.s("absent.pgm")}) == 2);
  CHECK(run_cli({"predict", "--ckpt", dir.s("nock.bin"), "--image", dir.s("absent.pgm")}) == 2);
  // malformed labels surface as parse/token errors
  CHECK(run_cli({"render", "--label", "x ^ 2 }", "--out", dir.s("bad.pgm")}) == 2);
  CHECK(run_cli({"render", "--label", "\\alpha", "--out", dir.s("bad.pgm")}) == 2);
}

TEST_CASE("cli maps configuration failures to exit code 1") {
  TempDir dir("palx_cli_cfgerr");
  spit(dir.path / "bad.cfg", "mystery_knob = 12\n");
  REQUIRE(run_cli({"synth", "--count", "2", "--val-count", "0", "--depth", "1", "--seed", "4",
                   "--out", dir.s("data"), "--height", "16", "--width", "32"}) == 0);
  CHECK(run_cli({"train", "--data", dir.s("data"), "--config", dir.s("bad.cfg"), "--out",
                 dir.s("m.bin")}) == 1);
}
