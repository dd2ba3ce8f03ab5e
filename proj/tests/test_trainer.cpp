#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rntn/trainer.hpp"

using namespace rntn;

namespace {

std::filesystem::path tmp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "rntn_trainer_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& content) {
  auto path = tmp_dir() / name;
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << content;
  return path.string();
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

std::string repeat_line(const std::string& line, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    out += line;
    out += '\n';
  }
  return out;
}

RunConfig small_char_config(const std::string& tag) {
  RunConfig cfg;
  cfg.cell = CellKind::GRURNTN;
  cfg.task = TokenLevel::Char;
  cfg.embed_dim = 4;
  cfg.hidden_dim = 8;
  cfg.train.learning_rate = 0.1;
  cfg.train.batch_size = 5;
  cfg.train.max_epochs = 3;
  cfg.train.seed = 7;
  cfg.train_path = write_file(tag + "_train.txt",
                              repeat_line("abcdefgh", 24));
  cfg.checkpoint_path = (tmp_dir() / (tag + ".rntn")).string();
  cfg.metrics_path = (tmp_dir() / (tag + ".csv")).string();
  return cfg;
}

}  // namespace

TEST_CASE("zero max_epochs emits the initial checkpoint and no metric rows") {
  RunConfig cfg = small_char_config("zero_epochs");
  cfg.train.max_epochs = 0;
  TrainResult result = train_model(cfg);
  CHECK(result.rows.empty());

  Checkpoint ckpt = load_checkpoint(cfg.checkpoint_path);
  CHECK(ckpt.model.kind == CellKind::GRURNTN);

  std::string metrics = slurp(cfg.metrics_path);
  CHECK(metrics == std::string(kMetricsHeader) + "\n");
  CHECK_FALSE(std::filesystem::exists(cfg.checkpoint_path + ".best"));
}

TEST_CASE("a few epochs of memorization cut the training loss hard") {
  RunConfig cfg = small_char_config("memo_smoke");
  cfg.train.max_epochs = 10;
  TrainResult result = train_model(cfg);
  REQUIRE(result.rows.size() == 10);
  CHECK(result.rows.back().train_nll < 0.5 * result.rows.front().train_nll);
  CHECK(std::filesystem::exists(result.best_checkpoint_path));
}

TEST_CASE("metrics rows are ordered and the learning rate never grows") {
  RunConfig cfg = small_char_config("metrics_shape");
  cfg.train.max_epochs = 6;
  TrainResult result = train_model(cfg);
  REQUIRE(result.rows.size() == 6);
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    CHECK(result.rows[i].epoch == i + 1);
    if (i > 0) CHECK(result.rows[i].lr <= result.rows[i - 1].lr);
    CHECK(result.rows[i].seconds >= 0.0);
  }

  std::istringstream csv(slurp(cfg.metrics_path));
  std::string line;
  REQUIRE(std::getline(csv, line));
  CHECK(line == kMetricsHeader);
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 6);
}

TEST_CASE("identical seeded runs produce identical metrics and checkpoints") {
  RunConfig a = small_char_config("repro_a");
  RunConfig b = small_char_config("repro_b");
  a.train.max_epochs = b.train.max_epochs = 4;
  a.train.dropout_p = b.train.dropout_p = 0.3;
  a.train.seed = b.train.seed = 123;

  TrainResult ra = train_model(a);
  TrainResult rb = train_model(b);
  REQUIRE(ra.rows.size() == rb.rows.size());
  for (std::size_t i = 0; i < ra.rows.size(); ++i) {
    CHECK(ra.rows[i].train_nll == rb.rows[i].train_nll);
    CHECK(ra.rows[i].val_metric == rb.rows[i].val_metric);
    CHECK(ra.rows[i].lr == rb.rows[i].lr);
  }
  CHECK(slurp(a.checkpoint_path) == slurp(b.checkpoint_path));
}

TEST_CASE("threaded batches agree with single-threaded training") {
  RunConfig a = small_char_config("threads_1");
  RunConfig b = small_char_config("threads_3");
  a.train.max_epochs = b.train.max_epochs = 3;
  a.train.seed = b.train.seed = 5;
  a.train.threads = 1;
  b.train.threads = 3;

  TrainResult ra = train_model(a);
  TrainResult rb = train_model(b);
  REQUIRE(ra.rows.size() == rb.rows.size());
  for (std::size_t i = 0; i < ra.rows.size(); ++i) {
    CHECK(ra.rows[i].train_nll ==
          doctest::Approx(rb.rows[i].train_nll).epsilon(1e-8));
    CHECK(ra.rows[i].val_metric ==
          doctest::Approx(rb.rows[i].val_metric).epsilon(1e-8));
  }
}

TEST_CASE("unreadable corpora and bad configs are rejected") {
  RunConfig cfg = small_char_config("bad_paths");
  cfg.train_path = (tmp_dir() / "missing.txt").string();
  CHECK_THROWS_AS(train_model(cfg), std::runtime_error);

  RunConfig empty = small_char_config("no_train");
  empty.train_path.clear();
  CHECK_THROWS_AS(train_model(empty), std::invalid_argument);
}

TEST_CASE("saturated probabilities raise a numeric failure") {
  Model model(CellKind::GRU, 2, 3, 4);
  model.output.b[1] = 800.0;
  model.output.b[2] = -800.0;
  // Predicting token 2 under a distribution that underflows to zero.
  CHECK_THROWS_AS(sequence_nll(model, {1, 2}), NumericError);
}

TEST_CASE("evaluation is deterministic and matches its own log-prob dump") {
  RunConfig cfg = small_char_config("eval_dump");
  cfg.train.max_epochs = 2;
  train_model(cfg);

  Checkpoint ckpt = load_checkpoint(cfg.checkpoint_path);
  std::string corpus = write_file("eval_corpus.txt",
                                  repeat_line("abcdefgh", 4) +
                                      repeat_line("hgfedcba", 2));
  EvalResult once = evaluate_file(ckpt, corpus);
  EvalResult twice = evaluate_file(ckpt, corpus);
  CHECK(once.metric == twice.metric);
  CHECK(once.loss.total_nll == twice.loss.total_nll);

  std::string dump_path = (tmp_dir() / "logprobs.tsv").string();
  EvalResult dumped = evaluate_file(ckpt, corpus, dump_path);
  CHECK(dumped.metric == once.metric);

  // External recomputation from the dump.
  std::istringstream dump(slurp(dump_path));
  std::string line;
  double total = 0.0;
  std::size_t count = 0;
  while (std::getline(dump, line)) {
    std::istringstream fields(line);
    long token;
    double lp;
    fields >> token >> lp;
    total -= lp;
    ++count;
  }
  CHECK(count == once.loss.token_count);
  const double recomputed =
      bits_per_character(total, count);  // char-level checkpoint
  CHECK(recomputed == doctest::Approx(once.metric).epsilon(1e-12));
}

TEST_CASE("sampling honors length, seeds and greedy decoding") {
  RunConfig cfg = small_char_config("sample");
  cfg.train.max_epochs = 2;
  TrainResult result = train_model(cfg);
  Checkpoint ckpt = load_checkpoint(cfg.checkpoint_path);

  CHECK(sample(ckpt.model, ckpt.vocab, ckpt.level, 0, 1.0, 9).empty());

  std::string a = sample(ckpt.model, ckpt.vocab, ckpt.level, 24, 1.0, 9);
  std::string b = sample(ckpt.model, ckpt.vocab, ckpt.level, 24, 1.0, 9);
  CHECK(a == b);
  std::string c = sample(ckpt.model, ckpt.vocab, ckpt.level, 24, 1.0, 10);
  CHECK(a != c);  // different stream, different draw

  std::string greedy1 =
      sample(ckpt.model, ckpt.vocab, ckpt.level, 8, 0.0, 1, "a");
  std::string greedy2 =
      sample(ckpt.model, ckpt.vocab, ckpt.level, 8, 0.0, 2, "a");
  CHECK(greedy1 == greedy2);  // temperature 0 ignores the stream
}

TEST_CASE("run configs load from JSON with defaults for missing keys") {
  std::string path = write_file("config.json", R"({
    "cell": "lstmrntn",
    "task": "char",
    "embed_dim": 12,
    "hidden_dim": 34,
    "learning_rate": 0.25,
    "bptt_k": 6,
    "dropout": 0.1,
    "batch_size": 4,
    "max_epochs": 9,
    "seed": 77,
    "train": "train.txt",
    "checkpoint": "model.rntn"
  })");
  RunConfig cfg = load_run_config(path);
  CHECK(cfg.cell == CellKind::LSTMRNTN);
  CHECK(cfg.task == TokenLevel::Char);
  CHECK(cfg.embed_dim == 12);
  CHECK(cfg.hidden_dim == 34);
  CHECK(cfg.train.learning_rate == 0.25);
  CHECK(cfg.train.bptt_k == 6);
  CHECK(cfg.train.dropout_p == 0.1);
  CHECK(cfg.train.batch_size == 4);
  CHECK(cfg.train.max_epochs == 9);
  CHECK(cfg.train.seed == 77);
  CHECK(cfg.train_path == "train.txt");
  CHECK(cfg.checkpoint_path == "model.rntn");
  // Untouched keys keep their defaults.
  CHECK(cfg.vocab_cap == 10000);
  CHECK(cfg.train.clip_norm == 5.0);
  CHECK(cfg.train.decay_factor == 0.5);
  CHECK(cfg.metrics_path == "metrics.csv");
}

TEST_CASE("training NLL never climbs more than five percent between epochs") {
  // Fixed tiny corpus, three seeds; the decay rule keeps late epochs from
  // regressing.
  const std::string corpus =
      "the cat sat on the mat\nthe dog ran off\na bird sang a song\n"
      "the cat ran off\nthe dog sat on a mat\na bird sat on the cat\n";
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    RunConfig cfg;
    cfg.cell = CellKind::GRU;
    cfg.task = TokenLevel::Word;
    cfg.embed_dim = 6;
    cfg.hidden_dim = 10;
    cfg.train.learning_rate = 0.1;
    cfg.train.batch_size = 3;
    cfg.train.max_epochs = 12;
    cfg.train.seed = seed;
    cfg.train_path =
        write_file("monotone_" + std::to_string(seed) + ".txt", corpus);
    cfg.checkpoint_path =
        (tmp_dir() / ("monotone_" + std::to_string(seed) + ".rntn")).string();
    cfg.metrics_path =
        (tmp_dir() / ("monotone_" + std::to_string(seed) + ".csv")).string();

    TrainResult result = train_model(cfg);
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
      CAPTURE(seed);
      CAPTURE(i);
      CHECK(result.rows[i].train_nll <=
            1.05 * result.rows[i - 1].train_nll);
    }
  }
}
