// Command-line trainer for the gated recurrent tensor cells.
//
// Subcommands: train, eval, gradcheck, params, sample.
// Exit codes: 0 success, 1 usage error, 2 numeric failure.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rntn/gradcheck.hpp"
#include "rntn/trainer.hpp"

namespace {

struct TrainCli {
  std::string config_path;
  std::string cell, task;
  std::size_t hidden = 0, embed = 0, vocab_cap = 0;
  double lr = 0, clip = 0, dropout = -1;
  std::size_t bptt_k = 0;
  bool bptt_k_set = false;
  std::size_t batch = 0, epochs = 0;
  bool epochs_set = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t threads = 0;
  std::string train_path, valid_path, test_path, checkpoint_path, metrics_path;
};

rntn::RunConfig resolve_config(const TrainCli& cli) {
  rntn::RunConfig cfg;
  if (!cli.config_path.empty()) cfg = rntn::load_run_config(cli.config_path);
  if (!cli.cell.empty()) cfg.cell = rntn::parse_cell_kind(cli.cell);
  if (!cli.task.empty()) cfg.task = rntn::parse_token_level(cli.task);
  if (cli.hidden) cfg.hidden_dim = cli.hidden;
  if (cli.embed) cfg.embed_dim = cli.embed;
  if (cli.vocab_cap) cfg.vocab_cap = cli.vocab_cap;
  if (cli.lr > 0) cfg.train.learning_rate = cli.lr;
  if (cli.clip > 0) cfg.train.clip_norm = cli.clip;
  if (cli.dropout >= 0) cfg.train.dropout_p = cli.dropout;
  if (cli.bptt_k_set) cfg.train.bptt_k = cli.bptt_k;
  if (cli.batch) cfg.train.batch_size = cli.batch;
  if (cli.epochs_set) cfg.train.max_epochs = cli.epochs;
  if (cli.seed_set) cfg.train.seed = cli.seed;
  if (cli.threads) cfg.train.threads = cli.threads;
  if (!cli.train_path.empty()) cfg.train_path = cli.train_path;
  if (!cli.valid_path.empty()) cfg.valid_path = cli.valid_path;
  if (!cli.test_path.empty()) cfg.test_path = cli.test_path;
  if (!cli.checkpoint_path.empty()) cfg.checkpoint_path = cli.checkpoint_path;
  if (!cli.metrics_path.empty()) cfg.metrics_path = cli.metrics_path;
  return cfg;
}

void add_model_flags(CLI::App* cmd, TrainCli& cli) {
  cmd->add_option("--config", cli.config_path, "JSON config file");
  cmd->add_option("--cell", cli.cell, "cell kind")
      ->check(CLI::IsMember({"rnn", "gru", "lstm", "grurntn", "lstmrntn"}));
  cmd->add_option("--task", cli.task, "token level")
      ->check(CLI::IsMember({"word", "char"}));
  cmd->add_option("--hidden", cli.hidden, "hidden units");
  cmd->add_option("--embed", cli.embed, "embedding dimensions");
  cmd->add_option("--vocab-cap", cli.vocab_cap, "word vocabulary cap");
}

int run_train(const TrainCli& cli) {
  rntn::RunConfig cfg = resolve_config(cli);
  std::cout << rntn::kMetricsHeader << '\n';
  rntn::TrainResult result =
      rntn::train_model(cfg, [](const rntn::EpochRow& row) {
        std::cout << rntn::format_metrics_row(row) << std::endl;
      });
  std::cout << "checkpoint: " << result.checkpoint_path << '\n';
  if (!result.rows.empty())
    std::cout << "best checkpoint: " << result.best_checkpoint_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gated recurrent tensor network language model trainer"};
  app.require_subcommand(1);

  TrainCli cli;

  CLI::App* train = app.add_subcommand("train", "train a model");
  add_model_flags(train, cli);
  train->add_option("--lr", cli.lr, "initial learning rate");
  train->add_option("--clip", cli.clip, "gradient rescale threshold");
  auto* bptt_opt =
      train->add_option("--bptt-k", cli.bptt_k, "BPTT window (0 = unlimited)");
  train->add_option("--dropout", cli.dropout, "dropout probability");
  train->add_option("--batch", cli.batch, "sentences per batch");
  auto* epochs_opt = train->add_option("--epochs", cli.epochs, "epoch count");
  auto* seed_opt = train->add_option("--seed", cli.seed, "RNG seed");
  train->add_option("--threads", cli.threads,
                    "sentence-level worker threads per batch");
  train->add_option("--train", cli.train_path, "training corpus");
  train->add_option("--valid", cli.valid_path, "validation corpus");
  train->add_option("--test", cli.test_path, "test corpus");
  train->add_option("--checkpoint", cli.checkpoint_path, "checkpoint path");
  train->add_option("--metrics", cli.metrics_path, "metrics CSV path");

  std::string eval_checkpoint, eval_corpus, eval_dump;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint path")
      ->required();
  eval->add_option("--corpus", eval_corpus, "corpus to score")->required();
  eval->add_option("--dump-logprobs", eval_dump,
                   "write per-token log probabilities to this file");

  std::size_t gc_embed = 5, gc_hidden = 7, gc_vocab = 11, gc_steps = 5,
              gc_seeds = 5;
  std::uint64_t gc_seed = 1;
  std::string gc_cell = "all";
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "certify analytic gradients");
  gradcheck->add_option("--cell", gc_cell, "cell kind or 'all'")
      ->check(CLI::IsMember({"all", "rnn", "gru", "lstm", "grurntn",
                             "lstmrntn"}));
  gradcheck->add_option("--embed", gc_embed, "embedding dimensions");
  gradcheck->add_option("--hidden", gc_hidden, "hidden units");
  gradcheck->add_option("--vocab", gc_vocab, "vocabulary size");
  gradcheck->add_option("--steps", gc_steps, "sequence length");
  gradcheck->add_option("--seeds", gc_seeds, "number of random instances");
  gradcheck->add_option("--seed", gc_seed, "base RNG seed");

  std::string params_cell = "grurntn";
  std::size_t params_embed = 128, params_hidden = 256, params_vocab = 10000;
  CLI::App* params = app.add_subcommand("params", "count free parameters");
  params->add_option("--cell", params_cell, "cell kind")
      ->check(CLI::IsMember({"rnn", "gru", "lstm", "grurntn", "lstmrntn"}));
  params->add_option("--embed", params_embed, "embedding dimensions");
  params->add_option("--hidden", params_hidden, "hidden units");
  params->add_option("--vocab", params_vocab, "vocabulary size");

  std::string sample_checkpoint, sample_seed_text;
  std::size_t sample_length = 200;
  double sample_temperature = 1.0;
  std::uint64_t sample_seed = 1;
  CLI::App* sample = app.add_subcommand("sample", "generate text");
  sample->add_option("--checkpoint", sample_checkpoint, "checkpoint path")
      ->required();
  sample->add_option("--length", sample_length, "tokens to generate");
  sample->add_option("--temperature", sample_temperature,
                     "softmax temperature (0 = greedy)");
  sample->add_option("--seed", sample_seed, "RNG seed");
  sample->add_option("--seed-text", sample_seed_text, "conditioning prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) {
      cli.bptt_k_set = bptt_opt->count() > 0;
      cli.epochs_set = epochs_opt->count() > 0;
      cli.seed_set = seed_opt->count() > 0;
      return run_train(cli);
    }
    if (eval->parsed()) {
      rntn::Checkpoint ckpt = rntn::load_checkpoint(eval_checkpoint);
      rntn::EvalResult result =
          rntn::evaluate_file(ckpt, eval_corpus, eval_dump);
      const char* name =
          ckpt.level == rntn::TokenLevel::Word ? "ppl" : "bpc";
      std::printf("tokens %zu  nll %.6f  %s %.6f\n", result.loss.token_count,
                  result.loss.mean_nll(), name, result.metric);
      return 0;
    }
    if (gradcheck->parsed()) {
      std::vector<rntn::CellKind> kinds;
      if (gc_cell == "all")
        kinds = {rntn::CellKind::SimpleRNN, rntn::CellKind::GRU,
                 rntn::CellKind::LSTM, rntn::CellKind::GRURNTN,
                 rntn::CellKind::LSTMRNTN};
      else
        kinds = {rntn::parse_cell_kind(gc_cell)};

      bool ok = true;
      for (auto kind : kinds) {
        for (std::uint64_t s = 0; s < gc_seeds; ++s) {
          auto reports = rntn::check_random_instance(
              kind, gc_embed, gc_hidden, gc_vocab, gc_steps, gc_seed + s);
          std::cout << "seed " << (gc_seed + s) << '\n'
                    << rntn::format_reports(reports);
          ok = ok && rntn::all_pass(reports);
        }
      }
      std::cout << (ok ? "all gradients certified\n"
                       : "GRADIENT CHECK FAILED\n");
      return ok ? 0 : 2;
    }
    if (params->parsed()) {
      const std::size_t n =
          rntn::count_params(rntn::parse_cell_kind(params_cell), params_embed,
                             params_hidden, params_vocab, params_embed);
      std::printf("%zu\n", n);
      return 0;
    }
    if (sample->parsed()) {
      rntn::Checkpoint ckpt = rntn::load_checkpoint(sample_checkpoint);
      std::cout << rntn::sample(ckpt.model, ckpt.vocab, ckpt.level,
                                sample_length, sample_temperature, sample_seed,
                                sample_seed_text);
      return 0;
    }
  } catch (const rntn::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
