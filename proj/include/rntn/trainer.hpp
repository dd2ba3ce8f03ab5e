#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rntn/checkpoint.hpp"
#include "rntn/data.hpp"
#include "rntn/model.hpp"
#include "rntn/training.hpp"

// Training orchestration: epochs of shuffled sentence batches, validation
// metric tracking with learning-rate decay, metrics CSV and checkpoint
// emission, plus evaluation, sampling and parameter counting.

namespace rntn {

struct RunConfig {
  CellKind cell = CellKind::GRURNTN;
  TokenLevel task = TokenLevel::Word;
  std::size_t embed_dim = 128;
  std::size_t hidden_dim = 256;
  std::size_t vocab_cap = 10000;  // word level only; 0 = uncapped
  TrainConfig train;

  std::string train_path;
  std::string valid_path;  // falls back to the training corpus when empty
  std::string test_path;
  std::string checkpoint_path = "model.rntn";
  std::string metrics_path = "metrics.csv";
};

struct EpochRow {
  std::size_t epoch = 0;
  double train_nll = 0.0;   // mean per-prediction NLL (nats)
  double val_metric = 0.0;  // PPL for word task, BPC for char task
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRow> rows;
  Vocab vocab;
  std::string checkpoint_path;
  std::string best_checkpoint_path;
  double best_val_cost = 0.0;
};

inline constexpr std::string_view kMetricsHeader =
    "epoch,train_nll,val_metric,lr,seconds";

// Reads a JSON run configuration (any subset of the documented keys;
// missing keys keep their defaults).
RunConfig load_run_config(const std::string& path);

// Runs the full training protocol. Deterministic for a fixed config and
// seed when train.threads == 1. Writes the initial checkpoint before the
// first epoch, then one checkpoint per epoch plus a best-validation copy at
// checkpoint_path + ".best"; metrics rows go to metrics_path as CSV.
// `on_epoch`, when given, fires after each epoch row is recorded.
using EpochCallback = std::function<void(const EpochRow&)>;
TrainResult train_model(const RunConfig& config,
                        const EpochCallback& on_epoch = {});

// Mean NLL of a whole corpus (dropout disabled).
LossReport evaluate_corpus(const Model& model, const Corpus& corpus);

// PPL (word) or BPC (char) from an evaluation report.
double corpus_metric(TokenLevel task, const LossReport& report);

struct EvalResult {
  LossReport loss;
  double metric = 0.0;
};

// Evaluates a checkpointed model on a text file. When dump_path is
// non-empty, writes one "token_id<TAB>logprob" line per prediction.
EvalResult evaluate_file(Checkpoint& ckpt, const std::string& corpus_path,
                         const std::string& dump_path = "");

// Closed-form parameter count for a model configuration: embedding +
// cell weights + output projection.
std::size_t count_params(CellKind kind, std::size_t input_dim,
                         std::size_t hidden_dim, std::size_t vocab,
                         std::size_t embed_dim);

// Autoregressive sampling. The generated text excludes the seed text;
// </s> renders as a newline. temperature <= 0 decodes greedily.
std::string sample(const Model& model, const Vocab& vocab, TokenLevel level,
                   std::size_t length, double temperature, std::uint64_t seed,
                   const std::string& seed_text = "");

// Finds the hidden size whose parameter count best matches `target` for
// the given kind (used to parameter-match baselines against tensor cells).
std::size_t match_hidden_dim(CellKind kind, std::size_t input_dim,
                             std::size_t vocab, std::size_t embed_dim,
                             std::size_t target_params);

std::string format_metrics_row(const EpochRow& row);

}  // namespace rntn
