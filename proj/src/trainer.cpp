#include "rntn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

#include <json.hpp>

namespace rntn {

namespace {

void accumulate_grads(ModelGrads& dst, ModelGrads& src) {
  auto drefs = param_refs(dst);
  auto srefs = param_refs(src);
  for (std::size_t p = 0; p < drefs.size(); ++p) {
    std::vector<double>& d = *drefs[p].values;
    const std::vector<double>& s = *srefs[p].values;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  }
}

void scale_grads(ModelGrads& grads, double scale) {
  for (const auto& ref : param_refs(grads))
    for (double& g : *ref.values) g *= scale;
}

struct BatchWork {
  ModelGrads grads;
  LossReport loss;
};

// Per-sentence gradients for batch[begin..end); dropout streams are seeded
// from (seed, epoch, epoch-wide sentence position) so the result does not
// depend on which thread runs the sentence.
void run_sentences(const Model& model, const Corpus& corpus,
                   const std::vector<std::size_t>& batch, std::size_t begin,
                   std::size_t end, std::size_t epoch_offset,
                   const TrainConfig& cfg, std::size_t epoch,
                   BatchWork& work) {
  for (std::size_t i = begin; i < end; ++i) {
    const std::vector<int>& sentence = corpus.sentences[batch[i]];
    BpttResult res;
    if (cfg.dropout_p > 0.0) {
      Rng drop_rng(derive_seed(cfg.seed, epoch, epoch_offset + i));
      DropoutPlan plan =
          make_dropout_plan(sentence.size() - 1, model.embed_dim,
                            model.hidden_dim, cfg.dropout_p, drop_rng);
      res = bptt(model, sentence, cfg.bptt_k, &plan);
    } else {
      res = bptt(model, sentence, cfg.bptt_k, nullptr);
    }
    accumulate_grads(work.grads, res.grads);
    work.loss.total_nll += res.loss.total_nll;
    work.loss.token_count += res.loss.token_count;
  }
}

BatchWork process_batch(const Model& model, const Corpus& corpus,
                        const std::vector<std::size_t>& batch,
                        std::size_t epoch_offset, const TrainConfig& cfg,
                        std::size_t epoch) {
  const std::size_t threads = std::min(cfg.threads, batch.size());
  if (threads <= 1) {
    BatchWork work{model.zeros_like(), {}};
    run_sentences(model, corpus, batch, 0, batch.size(), epoch_offset, cfg,
                  epoch, work);
    return work;
  }

  std::vector<BatchWork> parts;
  parts.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t)
    parts.push_back(BatchWork{model.zeros_like(), {}});

  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::size_t chunk = (batch.size() + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(batch.size(), begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, t, begin, end]() {
      run_sentences(model, corpus, batch, begin, end, epoch_offset, cfg, epoch,
                    parts[t]);
    });
  }
  for (auto& th : pool) th.join();

  // Merge in thread order so a fixed thread count stays deterministic.
  BatchWork work = std::move(parts[0]);
  for (std::size_t t = 1; t < parts.size(); ++t) {
    accumulate_grads(work.grads, parts[t].grads);
    work.loss.total_nll += parts[t].loss.total_nll;
    work.loss.token_count += parts[t].loss.token_count;
  }
  return work;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string format_metrics_row(const EpochRow& row) {
  std::string line = std::to_string(row.epoch);
  line += ',';
  line += format_double(row.train_nll);
  line += ',';
  line += format_double(row.val_metric);
  line += ',';
  line += format_double(row.lr);
  line += ',';
  line += format_double(row.seconds);
  return line;
}

LossReport evaluate_corpus(const Model& model, const Corpus& corpus) {
  LossReport total;
  for (const auto& sentence : corpus.sentences) {
    LossReport r = sequence_nll(model, sentence);
    total.total_nll += r.total_nll;
    total.token_count += r.token_count;
  }
  return total;
}

double corpus_metric(TokenLevel task, const LossReport& report) {
  return task == TokenLevel::Word
             ? perplexity(report.total_nll, report.token_count)
             : bits_per_character(report.total_nll, report.token_count);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j = nlohmann::json::parse(in);

  RunConfig cfg;
  if (j.contains("cell")) cfg.cell = parse_cell_kind(j["cell"].get<std::string>());
  if (j.contains("task")) cfg.task = parse_token_level(j["task"].get<std::string>());
  if (j.contains("embed_dim")) cfg.embed_dim = j["embed_dim"].get<std::size_t>();
  if (j.contains("hidden_dim")) cfg.hidden_dim = j["hidden_dim"].get<std::size_t>();
  if (j.contains("vocab_cap")) cfg.vocab_cap = j["vocab_cap"].get<std::size_t>();
  if (j.contains("learning_rate")) cfg.train.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("decay_factor")) cfg.train.decay_factor = j["decay_factor"].get<double>();
  if (j.contains("clip_norm")) cfg.train.clip_norm = j["clip_norm"].get<double>();
  if (j.contains("bptt_k")) cfg.train.bptt_k = j["bptt_k"].get<std::size_t>();
  if (j.contains("dropout")) cfg.train.dropout_p = j["dropout"].get<double>();
  if (j.contains("batch_size")) cfg.train.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("max_epochs")) cfg.train.max_epochs = j["max_epochs"].get<std::size_t>();
  if (j.contains("seed")) cfg.train.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("threads")) cfg.train.threads = j["threads"].get<std::size_t>();
  if (j.contains("train")) cfg.train_path = j["train"].get<std::string>();
  if (j.contains("valid")) cfg.valid_path = j["valid"].get<std::string>();
  if (j.contains("test")) cfg.test_path = j["test"].get<std::string>();
  if (j.contains("checkpoint")) cfg.checkpoint_path = j["checkpoint"].get<std::string>();
  if (j.contains("metrics")) cfg.metrics_path = j["metrics"].get<std::string>();
  return cfg;
}

TrainResult train_model(const RunConfig& config, const EpochCallback& on_epoch) {
  config.train.validate();
  if (config.train_path.empty())
    throw std::invalid_argument("train: no training corpus configured");

  const std::string train_text = read_text_file(config.train_path);
  Vocab vocab = build_vocab(train_text, config.task, config.vocab_cap);
  Corpus train_corpus = corpus_from_text(train_text, vocab, config.task);
  if (train_corpus.sentences.empty())
    throw std::invalid_argument("train: training corpus has no sentences");

  Corpus valid_corpus =
      config.valid_path.empty()
          ? train_corpus
          : corpus_from_text(read_text_file(config.valid_path), vocab,
                             config.task);
  if (valid_corpus.sentences.empty())
    throw std::invalid_argument("train: validation corpus has no sentences");

  Rng rng(config.train.seed);
  Model model(config.cell, config.embed_dim, config.hidden_dim, vocab.size());
  init_model(model, rng);
  OptimizerState opt = OptimizerState::for_model(model);

  TrainResult result;
  result.vocab = vocab;
  result.checkpoint_path = config.checkpoint_path;
  result.best_checkpoint_path = config.checkpoint_path + ".best";
  result.best_val_cost = std::numeric_limits<double>::infinity();

  save_checkpoint(config.checkpoint_path, model, vocab, config.task);

  std::ofstream metrics(config.metrics_path, std::ios::trunc);
  if (!metrics)
    throw std::runtime_error("cannot write metrics file: " +
                             config.metrics_path);
  metrics << kMetricsHeader << '\n';

  double lr = config.train.learning_rate;
  double prev_val_cost = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.train.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    auto batches =
        make_batches(train_corpus.sentences.size(), config.train.batch_size,
                     rng);
    double epoch_nll = 0.0;
    std::size_t epoch_tokens = 0;
    std::size_t epoch_offset = 0;

    for (const auto& batch : batches) {
      BatchWork work = process_batch(model, train_corpus, batch, epoch_offset,
                                     config.train, epoch);
      epoch_offset += batch.size();
      if (!std::isfinite(work.loss.total_nll))
        throw NumericError("training loss became non-finite at epoch " +
                           std::to_string(epoch));
      epoch_nll += work.loss.total_nll;
      epoch_tokens += work.loss.token_count;

      // Batch gradient: summed sentence gradients, normalized by the
      // number of predicted tokens in the batch.
      scale_grads(work.grads,
                  1.0 / static_cast<double>(work.loss.token_count));
      const double norm = clip_rescale(work.grads, config.train.clip_norm);
      if (!std::isfinite(norm))
        throw NumericError("gradient norm became non-finite at epoch " +
                           std::to_string(epoch));
      adagrad_update(model, work.grads, opt, lr);
    }

    const LossReport val = evaluate_corpus(model, valid_corpus);
    const double val_cost = val.mean_nll();
    const double val_metric = corpus_metric(config.task, val);
    lr = maybe_decay_lr(lr, prev_val_cost, val_cost, config.train.decay_factor);
    prev_val_cost = val_cost;

    const auto t1 = std::chrono::steady_clock::now();
    EpochRow row;
    row.epoch = epoch;
    row.train_nll = epoch_nll / static_cast<double>(epoch_tokens);
    row.val_metric = val_metric;
    row.lr = lr;
    row.seconds = std::chrono::duration<double>(t1 - t0).count();
    metrics << format_metrics_row(row) << '\n';
    metrics.flush();
    result.rows.push_back(row);
    if (on_epoch) on_epoch(row);

    save_checkpoint(config.checkpoint_path, model, vocab, config.task);
    if (val_cost < result.best_val_cost) {
      result.best_val_cost = val_cost;
      save_checkpoint(result.best_checkpoint_path, model, vocab, config.task);
    }
  }
  return result;
}

EvalResult evaluate_file(Checkpoint& ckpt, const std::string& corpus_path,
                         const std::string& dump_path) {
  Corpus corpus =
      corpus_from_text(read_text_file(corpus_path), ckpt.vocab, ckpt.level);
  if (corpus.sentences.empty())
    throw std::invalid_argument("eval: corpus has no sentences");

  std::ofstream dump;
  if (!dump_path.empty()) {
    dump.open(dump_path, std::ios::trunc);
    if (!dump)
      throw std::runtime_error("cannot write log-prob dump: " + dump_path);
  }

  EvalResult result;
  for (const auto& sentence : corpus.sentences) {
    if (dump.is_open()) {
      std::vector<double> lps = sequence_log_probs(ckpt.model, sentence);
      double sentence_nll = 0.0;
      for (std::size_t t = 0; t < lps.size(); ++t) {
        dump << sentence[t + 1] << '\t' << format_double(lps[t]) << '\n';
        sentence_nll -= lps[t];
      }
      result.loss.total_nll += sentence_nll;
      result.loss.token_count += lps.size();
    } else {
      LossReport r = sequence_nll(ckpt.model, sentence);
      result.loss.total_nll += r.total_nll;
      result.loss.token_count += r.token_count;
    }
  }
  result.metric = corpus_metric(ckpt.level, result.loss);
  return result;
}

std::size_t count_params(CellKind kind, std::size_t input_dim,
                         std::size_t hidden_dim, std::size_t vocab,
                         std::size_t embed_dim) {
  const std::size_t i = input_dim;
  const std::size_t d = hidden_dim;
  std::size_t cell = 0;
  switch (kind) {
    case CellKind::SimpleRNN:
      cell = i * d + d * d + d;
      break;
    case CellKind::GRU:
    case CellKind::GRURNTN:
      cell = 3 * (i * d + d * d + d);
      break;
    case CellKind::LSTM:
    case CellKind::LSTMRNTN:
      // Three peephole gates (i, f, o) plus the candidate block.
      cell = 4 * (i * d) + 7 * (d * d) + 4 * d;
      break;
  }
  if (has_tensor(kind)) cell += i * d * d;
  return vocab * embed_dim + cell + d * vocab + vocab;
}

std::size_t match_hidden_dim(CellKind kind, std::size_t input_dim,
                             std::size_t vocab, std::size_t embed_dim,
                             std::size_t target_params) {
  std::size_t best_d = 1;
  auto diff = [&](std::size_t d) {
    const std::size_t n = count_params(kind, input_dim, d, vocab, embed_dim);
    return n > target_params ? n - target_params : target_params - n;
  };
  std::size_t best_diff = diff(1);
  for (std::size_t d = 2; d <= 4096; ++d) {
    const std::size_t delta = diff(d);
    if (delta < best_diff) {
      best_diff = delta;
      best_d = d;
    }
    if (count_params(kind, input_dim, d, vocab, embed_dim) >
        2 * target_params + 1)
      break;
  }
  return best_d;
}

std::string sample(const Model& model, const Vocab& vocab, TokenLevel level,
                   std::size_t length, double temperature, std::uint64_t seed,
                   const std::string& seed_text) {
  Rng rng(seed);
  StepState state = zero_state(model.cell);

  // Conditioning prefix: the seed text's tokens, or </s> when empty.
  std::vector<int> prefix;
  if (!seed_text.empty()) {
    for (auto& tok : tokenize(seed_text, level))
      if (tok != kEosToken) prefix.push_back(vocab.lookup(tok));
  }
  if (prefix.empty()) prefix.push_back(vocab.eos_id);

  int current = prefix[0];
  for (std::size_t i = 1; i < prefix.size(); ++i) {
    Vector x = embed_lookup(model.embedding, static_cast<std::size_t>(current));
    state = step_forward(model.cell, x, state).state;
    current = prefix[i];
  }

  std::vector<std::string> generated;
  for (std::size_t n = 0; n < length; ++n) {
    Vector x = embed_lookup(model.embedding, static_cast<std::size_t>(current));
    state = step_forward(model.cell, x, state).state;
    Vector probs = output_forward(model.output, state.h);

    std::size_t pick = 0;
    if (temperature <= 0.0) {
      for (std::size_t j = 1; j < probs.size(); ++j)
        if (probs[j] > probs[pick]) pick = j;
    } else {
      // Temperature reshaping: p_j^(1/T), renormalized.
      Vector logits(probs.size());
      for (std::size_t j = 0; j < probs.size(); ++j)
        logits[j] = std::log(probs[j]) / temperature;
      Vector shaped = softmax(logits);
      double u = rng.uniform01();
      double cum = 0.0;
      pick = shaped.size() - 1;
      for (std::size_t j = 0; j < shaped.size(); ++j) {
        cum += shaped[j];
        if (u < cum) {
          pick = j;
          break;
        }
      }
    }
    generated.push_back(vocab.token(static_cast<int>(pick)));
    current = static_cast<int>(pick);
  }

  std::string out;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const std::string& tok = generated[i];
    if (tok == kEosToken) {
      out += '\n';
      continue;
    }
    if (level == TokenLevel::Word && !out.empty() && out.back() != '\n')
      out += ' ';
    out += tok;
  }
  return out;
}

}  // namespace rntn
