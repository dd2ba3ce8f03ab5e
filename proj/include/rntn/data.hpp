#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rntn/linalg.hpp"
#include "rntn/rng.hpp"

// Corpus ingestion: tokenization at word or character level, capped
// vocabulary with <unk>, sentence batching and the evaluation metrics.
//
// Input corpora are plain UTF-8 text, one sentence per line. Every sentence
// gets a closing </s> marker, so each usable sentence holds at least two
// token ids (one prediction). Character-level tokens are UTF-8 code points.

namespace rntn {

enum class TokenLevel { Word, Char };

std::string_view token_level_name(TokenLevel level);
TokenLevel parse_token_level(std::string_view name);

inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kUnkToken = "<unk>";

struct Vocab {
  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int> token_to_id;
  int eos_id = -1;
  int unk_id = -1;
  std::size_t cap = 0;  // 0 = uncapped

  std::size_t size() const noexcept { return id_to_token.size(); }

  // Unknown tokens map to <unk>.
  int lookup(const std::string& token) const;
  const std::string& token(int id) const { return id_to_token.at(id); }
};

struct Corpus {
  std::vector<std::vector<int>> sentences;  // each ends with eos_id
  TokenLevel level = TokenLevel::Word;

  std::size_t sentence_count() const noexcept { return sentences.size(); }
  // Number of next-token predictions: sum of (len - 1) per sentence.
  std::size_t prediction_count() const noexcept;
};

// Splits one line into tokens and appends </s>. Word level splits on
// whitespace runs; char level yields each UTF-8 code point, spaces included.
std::vector<std::string> tokenize(std::string_view line, TokenLevel level);

// Inverse of char-level tokenize for a single sentence (the trailing </s>
// is dropped; any other </s> becomes a newline).
std::string detokenize(const std::vector<std::string>& tokens,
                       TokenLevel level);

// Builds a vocabulary from text. At word level the `cap` most frequent
// tokens survive (frequency ties broken lexicographically); everything else
// maps to <unk>. Char level keeps the full observed character set and
// ignores the cap. </s> and <unk> ride on top of the cap. Throws on text
// with no tokens.
Vocab build_vocab(std::string_view text, TokenLevel level, std::size_t cap);

// Maps text to token-id sentences under an existing vocabulary. Lines that
// produce no tokens are skipped.
Corpus corpus_from_text(std::string_view text, const Vocab& vocab,
                        TokenLevel level);

std::string read_text_file(const std::string& path);

// One epoch's batching: every sentence index appears exactly once, order
// shuffled by `rng`, final partial batch kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t sentence_count,
                                                   std::size_t batch_size,
                                                   Rng& rng);

// exp(mean NLL); the NLL is accumulated in nats.
double perplexity(double total_nll_nats, std::size_t token_count);

// Mean base-2 NLL per character.
double bits_per_character(double total_nll_nats, std::size_t char_count);

// ---------------------------------------------------------------------------
// Trainable embedding table (vocab x dim).
// ---------------------------------------------------------------------------

struct Embedding {
  Matrix table;

  Embedding() = default;
  Embedding(std::size_t vocab, std::size_t dim) : table(vocab, dim) {}

  std::size_t vocab() const noexcept { return table.rows; }
  std::size_t dim() const noexcept { return table.cols; }
};

Vector embed_lookup(const Embedding& e, std::size_t id);
void embed_grad_accumulate(Embedding& grads, std::size_t id, const Vector& g);

}  // namespace rntn
