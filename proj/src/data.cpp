#include "rntn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rntn {

std::string_view token_level_name(TokenLevel level) {
  return level == TokenLevel::Word ? "word" : "char";
}

TokenLevel parse_token_level(std::string_view name) {
  if (name == "word") return TokenLevel::Word;
  if (name == "char") return TokenLevel::Char;
  throw std::invalid_argument("unknown task level: " + std::string(name));
}

int Vocab::lookup(const std::string& token) const {
  auto it = token_to_id.find(token);
  if (it != token_to_id.end()) return it->second;
  if (unk_id < 0)
    throw std::out_of_range("vocab: token '" + token +
                            "' unknown and no <unk> entry present");
  return unk_id;
}

std::size_t Corpus::prediction_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size() - 1;
  return n;
}

namespace {

std::size_t utf8_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  // Stray continuation byte; treat as a single token rather than fail.
  return 1;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) fn(text.substr(start));
      break;
    }
    fn(text.substr(start, end - start));
    start = end + 1;
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view line, TokenLevel level) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
    line.remove_suffix(1);

  std::vector<std::string> tokens;
  if (level == TokenLevel::Word) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
        ++i;
      std::size_t start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])))
        ++i;
      if (i > start) tokens.emplace_back(line.substr(start, i - start));
    }
  } else {
    std::size_t i = 0;
    while (i < line.size()) {
      std::size_t n = utf8_len(static_cast<unsigned char>(line[i]));
      n = std::min(n, line.size() - i);
      tokens.emplace_back(line.substr(i, n));
      i += n;
    }
  }
  if (!tokens.empty()) tokens.emplace_back(kEosToken);
  return tokens;
}

std::string detokenize(const std::vector<std::string>& tokens,
                       TokenLevel level) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    if (tok == kEosToken) {
      if (i + 1 != tokens.size()) out += '\n';
      continue;
    }
    if (level == TokenLevel::Word && !out.empty() && out.back() != '\n')
      out += ' ';
    out += tok;
  }
  return out;
}

Vocab build_vocab(std::string_view text, TokenLevel level, std::size_t cap) {
  // std::map keeps the tie-break scan in lexicographic order.
  std::map<std::string, std::size_t> freq;
  for_each_line(text, [&](std::string_view line) {
    for (auto& tok : tokenize(line, level))
      if (tok != kEosToken) ++freq[tok];
  });
  if (freq.empty())
    throw std::invalid_argument("build_vocab: corpus contains no tokens");

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(),
                                                          freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  if (level == TokenLevel::Word && cap > 0 && ranked.size() > cap)
    ranked.resize(cap);

  Vocab v;
  v.cap = level == TokenLevel::Word ? cap : 0;
  auto add = [&v](const std::string& tok) {
    int id = static_cast<int>(v.id_to_token.size());
    v.id_to_token.push_back(tok);
    v.token_to_id.emplace(tok, id);
    return id;
  };
  v.eos_id = add(std::string(kEosToken));
  v.unk_id = add(std::string(kUnkToken));
  for (const auto& [tok, count] : ranked) {
    (void)count;
    add(tok);
  }
  return v;
}

Corpus corpus_from_text(std::string_view text, const Vocab& vocab,
                        TokenLevel level) {
  Corpus c;
  c.level = level;
  for_each_line(text, [&](std::string_view line) {
    auto tokens = tokenize(line, level);
    if (tokens.empty()) return;
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& tok : tokens) ids.push_back(vocab.lookup(tok));
    c.sentences.push_back(std::move(ids));
  });
  return c;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t sentence_count,
                                                   std::size_t batch_size,
                                                   Rng& rng) {
  if (batch_size == 0)
    throw std::invalid_argument("make_batches: batch size must be positive");
  std::vector<std::size_t> order(sentence_count);
  for (std::size_t i = 0; i < sentence_count; ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

double perplexity(double total_nll_nats, std::size_t token_count) {
  if (token_count == 0)
    throw std::invalid_argument("perplexity: token count must be positive");
  return std::exp(total_nll_nats / static_cast<double>(token_count));
}

double bits_per_character(double total_nll_nats, std::size_t char_count) {
  if (char_count == 0)
    throw std::invalid_argument(
        "bits_per_character: char count must be positive");
  return total_nll_nats / (static_cast<double>(char_count) * std::log(2.0));
}

Vector embed_lookup(const Embedding& e, std::size_t id) {
  if (id >= e.vocab())
    throw std::out_of_range("embed_lookup: id " + std::to_string(id) +
                            " out of range for vocab " +
                            std::to_string(e.vocab()));
  Vector out(e.dim());
  for (std::size_t j = 0; j < e.dim(); ++j) out[j] = e.table(id, j);
  return out;
}

void embed_grad_accumulate(Embedding& grads, std::size_t id, const Vector& g) {
  if (id >= grads.vocab())
    throw std::out_of_range("embed_grad_accumulate: id " + std::to_string(id) +
                            " out of range for vocab " +
                            std::to_string(grads.vocab()));
  if (g.size() != grads.dim())
    throw ShapeError("embed_grad_accumulate: gradient vector[" +
                     std::to_string(g.size()) + "] does not match embedding[" +
                     std::to_string(grads.vocab()) + "x" +
                     std::to_string(grads.dim()) + "]");
  for (std::size_t j = 0; j < grads.dim(); ++j) grads.table(id, j) += g[j];
}

}  // namespace rntn
