#pragma once

#include <string>

#include "rntn/data.hpp"
#include "rntn/model.hpp"

// Checkpoint file format (version 1):
//
//   bytes 0..3   magic "RNTN"
//   bytes 4..7   format version, uint32 little-endian
//   bytes 8..15  manifest length M, uint64 little-endian
//   M bytes      manifest: compact JSON with keys cell, embed_dim,
//                hidden_dim, task, vocab (tokens in id order), eos_id,
//                unk_id, cap
//   rest         every parameter as float64 little-endian, flattened in
//                canonical order: embedding (row-major), cell parameters
//                (see param_refs), output projection w_hy then b_y
//
// The payload length must equal the parameter count implied by the
// manifest; save -> load -> save reproduces the file byte for byte.

namespace rntn {

struct Checkpoint {
  Model model;
  Vocab vocab;
  TokenLevel level = TokenLevel::Word;
};

void save_checkpoint(const std::string& path, Model& model, const Vocab& vocab,
                     TokenLevel level);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace rntn
