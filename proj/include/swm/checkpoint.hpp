#pragma once

// Checkpoint container:
//
//   "SWMCKPT\n"                     8-byte magic
//   u64 little-endian               header length in bytes
//   header                          JSON: format_version, config, variant,
//                                   vocabularies, arrays [{name, shape, offset}]
//   payload                         float64 little-endian, offsets relative
//                                   to the payload start
//
// Array names are the SwmParams field paths (e.g. "word_lstm.forward.bias").

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "swm/lexicon.hpp"
#include "swm/model.hpp"

namespace swm {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  SwmConfig config;
  Variant variant = Variant::kFull;
  Vocabulary word_vocab;
  Vocabulary sememe_vocab;
  SwmParams params;

  Checkpoint(SwmConfig c, Variant v, Vocabulary words, Vocabulary sememes, SwmParams p)
      : config(c), variant(v), word_vocab(std::move(words)), sememe_vocab(std::move(sememes)),
        params(std::move(p)) {}
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Reads and validates a checkpoint: every array named by the config must be
/// present with the shape the config implies. A mismatch names the array.
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace swm
