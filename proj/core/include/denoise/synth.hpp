// Seeded generator of TREC-format question corpora.
//
// Used as a stand-in when the real TREC files are not on disk. Each line is
// "COARSE:fine question ?" with the six TREC coarse classes in TREC's class
// proportions. Questions combine class-indicative templates with Zipf-drawn
// rare name tokens, so a model can generalise from the templates and can
// also memorise individual examples through the names.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace denoise {

struct SynthOptions {
  std::size_t count = 5452;
  std::uint64_t seed = 1;
  /// Size of the pseudo-word name pool shared by every split drawn with the
  /// same pool_seed.
  std::size_t name_pool = 20000;
  std::uint64_t pool_seed = 20021;
};

/// Returns the corpus as TREC-format text (one question per line).
std::string make_question_corpus(const SynthOptions& options);

}  // namespace denoise
