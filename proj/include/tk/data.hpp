#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tk/tensor.hpp"

namespace tk::data {

inline constexpr double kFrameShift = 0.01;  // seconds per feature frame
inline constexpr const char* kDataVersion = "tk-data-1";

using Features = Mat<float>;

// Generator knobs for a synthetic multi-dialect, dual-orthography corpus.
struct SynthSpec {
  std::vector<std::string> dialect_names{"NanSixian", "Sixian", "Hailu"};
  int phonemes = 24;
  int words = 60;
  int tones = 4;
  // Speakers per dialect in each split.
  int train_speakers = 18;
  int dev_speakers = 1;
  int test_speakers = 1;
  int utterances_per_speaker = 40;
  int min_words = 3;
  int max_words = 8;
  int feature_dim = 16;
  int min_frames_per_phoneme = 2;
  int max_frames_per_phoneme = 4;
  double noise = 0.8;
  double speaker_offset = 0.15;
  double tone_scale = 1.0;
  // Per dialect; a single value is broadcast to all dialects.
  std::vector<double> phonetic_shift{0.35};
  std::vector<double> lexical_swap{0.2};
  std::uint64_t seed = 1;

  int dialects() const { return static_cast<int>(dialect_names.size()); }
  double shift_of(int d) const;
  double swap_of(int d) const;
  void validate() const;
};

SynthSpec read_synth_spec(const std::filesystem::path& path, SynthSpec base = {});
void apply_synth_setting(SynthSpec& spec, const std::string& key, const std::string& value);

struct Utterance {
  std::string id;
  std::string speaker;
  int dialect = 0;
  std::string split;
  Features features;          // T0 x F
  std::string transcript_h;   // logographs, one code point per word
  std::string transcript_p;   // space-separated syllables with tone digits
  double audio_seconds = 0;   // T0 * kFrameShift

  bool operator==(const Utterance& o) const;
};

// Generation-time lexicon, kept in memory only.
struct DialectLexicon {
  std::vector<std::string> logograph;  // word -> UTF-8 code point
  std::vector<std::string> syllable;   // word -> toneless syllable
  std::vector<int> tone_label;         // word -> written tone (1-based)
  std::map<std::string, int> word_of_syllable;
};

struct Lexicon {
  std::vector<DialectLexicon> dialects;
};

struct Dataset {
  std::vector<std::string> dialect_names;
  int feature_dim = 0;
  std::vector<Utterance> train, dev, test;
  std::optional<Lexicon> lexicon;
  // Word ids behind each generated utterance, keyed by utterance id.
  std::map<std::string, std::vector<int>> words;

  const std::vector<Utterance>& split(const std::string& name) const;
  std::vector<Utterance>& split(const std::string& name);
  int dialect_index(const std::string& name) const;

  // Compares serialized content only (generation metadata excluded).
  bool same_content(const Dataset& o) const;
};

Dataset gen_corpus(const SynthSpec& spec);

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

// Keeps only utterances of one dialect in every split.
Dataset subset_by_dialect(const Dataset& dataset, const std::string& dialect);

// UTF-8 code points / whitespace-separated syllables.
std::vector<std::string> split_code_points(const std::string& s);
std::vector<std::string> split_whitespace(const std::string& s);
std::string strip_tone(const std::string& syllable);

}  // namespace tk::data
