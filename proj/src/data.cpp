#include "tk/data.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tk/errors.hpp"

namespace tk::data {

namespace {

using json = nlohmann::json;

const std::vector<std::string> kConsonants = {"b", "p", "m", "f", "v", "d", "t", "n", "l", "g", "k",
                                              "h", "z", "c", "s", "j", "q", "x", "r", "w", "y", "ng"};
const std::vector<std::string> kVowels = {"a",  "e",  "i",  "o",  "u",  "ii", "ai", "au",
                                          "oi", "eu", "ia", "ie", "io", "iu", "ua", "ue"};

std::string encode_utf8(std::uint32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

struct PhonemeSet {
  int consonants = 0;
  int vowels = 0;
  std::string render(int ph) const { return ph < consonants ? kConsonants[ph] : kVowels[ph - consonants]; }
  bool is_vowel(int ph) const { return ph >= consonants; }
};

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("spec key '" + key + "': expected an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("spec key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError("spec key '" + key + "': empty list");
  return out;
}

}  // namespace

double SynthSpec::shift_of(int d) const {
  return phonetic_shift.size() == 1 ? phonetic_shift[0] : phonetic_shift.at(static_cast<std::size_t>(d));
}

double SynthSpec::swap_of(int d) const {
  return lexical_swap.size() == 1 ? lexical_swap[0] : lexical_swap.at(static_cast<std::size_t>(d));
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("synth spec: " + m); };
  if (dialects() < 1) fail("at least one dialect is required");
  if (std::set<std::string>(dialect_names.begin(), dialect_names.end()).size() != dialect_names.size()) {
    fail("dialect names must be unique");
  }
  for (const auto& n : dialect_names) {
    if (n.empty() || n.find_first_of(" \t,") != std::string::npos) fail("invalid dialect name '" + n + "'");
  }
  const int max_ph = static_cast<int>(kConsonants.size() + kVowels.size());
  if (phonemes < 4 || phonemes > max_ph) fail("phonemes must lie in [4," + std::to_string(max_ph) + "]");
  if (words < 2) fail("need at least 2 words");
  if (tones < 1 || tones > 9) fail("tones must lie in [1,9]");
  if (train_speakers < 1 || dev_speakers < 1 || test_speakers < 1) fail("every split needs >= 1 speaker per dialect");
  if (utterances_per_speaker < 1) fail("utterances_per_speaker must be >= 1");
  if (min_words < 1 || max_words < min_words) fail("invalid utterance length range");
  if (feature_dim < 1) fail("feature_dim must be >= 1");
  if (min_frames_per_phoneme < 1 || max_frames_per_phoneme < min_frames_per_phoneme) fail("invalid frames-per-phoneme range");
  if (noise < 0 || speaker_offset < 0 || tone_scale < 0) fail("noise levels must be non-negative");
  auto check_per_dialect = [&](const std::vector<double>& v, const char* name, double hi) {
    if (v.size() != 1 && static_cast<int>(v.size()) != dialects()) {
      fail(std::string(name) + " needs 1 or " + std::to_string(dialects()) + " values");
    }
    for (double x : v) {
      if (x < 0 || x > hi) fail(std::string(name) + " values must lie in [0," + std::to_string(hi) + "]");
    }
  };
  check_per_dialect(phonetic_shift, "phonetic_shift", 1e6);
  check_per_dialect(lexical_swap, "lexical_swap", 1.0);
}

void apply_synth_setting(SynthSpec& spec, const std::string& key, const std::string& value) {
  if (key == "dialects") {
    spec.dialect_names = split_list(value);
  } else if (key == "phonemes") {
    spec.phonemes = to_int(key, value);
  } else if (key == "words") {
    spec.words = to_int(key, value);
  } else if (key == "tones") {
    spec.tones = to_int(key, value);
  } else if (key == "train_speakers") {
    spec.train_speakers = to_int(key, value);
  } else if (key == "dev_speakers") {
    spec.dev_speakers = to_int(key, value);
  } else if (key == "test_speakers") {
    spec.test_speakers = to_int(key, value);
  } else if (key == "utterances_per_speaker") {
    spec.utterances_per_speaker = to_int(key, value);
  } else if (key == "min_words") {
    spec.min_words = to_int(key, value);
  } else if (key == "max_words") {
    spec.max_words = to_int(key, value);
  } else if (key == "feature_dim") {
    spec.feature_dim = to_int(key, value);
  } else if (key == "min_frames_per_phoneme") {
    spec.min_frames_per_phoneme = to_int(key, value);
  } else if (key == "max_frames_per_phoneme") {
    spec.max_frames_per_phoneme = to_int(key, value);
  } else if (key == "noise") {
    spec.noise = to_double(key, value);
  } else if (key == "speaker_offset") {
    spec.speaker_offset = to_double(key, value);
  } else if (key == "tone_scale") {
    spec.tone_scale = to_double(key, value);
  } else if (key == "phonetic_shift") {
    spec.phonetic_shift = to_doubles(key, value);
  } else if (key == "lexical_swap") {
    spec.lexical_swap = to_doubles(key, value);
  } else if (key == "seed") {
    try {
      spec.seed = std::stoull(value);
    } catch (const std::exception&) {
      throw ConfigError("spec key 'seed': expected an unsigned integer, got '" + value + "'");
    }
  } else {
    throw ConfigError("unknown synth spec key '" + key + "'");
  }
}

SynthSpec read_synth_spec(const std::filesystem::path& path, SynthSpec base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open spec file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    apply_synth_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

bool Utterance::operator==(const Utterance& o) const {
  return id == o.id && speaker == o.speaker && dialect == o.dialect && split == o.split &&
         features.rows() == o.features.rows() && features.cols() == o.features.cols() &&
         features == o.features && transcript_h == o.transcript_h && transcript_p == o.transcript_p &&
         audio_seconds == o.audio_seconds;
}

const std::vector<Utterance>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "' (expected train|dev|test)");
}

std::vector<Utterance>& Dataset::split(const std::string& name) {
  return const_cast<std::vector<Utterance>&>(static_cast<const Dataset&>(*this).split(name));
}

int Dataset::dialect_index(const std::string& name) const {
  for (std::size_t i = 0; i < dialect_names.size(); ++i) {
    if (dialect_names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

bool Dataset::same_content(const Dataset& o) const {
  return dialect_names == o.dialect_names && feature_dim == o.feature_dim && train == o.train && dev == o.dev &&
         test == o.test;
}

Dataset gen_corpus(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int K = spec.dialects();
  const int F = spec.feature_dim;
  const int W = spec.words;

  PhonemeSet phs;
  phs.vowels = std::max(2, spec.phonemes * 3 / 8);
  phs.consonants = spec.phonemes - phs.vowels;
  if (phs.consonants > static_cast<int>(kConsonants.size()) || phs.vowels > static_cast<int>(kVowels.size())) {
    throw ConfigError("synth spec: phoneme inventory too large for the rendering table");
  }

  auto random_matrix = [&](int rows, double scale) {
    Mat<double> m(rows, F);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * gauss(rng);
    return m;
  };

  // Base lexicon: one syllable (CV or CVC) and one underlying tone per word.
  std::vector<std::vector<int>> base_pron(static_cast<std::size_t>(W));
  std::vector<int> base_tone(static_cast<std::size_t>(W));
  std::set<std::string> used;
  auto render = [&](const std::vector<int>& pron) {
    std::string s;
    for (int ph : pron) s += phs.render(ph);
    return s;
  };
  std::uniform_int_distribution<int> pick_c(0, phs.consonants - 1);
  std::uniform_int_distribution<int> pick_v(phs.consonants, phs.consonants + phs.vowels - 1);
  std::uniform_int_distribution<int> pick_tone(0, spec.tones - 1);
  std::bernoulli_distribution has_coda(0.4);
  for (int w = 0; w < W; ++w) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw ConfigError("synth spec: cannot find enough distinct syllables");
      std::vector<int> pron{pick_c(rng), pick_v(rng)};
      if (has_coda(rng)) pron.push_back(pick_c(rng));
      const std::string s = render(pron);
      if (used.insert(s).second) {
        base_pron[static_cast<std::size_t>(w)] = pron;
        break;
      }
    }
    base_tone[static_cast<std::size_t>(w)] = pick_tone(rng);
  }

  const Mat<double> proto = random_matrix(spec.phonemes, 1.0);
  const Mat<double> tone_proto = random_matrix(spec.tones, spec.tone_scale);

  // Per-dialect lexicon and acoustics.
  Lexicon lexicon;
  std::vector<std::vector<std::vector<int>>> pron_k(static_cast<std::size_t>(K));
  std::vector<std::vector<int>> tone_k(static_cast<std::size_t>(K));
  std::vector<Mat<double>> proto_k;
  for (int k = 0; k < K; ++k) {
    DialectLexicon lex;
    auto& pron = pron_k[static_cast<std::size_t>(k)];
    auto& tone = tone_k[static_cast<std::size_t>(k)];
    pron = base_pron;
    tone = base_tone;
    std::vector<int> order(static_cast<std::size_t>(W));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const int n_swap = static_cast<int>(std::lround(spec.swap_of(k) * W));
    lex.logograph.resize(static_cast<std::size_t>(W));
    for (int w = 0; w < W; ++w) lex.logograph[static_cast<std::size_t>(w)] = encode_utf8(0x4E00 + static_cast<std::uint32_t>(w));
    // Swapped words take a dialect-specific character and the pronunciation
    // of the next swapped word (a cyclic shift), so the same syllable maps to
    // different words in different dialects.
    for (int i = 0; i < n_swap; ++i) {
      const int w = order[static_cast<std::size_t>(i)];
      lex.logograph[static_cast<std::size_t>(w)] =
          encode_utf8(0x4E00 + 1000 + static_cast<std::uint32_t>(k * W + w));
      if (n_swap >= 2) {
        const int donor = order[static_cast<std::size_t>((i + 1) % n_swap)];
        pron[static_cast<std::size_t>(w)] = base_pron[static_cast<std::size_t>(donor)];
        tone[static_cast<std::size_t>(w)] = base_tone[static_cast<std::size_t>(donor)];
      }
    }
    // Written tone labels are a dialect-specific relabeling of the
    // underlying (acoustic) tone.
    std::vector<int> relabel(static_cast<std::size_t>(spec.tones));
    std::iota(relabel.begin(), relabel.end(), 0);
    std::shuffle(relabel.begin(), relabel.end(), rng);
    for (int w = 0; w < W; ++w) {
      const std::string syl = render(pron[static_cast<std::size_t>(w)]);
      lex.syllable.push_back(syl);
      lex.tone_label.push_back(relabel[static_cast<std::size_t>(tone[static_cast<std::size_t>(w)])] + 1);
      lex.word_of_syllable[syl] = w;
    }
    const double shift = spec.shift_of(k);
    const Mat<double> global = random_matrix(1, 1.0);
    const Mat<double> local = random_matrix(spec.phonemes, 0.5);
    Mat<double> pk = proto;
    for (int ph = 0; ph < spec.phonemes; ++ph) pk.row(ph) += shift * (global.row(0) + local.row(ph));
    proto_k.push_back(std::move(pk));
    lexicon.dialects.push_back(std::move(lex));
  }

  Dataset ds;
  ds.dialect_names = spec.dialect_names;
  ds.feature_dim = F;
  std::uniform_int_distribution<int> pick_len(spec.min_words, spec.max_words);
  std::uniform_int_distribution<int> pick_word(0, W - 1);
  std::uniform_int_distribution<int> pick_dur(spec.min_frames_per_phoneme, spec.max_frames_per_phoneme);

  struct SplitPlan {
    const char* name;
    int speakers;
    std::vector<Utterance>* out;
  };
  const SplitPlan plans[] = {{"train", spec.train_speakers, &ds.train},
                             {"dev", spec.dev_speakers, &ds.dev},
                             {"test", spec.test_speakers, &ds.test}};
  for (const auto& plan : plans) {
    for (int k = 0; k < K; ++k) {
      const auto& lex = lexicon.dialects[static_cast<std::size_t>(k)];
      for (int s = 0; s < plan.speakers; ++s) {
        char spk[64];
        std::snprintf(spk, sizeof spk, "%s-%s-s%02d", spec.dialect_names[static_cast<std::size_t>(k)].c_str(),
                      plan.name, s);
        const Mat<double> offset = random_matrix(1, spec.speaker_offset);
        for (int n = 0; n < spec.utterances_per_speaker; ++n) {
          Utterance utt;
          char id[96];
          std::snprintf(id, sizeof id, "%s-u%03d", spk, n);
          utt.id = id;
          utt.speaker = spk;
          utt.dialect = k;
          utt.split = plan.name;
          const int len = pick_len(rng);
          std::vector<int> words;
          std::vector<Mat<double>> frames;
          Index total = 0;
          for (int i = 0; i < len; ++i) {
            const int w = pick_word(rng);
            words.push_back(w);
            if (i) utt.transcript_p += ' ';
            utt.transcript_h += lex.logograph[static_cast<std::size_t>(w)];
            utt.transcript_p += lex.syllable[static_cast<std::size_t>(w)] +
                                std::to_string(lex.tone_label[static_cast<std::size_t>(w)]);
            const int tone = tone_k[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)];
            for (int ph : pron_k[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)]) {
              const int dur = pick_dur(rng);
              Mat<double> seg(dur, F);
              for (int f = 0; f < dur; ++f) {
                seg.row(f) = proto_k[static_cast<std::size_t>(k)].row(ph) + offset.row(0);
                if (phs.is_vowel(ph)) seg.row(f) += tone_proto.row(tone);
                for (int j = 0; j < F; ++j) seg(f, j) += spec.noise * gauss(rng);
              }
              total += dur;
              frames.push_back(std::move(seg));
            }
          }
          utt.features.resize(total, F);
          Index r = 0;
          for (const auto& seg : frames) {
            utt.features.middleRows(r, seg.rows()) = seg.cast<float>();
            r += seg.rows();
          }
          utt.audio_seconds = static_cast<double>(total) * kFrameShift;
          ds.words[utt.id] = std::move(words);
          plan.out->push_back(std::move(utt));
        }
      }
    }
  }
  ds.lexicon = std::move(lexicon);
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw DataError("cannot write manifest in " + dir.string());
  json header = {{"format", kDataVersion}, {"dialects", dataset.dialect_names}, {"feature_dim", dataset.feature_dim}};
  manifest << header.dump() << '\n';
  for (const char* name : {"train", "dev", "test"}) {
    const std::string file = std::string(name) + ".f32";
    std::ofstream feats(dir / file, std::ios::binary);
    if (!feats) throw DataError("cannot write feature file " + (dir / file).string());
    std::uint64_t offset = 0;
    for (const Utterance& u : dataset.split(name)) {
      json rec = {{"id", u.id},
                  {"speaker", u.speaker},
                  {"dialect", dataset.dialect_names.at(static_cast<std::size_t>(u.dialect))},
                  {"split", name},
                  {"frames", u.features.rows()},
                  {"audio_seconds", u.audio_seconds},
                  {"transcript_h", u.transcript_h},
                  {"transcript_p", u.transcript_p},
                  {"feature_file", file},
                  {"byte_offset", offset}};
      manifest << rec.dump() << '\n';
      for (Index i = 0; i < u.features.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(u.features.data()[i]);
        const char b[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                           static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
        feats.write(b, 4);
      }
      offset += static_cast<std::uint64_t>(u.features.size()) * 4;
    }
    if (!feats) throw DataError("failed writing " + (dir / file).string());
  }
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw DataError("no manifest.jsonl in " + dir.string());
  std::string line;
  if (!std::getline(manifest, line)) throw SchemaError("empty manifest in " + dir.string());
  Dataset ds;
  try {
    const json header = json::parse(line);
    if (header.value("format", std::string()) != kDataVersion) {
      throw SchemaError("manifest header: expected format '" + std::string(kDataVersion) + "'");
    }
    ds.dialect_names = header.at("dialects").get<std::vector<std::string>>();
    ds.feature_dim = header.at("feature_dim").get<int>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("manifest header: ") + e.what());
  }
  if (ds.feature_dim < 1) throw SchemaError("manifest header: feature_dim must be positive");

  std::map<std::string, std::vector<unsigned char>> blobs;
  auto blob = [&](const std::string& file) -> const std::vector<unsigned char>& {
    auto it = blobs.find(file);
    if (it != blobs.end()) return it->second;
    std::ifstream is(dir / file, std::ios::binary);
    if (!is) throw IntegrityError("missing feature file " + (dir / file).string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return blobs.emplace(file, std::move(bytes)).first->second;
  };

  int lineno = 1;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    Utterance u;
    std::string file, dialect;
    std::uint64_t offset = 0;
    Index frames = 0;
    try {
      const json rec = json::parse(line);
      u.id = rec.at("id").get<std::string>();
      u.speaker = rec.at("speaker").get<std::string>();
      dialect = rec.at("dialect").get<std::string>();
      u.split = rec.at("split").get<std::string>();
      frames = rec.at("frames").get<Index>();
      u.audio_seconds = rec.at("audio_seconds").get<double>();
      u.transcript_h = rec.at("transcript_h").get<std::string>();
      u.transcript_p = rec.at("transcript_p").get<std::string>();
      file = rec.at("feature_file").get<std::string>();
      offset = rec.at("byte_offset").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw SchemaError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    u.dialect = ds.dialect_index(dialect);
    if (u.dialect < 0) throw SchemaError("utterance " + u.id + ": unknown dialect '" + dialect + "'");
    if (u.split != "train" && u.split != "dev" && u.split != "test") {
      throw SchemaError("utterance " + u.id + ": unknown split '" + u.split + "'");
    }
    if (frames < 0) throw SchemaError("utterance " + u.id + ": negative frame count");
    const auto& bytes = blob(file);
    const std::uint64_t need = static_cast<std::uint64_t>(frames) * static_cast<std::uint64_t>(ds.feature_dim) * 4;
    if (offset + need > bytes.size()) {
      throw IntegrityError("utterance " + u.id + ": feature data truncated in " + file);
    }
    u.features.resize(frames, ds.feature_dim);
    const unsigned char* p = bytes.data() + offset;
    for (Index i = 0; i < u.features.size(); ++i, p += 4) {
      const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                 (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
      u.features.data()[i] = std::bit_cast<float>(bits);
    }
    ds.split(u.split).push_back(std::move(u));
  }
  return ds;
}

Dataset subset_by_dialect(const Dataset& dataset, const std::string& dialect) {
  const int d = dataset.dialect_index(dialect);
  if (d < 0) throw DataError("subset_by_dialect: unknown dialect '" + dialect + "'");
  Dataset out;
  out.dialect_names = dataset.dialect_names;
  out.feature_dim = dataset.feature_dim;
  out.lexicon = dataset.lexicon;
  for (const char* name : {"train", "dev", "test"}) {
    for (const Utterance& u : dataset.split(name)) {
      if (u.dialect != d) continue;
      out.split(name).push_back(u);
      auto it = dataset.words.find(u.id);
      if (it != dataset.words.end()) out.words.insert(*it);
    }
  }
  if (out.train.empty() && out.dev.empty() && out.test.empty()) {
    throw DataError("subset_by_dialect: no utterances for dialect '" + dialect + "'");
  }
  return out;
}

std::vector<std::string> split_code_points(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t n = 1;
    if (c >= 0xF0) {
      n = 4;
    } else if (c >= 0xE0) {
      n = 3;
    } else if (c >= 0xC0) {
      n = 2;
    }
    n = std::min(n, s.size() - i);
    out.push_back(s.substr(i, n));
    i += n;
  }
  return out;
}

std::vector<std::string> split_whitespace(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::string strip_tone(const std::string& syllable) {
  std::size_t end = syllable.size();
  while (end > 0 && std::isdigit(static_cast<unsigned char>(syllable[end - 1]))) --end;
  return syllable.substr(0, end);
}

}  // namespace tk::data
