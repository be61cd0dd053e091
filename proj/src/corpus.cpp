#include "slucl/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace slucl {

namespace {

using nlohmann::json;

struct IntentTemplate {
  int length = 0;               // slots incl. keyword
  int keyword_token = -1;       // vocabulary id
  std::vector<std::vector<int>> slot_pools;  // per non-keyword slot
};

std::vector<int> sample_counts(const CorpusSpec& spec, Rng& rng) {
  if (!spec.samples_per_intent.empty()) {
    if (static_cast<int>(spec.samples_per_intent.size()) != spec.num_intents) {
      throw std::invalid_argument("corpus: samples_per_intent length must equal num_intents");
    }
    return spec.samples_per_intent;
  }
  std::vector<int> counts(spec.num_intents);
  const double lo = std::log(static_cast<double>(spec.min_samples_per_intent));
  const double hi = std::log(static_cast<double>(spec.max_samples_per_intent));
  for (int i = 0; i < spec.num_intents; ++i) {
    counts[i] = static_cast<int>(std::floor(std::exp(rng.uniform(lo, hi))));
    counts[i] = std::clamp(counts[i], spec.min_samples_per_intent, spec.max_samples_per_intent);
  }
  return counts;
}

void validate(const CorpusSpec& spec) {
  if (spec.num_intents < 2) throw std::invalid_argument("corpus: num_intents must be >= 2");
  if (spec.min_words < 2 || spec.max_words < spec.min_words) {
    throw std::invalid_argument("corpus: template length range is degenerate");
  }
  if (spec.filler_pools < spec.max_words - 1) {
    throw std::invalid_argument("corpus: not enough filler pools for max_words");
  }
  if (spec.pool_size < 1 || spec.d_in < 1 || spec.frames_per_word < 1) {
    throw std::invalid_argument("corpus: degenerate dimensions");
  }
  if (spec.noise_std < 0.0) throw std::invalid_argument("corpus: negative noise_std");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw std::invalid_argument("corpus: train_fraction must be in (0, 1)");
  }
  if (!spec.samples_per_intent.empty()) {
    for (int n : spec.samples_per_intent) {
      if (n < 2) throw std::invalid_argument("corpus: every intent needs >= 2 samples");
    }
  } else if (spec.min_samples_per_intent < 2 ||
             spec.max_samples_per_intent < spec.min_samples_per_intent) {
    throw std::invalid_argument("corpus: bad samples_per_intent range");
  }
}

}  // namespace

std::vector<int> Corpus::extended_transcript(const PairedExample& ex) const {
  std::vector<int> out;
  out.reserve(ex.word_ids.size() + 2);
  out.push_back(vocab.intent_token(ex.intent_id));
  out.push_back(vocab.sep_id());
  out.insert(out.end(), ex.word_ids.begin(), ex.word_ids.end());
  return out;
}

Corpus generate_corpus(const CorpusSpec& spec) {
  validate(spec);

  // Word list: filler pools first, then one keyword per intent.
  std::vector<std::string> words;
  for (int p = 0; p < spec.filler_pools; ++p) {
    for (int k = 0; k < spec.pool_size; ++k) {
      words.push_back("w" + std::to_string(p) + "_" + std::to_string(k));
    }
  }
  for (int i = 0; i < spec.num_intents; ++i) {
    words.push_back("kw" + std::to_string(i));
  }

  Corpus corpus;
  corpus.spec = spec;
  corpus.vocab = Vocabulary::build(spec.num_intents, words);

  const int first_word_id = 4 + spec.num_intents;
  auto pool_token = [&](int pool, int k) { return first_word_id + pool * spec.pool_size + k; };
  const int first_keyword_id = first_word_id + spec.filler_pools * spec.pool_size;

  Rng structure_rng(derive_seed(spec.seed, "corpus-structure"));
  const std::vector<int> counts = sample_counts(spec, structure_rng);

  std::vector<IntentTemplate> templates(spec.num_intents);
  for (int i = 0; i < spec.num_intents; ++i) {
    IntentTemplate t;
    t.length = spec.min_words +
               structure_rng.below_int(spec.max_words - spec.min_words + 1);
    t.keyword_token = first_keyword_id + i;
    for (int s = 1; s < t.length; ++s) {
      std::vector<int> pool(spec.pool_size);
      for (int k = 0; k < spec.pool_size; ++k) pool[k] = pool_token(s - 1, k);
      t.slot_pools.push_back(std::move(pool));
    }
    templates[i] = std::move(t);
    corpus.max_words = std::max(corpus.max_words, templates[i].length);
  }

  // Fixed prototype frame block per vocabulary word, one RNG stream each so
  // generation order is irrelevant.
  const int block = spec.frames_per_word * spec.d_in;
  std::vector<std::vector<double>> prototypes(words.size());
  for (std::size_t w = 0; w < words.size(); ++w) {
    Rng proto_rng(derive_seed(spec.seed, "corpus-prototype", w));
    prototypes[w].resize(static_cast<std::size_t>(block));
    for (double& v : prototypes[w]) v = proto_rng.gauss(0.0, 1.0);
  }
  auto word_prototype = [&](int token_id) -> const std::vector<double>& {
    return prototypes[static_cast<std::size_t>(token_id - first_word_id)];
  };

  corpus.intent_train_counts.assign(spec.num_intents, 0);
  corpus.intent_test_counts.assign(spec.num_intents, 0);

  int global_id = 0;
  for (int i = 0; i < spec.num_intents; ++i) {
    const IntentTemplate& t = templates[i];
    const int n = counts[i];
    const int n_train = std::clamp(static_cast<int>(std::llround(spec.train_fraction * n)),
                                   1, n - 1);
    for (int local = 0; local < n; ++local, ++global_id) {
      Rng ex_rng(derive_seed(spec.seed, "corpus-example", static_cast<std::uint64_t>(global_id)));
      PairedExample ex;
      ex.example_id = global_id;
      ex.intent_id = i;
      ex.word_ids.push_back(t.keyword_token);
      for (const auto& pool : t.slot_pools) {
        ex.word_ids.push_back(pool[ex_rng.below_int(static_cast<int>(pool.size()))]);
      }
      ex.audio.dim = spec.d_in;
      ex.audio.frames.reserve(static_cast<std::size_t>(t.length * block));
      for (int w : ex.word_ids) {
        const auto& proto = word_prototype(w);
        for (double v : proto) {
          ex.audio.frames.push_back(v + ex_rng.gauss(0.0, spec.noise_std));
        }
      }
      if (local < n_train) {
        corpus.train.push_back(std::move(ex));
        corpus.intent_train_counts[i]++;
      } else {
        corpus.test.push_back(std::move(ex));
        corpus.intent_test_counts[i]++;
      }
    }
  }
  return corpus;
}

FeatureSequence spec_aug(const FeatureSequence& x, Rng& rng) {
  FeatureSequence out = x;  // copy semantics; the caller's tensor is untouched
  const int u = x.length();
  const int d = x.dim;
  if (u == 0 || d == 0) return out;

  // Frequency-band drop analogue. Draw order is fixed for determinism.
  if (rng.uniform() < 0.5) {
    const int n_freq = 1 + rng.below_int(2);
    for (int k = 0; k < n_freq; ++k) {
      const int band = rng.below_int(d);
      for (int t = 0; t < u; ++t) out.frames[static_cast<std::size_t>(t) * d + band] = 0.0;
    }
  }
  // Time-chunk drop.
  if (rng.uniform() < 0.5) {
    const int n_chunks = 1 + rng.below_int(3);
    for (int k = 0; k < n_chunks; ++k) {
      const int len = static_cast<int>(std::floor(rng.uniform(0.0, 0.05 * u)));
      if (len <= 0) continue;
      const int start = rng.below_int(u - len + 1);
      for (int t = start; t < start + len; ++t) {
        for (int j = 0; j < d; ++j) out.frames[static_cast<std::size_t>(t) * d + j] = 0.0;
      }
    }
  }
  return out;
}

namespace {

json example_to_json(const PairedExample& ex, std::size_t audio_offset) {
  json j;
  j["id"] = ex.example_id;
  j["intent"] = ex.intent_id;
  j["words"] = ex.word_ids;
  j["frames"] = ex.audio.length();
  j["audio_offset"] = audio_offset;  // doubles, not bytes
  return j;
}

void append_audio(std::string& blob, const FeatureSequence& audio) {
  for (double v : audio.frames) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int b = 0; b < 8; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
}

PairedExample example_from_json(const json& j, const std::string& blob, int d_in) {
  PairedExample ex;
  ex.example_id = j.at("id").get<int>();
  ex.intent_id = j.at("intent").get<int>();
  ex.word_ids = j.at("words").get<std::vector<int>>();
  const int frames = j.at("frames").get<int>();
  const std::size_t offset = j.at("audio_offset").get<std::size_t>();
  ex.audio.dim = d_in;
  const std::size_t count = static_cast<std::size_t>(frames) * static_cast<std::size_t>(d_in);
  if ((offset + count) * 8 > blob.size()) throw std::runtime_error("corpus: audio blob truncated");
  ex.audio.frames.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) {
      bits = (bits << 8) | static_cast<unsigned char>(blob[(offset + i) * 8 + b]);
    }
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    ex.audio.frames[i] = v;
  }
  return ex;
}

}  // namespace

void save_corpus(const std::string& dir, const Corpus& corpus) {
  std::filesystem::create_directories(dir);

  std::string blob;
  json manifest;
  manifest["format"] = "slucl-corpus v1";
  json spec;
  spec["num_intents"] = corpus.spec.num_intents;
  spec["min_samples_per_intent"] = corpus.spec.min_samples_per_intent;
  spec["max_samples_per_intent"] = corpus.spec.max_samples_per_intent;
  spec["samples_per_intent"] = corpus.spec.samples_per_intent;
  spec["min_words"] = corpus.spec.min_words;
  spec["max_words"] = corpus.spec.max_words;
  spec["filler_pools"] = corpus.spec.filler_pools;
  spec["pool_size"] = corpus.spec.pool_size;
  spec["d_in"] = corpus.spec.d_in;
  spec["frames_per_word"] = corpus.spec.frames_per_word;
  spec["noise_std"] = corpus.spec.noise_std;
  spec["train_fraction"] = corpus.spec.train_fraction;
  spec["seed"] = corpus.spec.seed;
  manifest["spec"] = spec;
  manifest["max_words"] = corpus.max_words;
  manifest["intent_train_counts"] = corpus.intent_train_counts;
  manifest["intent_test_counts"] = corpus.intent_test_counts;

  json train = json::array();
  for (const auto& ex : corpus.train) {
    train.push_back(example_to_json(ex, blob.size() / 8));
    append_audio(blob, ex.audio);
  }
  json test = json::array();
  for (const auto& ex : corpus.test) {
    test.push_back(example_to_json(ex, blob.size() / 8));
    append_audio(blob, ex.audio);
  }
  manifest["train"] = std::move(train);
  manifest["test"] = std::move(test);

  corpus.vocab.save(dir + "/vocab.txt");
  std::ofstream mf(dir + "/corpus.json", std::ios::binary);
  if (!mf) throw std::runtime_error("corpus: cannot write " + dir + "/corpus.json");
  mf << manifest.dump(1) << "\n";
  std::ofstream bf(dir + "/audio.bin", std::ios::binary);
  if (!bf) throw std::runtime_error("corpus: cannot write " + dir + "/audio.bin");
  bf.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

Corpus load_corpus(const std::string& dir) {
  std::ifstream mf(dir + "/corpus.json", std::ios::binary);
  if (!mf) throw std::runtime_error("corpus: cannot read " + dir + "/corpus.json");
  json manifest = json::parse(mf);
  if (manifest.at("format").get<std::string>() != "slucl-corpus v1") {
    throw std::runtime_error("corpus: unsupported format in " + dir);
  }

  std::ifstream bf(dir + "/audio.bin", std::ios::binary);
  if (!bf) throw std::runtime_error("corpus: cannot read " + dir + "/audio.bin");
  std::string blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());

  Corpus corpus;
  const json& spec = manifest.at("spec");
  corpus.spec.num_intents = spec.at("num_intents").get<int>();
  corpus.spec.min_samples_per_intent = spec.at("min_samples_per_intent").get<int>();
  corpus.spec.max_samples_per_intent = spec.at("max_samples_per_intent").get<int>();
  corpus.spec.samples_per_intent = spec.at("samples_per_intent").get<std::vector<int>>();
  corpus.spec.min_words = spec.at("min_words").get<int>();
  corpus.spec.max_words = spec.at("max_words").get<int>();
  corpus.spec.filler_pools = spec.at("filler_pools").get<int>();
  corpus.spec.pool_size = spec.at("pool_size").get<int>();
  corpus.spec.d_in = spec.at("d_in").get<int>();
  corpus.spec.frames_per_word = spec.at("frames_per_word").get<int>();
  corpus.spec.noise_std = spec.at("noise_std").get<double>();
  corpus.spec.train_fraction = spec.at("train_fraction").get<double>();
  corpus.spec.seed = spec.at("seed").get<std::uint64_t>();
  corpus.max_words = manifest.at("max_words").get<int>();
  corpus.intent_train_counts = manifest.at("intent_train_counts").get<std::vector<int>>();
  corpus.intent_test_counts = manifest.at("intent_test_counts").get<std::vector<int>>();
  corpus.vocab = Vocabulary::load(dir + "/vocab.txt");

  for (const auto& j : manifest.at("train")) {
    corpus.train.push_back(example_from_json(j, blob, corpus.spec.d_in));
  }
  for (const auto& j : manifest.at("test")) {
    corpus.test.push_back(example_from_json(j, blob, corpus.spec.d_in));
  }
  return corpus;
}

}  // namespace slucl
