#pragma once

#include <optional>
#include <string>
#include <vector>

namespace slucl {

enum class TokenRole { kPad, kBos, kEos, kSep, kIntent, kWord };

// Word-level vocabulary with one reserved token per intent class plus the
// PAD/BOS/EOS/SEP specials. Extended transcripts follow the convention
// [intent token, SEP, word tokens...].
class Vocabulary {
 public:
  Vocabulary() = default;
  static Vocabulary build(int num_intents, const std::vector<std::string>& words);

  int size() const { return static_cast<int>(tokens_.size()); }
  int num_intents() const { return num_intents_; }

  int pad_id() const { return 0; }
  int bos_id() const { return 1; }
  int eos_id() const { return 2; }
  int sep_id() const { return 3; }
  int intent_token(int intent_id) const;
  // Intent id when the token is an intent token, nullopt otherwise.
  std::optional<int> intent_of_token(int token_id) const;

  const std::string& token_text(int token_id) const;
  TokenRole token_role(int token_id) const;
  int word_id(const std::string& word) const;  // throws on unknown words
  bool has_word(const std::string& word) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  bool operator==(const Vocabulary& other) const = default;

 private:
  int num_intents_ = 0;
  std::vector<std::string> tokens_;
  std::vector<TokenRole> roles_;
};

// [intent_token(intent_id), SEP, word ids...]; throws on unknown words.
std::vector<int> tokenize(const Vocabulary& vocab, int intent_id,
                          const std::vector<std::string>& words);

struct Detokenized {
  int intent_id = -1;
  std::vector<std::string> words;
};

// Inverse of tokenize; rejects sequences that do not follow the extended
// transcript convention.
Detokenized detokenize(const Vocabulary& vocab, const std::vector<int>& sequence);

}  // namespace slucl
