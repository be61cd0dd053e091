#include "slucl/vocab.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace slucl {

namespace {

const char* role_name(TokenRole role) {
  switch (role) {
    case TokenRole::kPad: return "pad";
    case TokenRole::kBos: return "bos";
    case TokenRole::kEos: return "eos";
    case TokenRole::kSep: return "sep";
    case TokenRole::kIntent: return "intent";
    case TokenRole::kWord: return "word";
  }
  return "unknown";
}

TokenRole role_from_name(const std::string& name) {
  if (name == "pad") return TokenRole::kPad;
  if (name == "bos") return TokenRole::kBos;
  if (name == "eos") return TokenRole::kEos;
  if (name == "sep") return TokenRole::kSep;
  if (name == "intent") return TokenRole::kIntent;
  if (name == "word") return TokenRole::kWord;
  throw std::runtime_error("vocabulary: unknown role '" + name + "'");
}

}  // namespace

Vocabulary Vocabulary::build(int num_intents, const std::vector<std::string>& words) {
  if (num_intents < 1) throw std::invalid_argument("vocabulary: need at least one intent");
  Vocabulary v;
  v.num_intents_ = num_intents;
  v.tokens_ = {"<pad>", "<bos>", "<eos>", "<sep>"};
  v.roles_ = {TokenRole::kPad, TokenRole::kBos, TokenRole::kEos, TokenRole::kSep};
  for (int i = 0; i < num_intents; ++i) {
    v.tokens_.push_back("<int" + std::to_string(i) + ">");
    v.roles_.push_back(TokenRole::kIntent);
  }
  for (const auto& w : words) {
    for (const auto& existing : v.tokens_) {
      if (existing == w) throw std::invalid_argument("vocabulary: duplicate token '" + w + "'");
    }
    v.tokens_.push_back(w);
    v.roles_.push_back(TokenRole::kWord);
  }
  return v;
}

int Vocabulary::intent_token(int intent_id) const {
  if (intent_id < 0 || intent_id >= num_intents_) {
    throw std::invalid_argument("vocabulary: intent id " + std::to_string(intent_id) +
                                " out of range");
  }
  return 4 + intent_id;
}

std::optional<int> Vocabulary::intent_of_token(int token_id) const {
  if (token_id >= 4 && token_id < 4 + num_intents_) return token_id - 4;
  return std::nullopt;
}

const std::string& Vocabulary::token_text(int token_id) const {
  if (token_id < 0 || token_id >= size()) {
    throw std::invalid_argument("vocabulary: token id " + std::to_string(token_id) +
                                " out of range");
  }
  return tokens_[static_cast<std::size_t>(token_id)];
}

TokenRole Vocabulary::token_role(int token_id) const {
  token_text(token_id);  // range check
  return roles_[static_cast<std::size_t>(token_id)];
}

int Vocabulary::word_id(const std::string& word) const {
  for (int i = 4 + num_intents_; i < size(); ++i) {
    if (tokens_[static_cast<std::size_t>(i)] == word) return i;
  }
  throw std::invalid_argument("vocabulary: unknown word '" + word + "'");
}

bool Vocabulary::has_word(const std::string& word) const {
  for (int i = 4 + num_intents_; i < size(); ++i) {
    if (tokens_[static_cast<std::size_t>(i)] == word) return true;
  }
  return false;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("vocabulary: cannot write " + path);
  out << "slucl-vocab v1 intents " << num_intents_ << "\n";
  for (int i = 0; i < size(); ++i) {
    out << i << "\t" << tokens_[static_cast<std::size_t>(i)] << "\t"
        << role_name(roles_[static_cast<std::size_t>(i)]) << "\n";
  }
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("vocabulary: cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("vocabulary: empty file " + path);
  std::istringstream header(line);
  std::string magic, version, intents_kw;
  int num_intents = 0;
  header >> magic >> version >> intents_kw >> num_intents;
  if (magic != "slucl-vocab" || version != "v1" || intents_kw != "intents") {
    throw std::runtime_error("vocabulary: bad header in " + path);
  }
  Vocabulary v;
  v.num_intents_ = num_intents;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int id = 0;
    std::string text, role;
    ls >> id >> text >> role;
    if (!ls) throw std::runtime_error("vocabulary: bad line '" + line + "'");
    if (id != static_cast<int>(v.tokens_.size())) {
      throw std::runtime_error("vocabulary: non-contiguous ids in " + path);
    }
    v.tokens_.push_back(text);
    v.roles_.push_back(role_from_name(role));
  }
  return v;
}

std::vector<int> tokenize(const Vocabulary& vocab, int intent_id,
                          const std::vector<std::string>& words) {
  std::vector<int> out;
  out.reserve(words.size() + 2);
  out.push_back(vocab.intent_token(intent_id));
  out.push_back(vocab.sep_id());
  for (const auto& w : words) out.push_back(vocab.word_id(w));
  return out;
}

Detokenized detokenize(const Vocabulary& vocab, const std::vector<int>& sequence) {
  if (sequence.size() < 2) {
    throw std::invalid_argument("detokenize: sequence shorter than [intent, sep]");
  }
  auto intent = vocab.intent_of_token(sequence[0]);
  if (!intent) throw std::invalid_argument("detokenize: position 0 is not an intent token");
  if (sequence[1] != vocab.sep_id()) {
    throw std::invalid_argument("detokenize: position 1 is not the separator");
  }
  Detokenized result;
  result.intent_id = *intent;
  for (std::size_t i = 2; i < sequence.size(); ++i) {
    if (vocab.token_role(sequence[i]) != TokenRole::kWord) {
      throw std::invalid_argument("detokenize: interior token is not a word");
    }
    result.words.push_back(vocab.token_text(sequence[i]));
  }
  return result;
}

}  // namespace slucl
