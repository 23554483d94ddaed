#include "covtriage/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace covtriage {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_digit(unsigned char c) { return std::isdigit(c) != 0; }

// Treat multi-byte UTF-8 units as letters so offsets stay byte-accurate.
bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

bool is_sentence_end(char c) { return c == '.' || c == '!' || c == '?'; }

const std::array<const char*, 12> kAbbreviations = {"e.g.", "i.e.", "etc.", "dr.",  "mr.", "mrs.",
                                                    "ms.",  "vs.",  "st.",  "no.", "approx.", "c."};

/// True when the sentence-final candidate at `pos` (a '.') closes an
/// abbreviation from the guard list.
bool ends_abbreviation(const std::string& text, std::size_t pos) {
  for (const char* abbr : kAbbreviations) {
    std::size_t n = std::char_traits<char>::length(abbr);
    if (pos + 1 < n) continue;
    std::size_t start = pos + 1 - n;
    bool match = true;
    for (std::size_t i = 0; i < n; ++i) {
      char c = text[start + i];
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      if (c != abbr[i]) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    // The abbreviation must start a token: preceded by start-of-text or a
    // non-word character.
    if (start == 0 || !is_word_char(static_cast<unsigned char>(text[start - 1]))) return true;
  }
  return false;
}

std::vector<Token> tokenize_range(const std::string& text, std::size_t begin, std::size_t end) {
  std::vector<Token> tokens;
  std::size_t i = begin;
  while (i < end) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (is_word_char(c)) {
      ++i;
      while (i < end) {
        unsigned char d = static_cast<unsigned char>(text[i]);
        if (is_word_char(d)) {
          ++i;
        } else if (d == '.' && i + 1 < end && is_digit(static_cast<unsigned char>(text[i + 1])) &&
                   i > start && is_digit(static_cast<unsigned char>(text[i - 1]))) {
          // decimal point inside a number, e.g. "1.42"
          i += 2;
        } else {
          break;
        }
      }
    } else if (c == '\'' && i + 1 < end &&
               is_word_char(static_cast<unsigned char>(text[i + 1]))) {
      // contraction suffix: "don't" -> "don" + "'t"
      ++i;
      while (i < end && is_word_char(static_cast<unsigned char>(text[i]))) ++i;
    } else {
      ++i;  // single punctuation character
    }
    tokens.push_back(Token{{start, i}, text.substr(start, i - start)});
  }
  return tokens;
}

}  // namespace

std::vector<Sentence> split_and_tokenize(const std::string& text) {
  std::vector<Sentence> sentences;
  std::size_t sent_begin = 0;
  std::size_t i = 0;
  auto flush = [&](std::size_t end) {
    // trim surrounding whitespace from the sentence range
    std::size_t b = sent_begin;
    while (b < end && is_space(static_cast<unsigned char>(text[b]))) ++b;
    std::size_t e = end;
    while (e > b && is_space(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) {
      Sentence s;
      s.char_range = {b, e};
      s.tokens = tokenize_range(text, b, e);
      if (!s.tokens.empty()) sentences.push_back(std::move(s));
    }
    sent_begin = end;
  };
  while (i < text.size()) {
    char c = text[i];
    if (is_sentence_end(c)) {
      bool at_end = i + 1 >= text.size();
      bool before_space = !at_end && is_space(static_cast<unsigned char>(text[i + 1]));
      if ((at_end || before_space) && !(c == '.' && ends_abbreviation(text, i))) {
        flush(i + 1);
        i = sent_begin;
        continue;
      }
    }
    ++i;
  }
  flush(text.size());
  return sentences;
}

std::vector<std::set<std::string>> dictionary_flags(const Sentence& sentence,
                                                    const std::vector<const Lexicon*>& lexicons) {
  std::vector<std::set<std::string>> flags(sentence.tokens.size());
  std::vector<std::string> lower(sentence.tokens.size());
  for (std::size_t t = 0; t < sentence.tokens.size(); ++t) {
    lower[t] = to_lower(sentence.tokens[t].surface);
  }
  for (const Lexicon* lex : lexicons) {
    // Pre-split phrases into token words; longest match first means trying
    // the longest phrase length at every start position.
    std::size_t max_words = 1;
    std::vector<std::vector<std::string>> phrases;
    for (const std::string& p : lex->entries) {
      std::vector<std::string> words;
      std::size_t pos = 0;
      while (pos < p.size()) {
        std::size_t sp = p.find(' ', pos);
        if (sp == std::string::npos) sp = p.size();
        if (sp > pos) words.push_back(p.substr(pos, sp - pos));
        pos = sp + 1;
      }
      if (words.empty()) continue;
      max_words = std::max(max_words, words.size());
      phrases.push_back(std::move(words));
    }
    std::size_t t = 0;
    while (t < sentence.tokens.size()) {
      std::size_t best_len = 0;
      for (const auto& words : phrases) {
        if (words.size() <= best_len || t + words.size() > sentence.tokens.size()) continue;
        bool match = true;
        for (std::size_t k = 0; k < words.size(); ++k) {
          if (lower[t + k] != words[k]) {
            match = false;
            break;
          }
        }
        if (match) best_len = words.size();
      }
      if (best_len > 0) {
        for (std::size_t k = 0; k < best_len; ++k) flags[t + k].insert(lex->category);
        t += best_len;  // no overlaps within one category
      } else {
        ++t;
      }
    }
  }
  return flags;
}

std::vector<std::set<std::string>> semantic_flags(const Sentence& sentence,
                                                  const std::vector<const Lexicon*>& semlex) {
  return dictionary_flags(sentence, semlex);
}

std::vector<TokenFlags> token_flags(const Sentence& sentence, const LexiconSet& lexicons) {
  auto dict = dictionary_flags(sentence, lexicons.dictionary());
  auto sem = semantic_flags(sentence, lexicons.semantic());
  std::vector<TokenFlags> out(sentence.tokens.size());
  const std::string sem_prefix = "SemType:";
  for (std::size_t t = 0; t < sentence.tokens.size(); ++t) {
    out[t].dict = std::move(dict[t]);
    for (const std::string& s : sem[t]) {
      // strip the "SemType:" category prefix for feature emission
      out[t].sem.insert(s.rfind(sem_prefix, 0) == 0 ? s.substr(sem_prefix.size()) : s);
    }
  }
  return out;
}

std::string word_shape(const std::string& surface) {
  std::string shape;
  for (unsigned char c : surface) {
    if (std::isupper(c)) {
      shape += 'X';
    } else if (std::islower(c) || c >= 0x80) {
      shape += 'x';
    } else if (std::isdigit(c)) {
      shape += '9';
    } else if (c == '-' || c == '.' || c == '\'') {
      shape += static_cast<char>(c);
    } else {
      shape += '#';
    }
  }
  return shape;
}

std::vector<TokenFeatures> featurize(const Sentence& sentence,
                                     const std::vector<TokenFlags>& flags, int window) {
  const int n = static_cast<int>(sentence.tokens.size());
  // Per-token atoms shared by every window position.
  std::vector<std::vector<std::string>> atoms(n);
  for (int t = 0; t < n; ++t) {
    const std::string& surface = sentence.tokens[t].surface;
    std::string lower = to_lower(surface);
    atoms[t].push_back("w=" + lower);
    atoms[t].push_back("shape=" + word_shape(surface));
    if (lower.size() >= 3) {
      atoms[t].push_back("pre3=" + lower.substr(0, 3));
      atoms[t].push_back("suf3=" + lower.substr(lower.size() - 3));
    }
    for (const std::string& d : flags[t].dict) atoms[t].push_back("dict=" + d);
    for (const std::string& s : flags[t].sem) atoms[t].push_back("sem=" + s);
  }
  std::vector<TokenFeatures> out(n);
  for (int t = 0; t < n; ++t) {
    out[t].token_index = t;
    std::vector<std::string>& fs = out[t].features;
    for (int off = -window; off <= window; ++off) {
      int src = t + off;
      std::string tag = off == 0 ? "0" : (off > 0 ? "+" + std::to_string(off)
                                                  : std::to_string(off));
      if (src < 0) {
        fs.push_back("BOS");
        continue;
      }
      if (src >= n) {
        fs.push_back("EOS");
        continue;
      }
      for (const std::string& a : atoms[src]) {
        std::size_t eq = a.find('=');
        fs.push_back(a.substr(0, eq) + tag + a.substr(eq));
      }
    }
    std::sort(fs.begin(), fs.end());
    fs.erase(std::unique(fs.begin(), fs.end()), fs.end());
  }
  return out;
}

}  // namespace covtriage
