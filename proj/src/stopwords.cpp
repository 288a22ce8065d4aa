// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include "glimpse/stopwords.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace glimpse {

namespace {

// Generated by CMake from data/stopwords.txt, sorted.
constexpr std::string_view kStopWords[] = {
#include "stopwords_data.inc"
};

bool is_punct_or_space(unsigned char c) {
  return std::ispunct(c) || std::isspace(c);
}

}  // namespace

std::span<const std::string_view> stop_words() noexcept { return kStopWords; }

bool is_function_word(std::string_view token) {
  // Non-ASCII bytes are dropped, which also strips the byte-level BPE space
  // marker U+0120 ("Ġ").
  std::string word;
  word.reserve(token.size());
  for (unsigned char c : token) {
    if (!is_punct_or_space(c) && c < 0x80) word.push_back(static_cast<char>(std::tolower(c)));
  }
  if (word.empty()) return false;
  return std::binary_search(std::begin(kStopWords), std::end(kStopWords), std::string_view(word));
}

bool is_punctuation(std::string_view token) {
  if (token.empty()) return false;
  bool any_punct = false;
  for (unsigned char c : token) {
    if (std::ispunct(c)) {
      any_punct = true;
    } else if (!std::isspace(c)) {
      return false;
    }
  }
  return any_punct;
}

}  // namespace glimpse
