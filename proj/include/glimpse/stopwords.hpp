// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <span>
#include <string_view>

namespace glimpse {

/// The shipped stop-word list (data/stopwords.txt), compiled in.
std::span<const std::string_view> stop_words() noexcept;

/// Case-insensitive membership test after stripping surrounding punctuation
/// and whitespace (tokenizer artifacts such as a leading space or "Ġ").
bool is_function_word(std::string_view token);

/// True when the token is non-empty and consists only of punctuation and
/// whitespace.
bool is_punctuation(std::string_view token);

}  // namespace glimpse
