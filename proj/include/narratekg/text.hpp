#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace narratekg::text {

std::string to_lower_ascii(std::string_view s);

/// Cosine similarity of character-trigram count vectors of the lowercased
/// strings. Strings shorter than three characters count as a single gram.
/// Returns 0 when either side is empty.
double trigram_cosine(std::string_view a, std::string_view b);

struct Token {
    std::string text;   // as written
    std::string lower;  // lowercased for matching
    bool sentence_end = false;  // followed by . ! or ?
};

/// Splits into word tokens (letters, digits, apostrophes, internal dots and
/// hyphens); punctuation is dropped but sentence boundaries are recorded.
std::vector<Token> tokenize(std::string_view s);

/// Lowercased word tokens of a phrase, for phrase matching against tokenize().
std::vector<std::string> phrase_tokens(std::string_view s);

}  // namespace narratekg::text
