#include "narratekg/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace narratekg::text {

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

namespace {

std::map<std::string, int> trigram_counts(std::string_view s) {
    const auto lowered = to_lower_ascii(s);
    std::map<std::string, int> counts;
    if (lowered.empty()) return counts;
    if (lowered.size() < 3) {
        counts[lowered] = 1;
        return counts;
    }
    for (std::size_t i = 0; i + 3 <= lowered.size(); ++i) ++counts[lowered.substr(i, 3)];
    return counts;
}

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '\'' || c >= 0x80; }

}  // namespace

double trigram_cosine(std::string_view a, std::string_view b) {
    const auto ca = trigram_counts(a);
    const auto cb = trigram_counts(b);
    if (ca.empty() || cb.empty()) return 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [g, n] : ca) {
        na += static_cast<double>(n) * n;
        if (auto it = cb.find(g); it != cb.end()) dot += static_cast<double>(n) * it->second;
    }
    for (const auto& [g, n] : cb) nb += static_cast<double>(n) * n;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (is_word_char(c)) {
            std::size_t j = i;
            while (j < s.size()) {
                const auto cj = static_cast<unsigned char>(s[j]);
                if (is_word_char(cj)) {
                    ++j;
                } else if ((cj == '-' || cj == '.') && j + 1 < s.size() &&
                           std::isalnum(static_cast<unsigned char>(s[j + 1])) && j > i) {
                    ++j;  // U.S., cease-fire
                } else {
                    break;
                }
            }
            Token t;
            t.text = std::string(s.substr(i, j - i));
            t.lower = to_lower_ascii(t.text);
            out.push_back(std::move(t));
            i = j;
        } else {
            if ((c == '.' || c == '!' || c == '?' || c == '\n') && !out.empty()) out.back().sentence_end = true;
            ++i;
        }
    }
    return out;
}

std::vector<std::string> phrase_tokens(std::string_view s) {
    std::vector<std::string> out;
    for (auto& t : tokenize(s)) out.push_back(std::move(t.lower));
    return out;
}

}  // namespace narratekg::text
