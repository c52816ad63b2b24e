#include "protip/defenders.hpp"

#include "protip/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <memory>
#include <set>

namespace protip::defenders {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string correct_word(const std::string& token, const std::vector<std::string>& vocab,
                         const std::set<std::string>& known) {
    // Split off leading/trailing punctuation so "grass." corrects like "grass".
    std::size_t b = 0;
    std::size_t e = token.size();
    while (b < e && is_punct(token[b])) ++b;
    while (e > b && is_punct(token[e - 1])) --e;
    if (b == e) return token;
    const std::string core = token.substr(b, e - b);
    const std::string key = lowercase(core);
    if (known.count(key)) return token;
    for (const auto& w : vocab) {
        if (levenshtein(key, w) == 1) {
            std::string fixed = w;
            if (std::isupper(static_cast<unsigned char>(core[0])))
                fixed[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(fixed[0])));
            return token.substr(0, b) + fixed + token.substr(e);
        }
    }
    return token;
}

}  // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

Defender identity() {
    return {"identity", [](const std::string& s) { return s; }};
}

Defender dictionary_corrector(std::vector<std::string> vocabulary, std::string name) {
    for (auto& w : vocabulary) w = lowercase(w);
    auto vocab = std::make_shared<std::vector<std::string>>(std::move(vocabulary));
    auto known = std::make_shared<std::set<std::string>>(vocab->begin(), vocab->end());
    return {std::move(name), [vocab, known](const std::string& text) {
                std::string out;
                std::size_t i = 0;
                while (i < text.size()) {
                    if (std::isspace(static_cast<unsigned char>(text[i]))) {
                        out.push_back(text[i++]);
                        continue;
                    }
                    std::size_t j = i;
                    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
                    out += correct_word(text.substr(i, j - i), *vocab, *known);
                    i = j;
                }
                return out;
            }};
}

Defender dictionary_corrector_from_file(const std::filesystem::path& word_list, std::string name) {
    std::ifstream in(word_list);
    PROTIP_REQUIRE(in.good(), ErrorCode::InvalidInput, "cannot open word list " + word_list.string());
    std::vector<std::string> words;
    std::string w;
    while (in >> w) words.push_back(w);
    return dictionary_corrector(std::move(words), std::move(name));
}

Defender from_spec(std::string_view spec) {
    if (spec == "identity") return identity();
    if (spec.rfind("dict:", 0) == 0) {
        const std::filesystem::path path(std::string(spec.substr(5)));
        return dictionary_corrector_from_file(path, "dict:" + path.filename().string());
    }
    throw Error(ErrorCode::InvalidInput, "unknown defender '" + std::string(spec) + "'");
}

}  // namespace protip::defenders
