#include "protip/textpert.hpp"

#include "protip/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace protip::textpert {

namespace {

constexpr std::string_view kQwerty = R"(q: w a
w: q e a s
e: w r s d
r: e t d f
t: r y f g
y: t u g h
u: y i h j
i: u o j k
o: i p k l
p: o l
a: q w s z
s: w e a d z x
d: e r s f x c
f: r t d g c v
g: t y f h v b
h: y u g j b n
j: u i h k n m
k: i o j l m
l: o p k
z: a s x
x: s d z c
c: d f x v
v: f g c b
b: g h v n
n: h j b m
m: j k n
)";

bool is_ascii(char c) { return static_cast<unsigned char>(c) < 0x80; }
bool is_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

template <class T>
const T& pick(const std::vector<T>& items, Rng& rng) {
    std::uniform_int_distribution<std::size_t> dist(0, items.size() - 1);
    return items[dist(rng)];
}

std::vector<std::size_t> insert_positions(std::string_view word) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i <= word.size(); ++i) {
        if (i < word.size() && is_continuation(word[i])) continue;
        out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> substitute_positions(std::string_view word, std::string_view alphabet) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (!is_ascii(word[i])) continue;
        if (std::any_of(alphabet.begin(), alphabet.end(), [&](char a) { return a != word[i]; }))
            out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> swap_positions(std::string_view word) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i + 1 < word.size(); ++i) {
        if (is_ascii(word[i]) && is_ascii(word[i + 1]) && word[i] != word[i + 1]) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> delete_positions(std::string_view word) {
    std::vector<std::size_t> out;
    if (word.size() < 2) return out;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (is_ascii(word[i])) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> keyboard_positions(std::string_view word, const KeyboardMap& kb) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (is_ascii(word[i]) && kb.contains(lower(word[i]))) out.push_back(i);
    }
    return out;
}

struct WordSpan {
    std::size_t begin;
    std::size_t size;
};

std::vector<WordSpan> word_spans(std::string_view text) {
    std::vector<WordSpan> spans;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) spans.push_back({start, i - start});
    }
    return spans;
}

}  // namespace

std::string_view to_string(PerturbationMethod m) {
    switch (m) {
        case PerturbationMethod::Insert: return "insert";
        case PerturbationMethod::Substitute: return "substitute";
        case PerturbationMethod::Swap: return "swap";
        case PerturbationMethod::Delete: return "delete";
        case PerturbationMethod::Keyboard: return "keyboard";
    }
    return "unknown";
}

PerturbationMethod method_from_string(std::string_view name) {
    for (auto m : kAllMethods) {
        if (to_string(m) == name) return m;
    }
    throw Error(ErrorCode::InvalidInput, "unknown perturbation method '" + std::string(name) + "'");
}

KeyboardMap::KeyboardMap(std::map<char, std::string> adjacency) : adjacency_(std::move(adjacency)) {
    for (const auto& [key, nbrs] : adjacency_) {
        PROTIP_REQUIRE(!nbrs.empty(), ErrorCode::InvalidInput,
                       std::string("keyboard key '") + key + "' has no neighbours");
        for (char n : nbrs) {
            PROTIP_REQUIRE(n != key, ErrorCode::InvalidInput,
                           std::string("keyboard key '") + key + "' lists itself");
            auto it = adjacency_.find(n);
            PROTIP_REQUIRE(it != adjacency_.end() && it->second.find(key) != std::string::npos,
                           ErrorCode::InvalidInput,
                           std::string("keyboard adjacency not symmetric for '") + key + "'-'" + n + "'");
        }
    }
}

KeyboardMap KeyboardMap::parse(std::string_view text) {
    std::map<char, std::string> table;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
            continue;
        auto colon = line.find(':');
        PROTIP_REQUIRE(colon != std::string::npos, ErrorCode::InvalidInput,
                       "keyboard file line " + std::to_string(lineno) + ": missing ':'");
        std::istringstream key_in(line.substr(0, colon));
        std::string key;
        key_in >> key;
        PROTIP_REQUIRE(key.size() == 1, ErrorCode::InvalidInput,
                       "keyboard file line " + std::to_string(lineno) + ": key must be one character");
        std::istringstream nb_in(line.substr(colon + 1));
        std::string tok;
        std::string nbrs;
        while (nb_in >> tok) {
            PROTIP_REQUIRE(tok.size() == 1, ErrorCode::InvalidInput,
                           "keyboard file line " + std::to_string(lineno) + ": bad neighbour '" + tok + "'");
            nbrs.push_back(lower(tok[0]));
        }
        table[lower(key[0])] += nbrs;
    }
    return KeyboardMap(std::move(table));
}

KeyboardMap KeyboardMap::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    PROTIP_REQUIRE(in.good(), ErrorCode::InvalidInput, "cannot open keyboard file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

const KeyboardMap& KeyboardMap::qwerty() {
    static const KeyboardMap map = parse(kQwerty);
    return map;
}

const std::string& KeyboardMap::neighbors(char c) const {
    auto it = adjacency_.find(c);
    PROTIP_REQUIRE(it != adjacency_.end(), ErrorCode::InvalidInput,
                   std::string("no keyboard entry for '") + c + "'");
    return it->second;
}

void PerturbationSpec::validate() const {
    PROTIP_REQUIRE(std::isfinite(rate) && rate > 0.0 && rate <= 1.0, ErrorCode::InvalidInput,
                   "perturbation rate must lie in (0,1]");
    PROTIP_REQUIRE(!methods.empty(), ErrorCode::InvalidInput, "no perturbation methods enabled");
    PROTIP_REQUIRE(!alphabet.empty(), ErrorCode::InvalidInput, "empty perturbation alphabet");
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    for (auto span : word_spans(text)) words.emplace_back(text.substr(span.begin, span.size));
    PROTIP_REQUIRE(!words.empty(), ErrorCode::InvalidInput, "text contains no words");
    return words;
}

std::size_t word_budget(std::string_view text, double rate) {
    PROTIP_REQUIRE(std::isfinite(rate) && rate > 0.0 && rate <= 1.0, ErrorCode::InvalidInput,
                   "perturbation rate must lie in (0,1]");
    const auto words = split_words(text);
    const auto rounded = static_cast<std::size_t>(std::llround(rate * static_cast<double>(words.size())));
    return std::max<std::size_t>(1, rounded);
}

bool method_applicable(std::string_view word, PerturbationMethod method, const MethodContext& ctx) {
    if (word.empty()) return false;
    switch (method) {
        case PerturbationMethod::Insert: return !ctx.alphabet.empty();
        case PerturbationMethod::Substitute: return !substitute_positions(word, ctx.alphabet).empty();
        case PerturbationMethod::Swap: return !swap_positions(word).empty();
        case PerturbationMethod::Delete: return !delete_positions(word).empty();
        case PerturbationMethod::Keyboard:
            return ctx.keyboard != nullptr && !keyboard_positions(word, *ctx.keyboard).empty();
    }
    return false;
}

WordEdit apply_method_traced(std::string_view word, PerturbationMethod method, Rng& rng,
                             const MethodContext& ctx) {
    if (!method_applicable(word, method, ctx)) {
        throw Error(ErrorCode::MethodInapplicable,
                    std::string(to_string(method)) + " cannot edit '" + std::string(word) + "'");
    }
    WordEdit out;
    out.word = std::string(word);
    switch (method) {
        case PerturbationMethod::Insert: {
            out.position = pick(insert_positions(word), rng);
            std::uniform_int_distribution<std::size_t> ch(0, ctx.alphabet.size() - 1);
            out.char_after = ctx.alphabet[ch(rng)];
            out.word.insert(out.word.begin() + static_cast<std::ptrdiff_t>(out.position), out.char_after);
            break;
        }
        case PerturbationMethod::Substitute: {
            out.position = pick(substitute_positions(word, ctx.alphabet), rng);
            out.char_before = word[out.position];
            std::vector<char> choices;
            for (char a : ctx.alphabet) {
                if (a != out.char_before) choices.push_back(a);
            }
            out.char_after = pick(choices, rng);
            out.word[out.position] = out.char_after;
            break;
        }
        case PerturbationMethod::Swap: {
            out.position = pick(swap_positions(word), rng);
            out.char_before = word[out.position];
            out.char_after = word[out.position + 1];
            std::swap(out.word[out.position], out.word[out.position + 1]);
            break;
        }
        case PerturbationMethod::Delete: {
            out.position = pick(delete_positions(word), rng);
            out.char_before = word[out.position];
            out.word.erase(out.position, 1);
            break;
        }
        case PerturbationMethod::Keyboard: {
            out.position = pick(keyboard_positions(word, *ctx.keyboard), rng);
            out.char_before = word[out.position];
            const std::string& nbrs = ctx.keyboard->neighbors(lower(out.char_before));
            std::uniform_int_distribution<std::size_t> ch(0, nbrs.size() - 1);
            out.char_after = nbrs[ch(rng)];
            out.word[out.position] = out.char_after;
            break;
        }
    }
    return out;
}

std::string apply_method(std::string_view word, PerturbationMethod method, Rng& rng,
                         const MethodContext& ctx) {
    return apply_method_traced(word, method, rng, ctx).word;
}

PerturbedText perturb_once(std::string_view text, const PerturbationSpec& spec,
                           const std::set<std::string>& seen, Rng& rng) {
    spec.validate();
    const auto spans = word_spans(text);
    PROTIP_REQUIRE(!spans.empty(), ErrorCode::InvalidInput, "text contains no words");
    const std::size_t budget = word_budget(text, spec.rate);
    const MethodContext ctx{spec.alphabet, &spec.keyboard};

    // Per-word list of enabled methods that can actually edit it.
    std::vector<std::vector<PerturbationMethod>> usable(spans.size());
    std::vector<std::size_t> eligible;
    for (std::size_t w = 0; w < spans.size(); ++w) {
        const auto word = text.substr(spans[w].begin, spans[w].size);
        for (auto m : spec.methods) {
            if (method_applicable(word, m, ctx)) usable[w].push_back(m);
        }
        if (!usable[w].empty()) eligible.push_back(w);
    }
    PROTIP_REQUIRE(!eligible.empty(), ErrorCode::InvalidInput, "no word can take any enabled method");
    PROTIP_REQUIRE(eligible.size() >= budget, ErrorCode::InvalidInput,
                   "fewer editable words than the perturbation budget");

    for (int attempt = 0; attempt < kMaxDedupeRetries; ++attempt) {
        // Partial Fisher-Yates: the first `budget` entries are a uniform draw without replacement.
        std::vector<std::size_t> pool = eligible;
        for (std::size_t i = 0; i < budget; ++i) {
            std::uniform_int_distribution<std::size_t> d(i, pool.size() - 1);
            std::swap(pool[i], pool[d(rng)]);
        }
        std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(budget));
        std::sort(chosen.begin(), chosen.end());

        PerturbedText out;
        out.original = std::string(text);
        std::string rebuilt;
        std::size_t cursor = 0;
        for (std::size_t w : chosen) {
            const auto word = text.substr(spans[w].begin, spans[w].size);
            const auto method = pick(usable[w], rng);
            auto edit = apply_method_traced(word, method, rng, ctx);
            rebuilt.append(text.substr(cursor, spans[w].begin - cursor));
            rebuilt.append(edit.word);
            cursor = spans[w].begin + spans[w].size;
            out.edits.push_back({w, method, edit.position, edit.char_before, edit.char_after});
        }
        rebuilt.append(text.substr(cursor));
        if (rebuilt != text && seen.count(rebuilt) == 0) {
            out.text = std::move(rebuilt);
            return out;
        }
    }
    throw Error(ErrorCode::ExhaustedPerturbations,
                "no fresh perturbation after " + std::to_string(kMaxDedupeRetries) + " draws");
}

}  // namespace protip::textpert
