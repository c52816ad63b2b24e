#pragma once

// Character-level stochastic perturbation of prompts.

#include "protip/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace protip::textpert {

enum class PerturbationMethod : std::uint8_t { Insert, Substitute, Swap, Delete, Keyboard };

std::string_view to_string(PerturbationMethod m);
PerturbationMethod method_from_string(std::string_view name);

inline constexpr PerturbationMethod kAllMethods[] = {
    PerturbationMethod::Insert, PerturbationMethod::Substitute, PerturbationMethod::Swap,
    PerturbationMethod::Delete, PerturbationMethod::Keyboard};

// Symmetric key adjacency, lowercase keys.
class KeyboardMap {
public:
    KeyboardMap() = default;
    explicit KeyboardMap(std::map<char, std::string> adjacency);

    // Parses "c: n1 n2 n3" lines; '#' starts a comment.
    static KeyboardMap parse(std::string_view text);
    static KeyboardMap load(const std::filesystem::path& path);
    // Built-in US QWERTY letter layout (same content as data/qwerty.txt).
    static const KeyboardMap& qwerty();

    bool contains(char c) const { return adjacency_.count(c) != 0; }
    const std::string& neighbors(char c) const;
    const std::map<char, std::string>& table() const { return adjacency_; }

private:
    std::map<char, std::string> adjacency_;
};

struct PerturbationSpec {
    double rate = 0.10;
    std::vector<PerturbationMethod> methods{std::begin(kAllMethods), std::end(kAllMethods)};
    std::string alphabet = "abcdefghijklmnopqrstuvwxyz";
    KeyboardMap keyboard = KeyboardMap::qwerty();
    std::uint64_t seed = 0;

    // Throws InvalidInput on a broken spec.
    void validate() const;
};

struct Edit {
    std::size_t word_index = 0;
    PerturbationMethod method = PerturbationMethod::Insert;
    std::size_t position = 0;
    // For Insert char_before is '\0'; for Delete char_after is '\0'. Swap records the
    // character moved forward as char_before and the one moved back as char_after.
    char char_before = '\0';
    char char_after = '\0';
};

struct PerturbedText {
    std::string text;
    std::string original;
    std::vector<Edit> edits;
    std::optional<double> similarity;
};

struct WordEdit {
    std::string word;
    std::size_t position = 0;
    char char_before = '\0';
    char char_after = '\0';
};

struct MethodContext {
    std::string_view alphabet = "abcdefghijklmnopqrstuvwxyz";
    const KeyboardMap* keyboard = &KeyboardMap::qwerty();
};

// Whitespace-delimited words. Throws InvalidInput when there are none.
std::vector<std::string> split_words(std::string_view text);

std::size_t word_budget(std::string_view text, double rate);

bool method_applicable(std::string_view word, PerturbationMethod method, const MethodContext& ctx);

// One edit of the given kind. Throws MethodInapplicable when the word cannot take it.
WordEdit apply_method_traced(std::string_view word, PerturbationMethod method, Rng& rng,
                             const MethodContext& ctx = {});
std::string apply_method(std::string_view word, PerturbationMethod method, Rng& rng,
                         const MethodContext& ctx = {});

inline constexpr int kMaxDedupeRetries = 1000;

// Draws a perturbation not present in `seen` and different from `text`.
// Throws ExhaustedPerturbations after kMaxDedupeRetries stale draws.
PerturbedText perturb_once(std::string_view text, const PerturbationSpec& spec,
                           const std::set<std::string>& seen, Rng& rng);

}  // namespace protip::textpert
