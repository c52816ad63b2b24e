#pragma once

// Input-side defences: named transforms applied to perturbed prompts before generation.

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace protip::defenders {

struct Defender {
    std::string name;
    std::function<std::string(const std::string&)> transform;
};

Defender identity();

// Replaces each word not in `vocabulary` with the first vocabulary word at
// Levenshtein distance 1 (case-insensitive, trailing punctuation preserved).
Defender dictionary_corrector(std::vector<std::string> vocabulary, std::string name = "dictionary");
Defender dictionary_corrector_from_file(const std::filesystem::path& word_list, std::string name = "dictionary");

// "identity", or "dict:<path>".
Defender from_spec(std::string_view spec);

std::size_t levenshtein(std::string_view a, std::string_view b);

}  // namespace protip::defenders
