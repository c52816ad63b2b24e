#include "protip/error.hpp"
#include "protip/textpert.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace protip;
using namespace protip::textpert;

namespace {

const std::string kTwelve = "A white dog plays with a red ball on the green grass";

// True when `small` is obtained from `big` by deleting one character.
bool one_deletion(const std::string& big, const std::string& small) {
    if (big.size() != small.size() + 1) return false;
    for (std::size_t i = 0; i < big.size(); ++i) {
        if (big.substr(0, i) + big.substr(i + 1) == small) return true;
    }
    return false;
}

std::size_t hamming(const std::string& a, const std::string& b) {
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

}  // namespace

TEST(WordBudget, RoundsAndFloorsAtOne) {
    EXPECT_EQ(word_budget(kTwelve, 0.10), 1u);
    EXPECT_EQ(word_budget("hello", 0.10), 1u);
    EXPECT_EQ(word_budget("one two three four five six seven eight nine ten", 0.20), 2u);
    EXPECT_EQ(word_budget(kTwelve, 0.5), 6u);
    EXPECT_EQ(word_budget(kTwelve, 1.0), 12u);
}

TEST(WordBudget, RejectsEmptyTextAndBadRates) {
    EXPECT_THROW(word_budget("", 0.1), Error);
    EXPECT_THROW(word_budget("   \t ", 0.1), Error);
    EXPECT_THROW(word_budget("a b", 0.0), Error);
    EXPECT_THROW(word_budget("a b", 1.5), Error);
}

TEST(ApplyMethod, InsertKeepsOriginalAsSubsequence) {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const auto w = apply_method("dog", PerturbationMethod::Insert, rng);
        ASSERT_EQ(w.size(), 4u);
        EXPECT_TRUE(one_deletion(w, "dog")) << w;
    }
}

TEST(ApplyMethod, DeleteRemovesOneCharacter) {
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        const auto w = apply_method("ball", PerturbationMethod::Delete, rng);
        ASSERT_EQ(w.size(), 3u);
        EXPECT_TRUE(one_deletion("ball", w)) << w;
    }
}

TEST(ApplyMethod, LengthPreservingMethodsChangeTheWord) {
    Rng rng(5);
    for (auto m : {PerturbationMethod::Substitute, PerturbationMethod::Keyboard}) {
        for (int i = 0; i < 200; ++i) {
            const auto w = apply_method("green", m, rng);
            ASSERT_EQ(w.size(), 5u);
            EXPECT_EQ(hamming(w, "green"), 1u) << w;
        }
    }
    for (int i = 0; i < 200; ++i) {
        const auto w = apply_method("grass", PerturbationMethod::Swap, rng);
        ASSERT_EQ(w.size(), 5u);
        EXPECT_EQ(hamming(w, "grass"), 2u) << w;
        auto sorted_w = w, sorted_o = std::string("grass");
        std::sort(sorted_w.begin(), sorted_w.end());
        std::sort(sorted_o.begin(), sorted_o.end());
        EXPECT_EQ(sorted_w, sorted_o);
    }
}

TEST(ApplyMethod, InapplicableCases) {
    Rng rng(6);
    try {
        apply_method("x", PerturbationMethod::Swap, rng);
        FAIL() << "expected MethodInapplicable";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MethodInapplicable);
    }
    EXPECT_THROW(apply_method("x", PerturbationMethod::Delete, rng), Error);
    EXPECT_THROW(apply_method("aa", PerturbationMethod::Swap, rng), Error);
    EXPECT_THROW(apply_method("123", PerturbationMethod::Keyboard, rng), Error);
    EXPECT_THROW(apply_method("", PerturbationMethod::Insert, rng), Error);
}

TEST(ApplyMethod, KeyboardReplacementIsANeighbour) {
    Rng rng(7);
    const auto& kb = KeyboardMap::qwerty();
    for (int i = 0; i < 300; ++i) {
        const auto e = apply_method_traced("Keyboard", PerturbationMethod::Keyboard, rng);
        const char before = static_cast<char>(std::tolower(static_cast<unsigned char>(e.char_before)));
        EXPECT_NE(kb.neighbors(before).find(e.char_after), std::string::npos)
            << e.char_before << " -> " << e.char_after;
    }
}

TEST(KeyboardMap, ShippedFileMatchesBuiltinAndIsSymmetric) {
    const auto loaded = KeyboardMap::load(testsupport::data_path("qwerty.txt"));
    EXPECT_EQ(loaded.table(), KeyboardMap::qwerty().table());
    EXPECT_EQ(loaded.table().size(), 26u);
    for (const auto& [key, nbrs] : loaded.table()) {
        EXPECT_FALSE(nbrs.empty());
        for (char n : nbrs) {
            EXPECT_NE(n, key);
            EXPECT_NE(loaded.neighbors(n).find(key), std::string::npos) << key << " ~ " << n;
        }
    }
}

TEST(KeyboardMap, RejectsAsymmetricTables) {
    EXPECT_THROW(KeyboardMap::parse("a: b\nb: c\nc: b\n"), Error);
    EXPECT_THROW(KeyboardMap::parse("a: a\n"), Error);
    EXPECT_NO_THROW(KeyboardMap::parse("# tiny\na: b\nb: a\n"));
}

TEST(PerturbOnce, TwelveWordSentenceGetsOneEditedWord) {
    PerturbationSpec spec;
    spec.seed = 7;
    Rng rng(spec.seed);
    const auto p = perturb_once(kTwelve, spec, {}, rng);
    EXPECT_NE(p.text, kTwelve);
    EXPECT_EQ(p.original, kTwelve);
    ASSERT_EQ(p.edits.size(), 1u);
    const auto before = split_words(kTwelve);
    const auto after = split_words(p.text);
    ASSERT_EQ(before.size(), after.size());
    std::size_t changed = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (before[i] != after[i]) {
            ++changed;
            EXPECT_EQ(i, p.edits[0].word_index);
        }
    }
    EXPECT_EQ(changed, 1u);
}

TEST(PerturbOnce, ExhaustsTinySpace) {
    PerturbationSpec spec;
    spec.methods = {PerturbationMethod::Substitute};
    spec.alphabet = "a";
    Rng rng(1);
    const auto only = perturb_once("b", spec, {}, rng);
    EXPECT_EQ(only.text, "a");
    try {
        perturb_once("b", spec, {"a"}, rng);
        FAIL() << "expected ExhaustedPerturbations";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ExhaustedPerturbations);
    }
}

TEST(PerturbOnce, GrowingSeenSetYieldsDistinctTexts) {
    PerturbationSpec spec;
    Rng rng(11);
    std::set<std::string> seen;
    for (int i = 0; i < 300; ++i) {
        const auto p = perturb_once(kTwelve, spec, seen, rng);
        EXPECT_TRUE(seen.insert(p.text).second);
    }
}

TEST(PerturbOnce, DeterministicUnderSeed) {
    PerturbationSpec spec;
    spec.rate = 0.3;
    Rng a(99), b(99);
    std::set<std::string> seen;
    for (int i = 0; i < 20; ++i) {
        const auto pa = perturb_once(kTwelve, spec, seen, a);
        const auto pb = perturb_once(kTwelve, spec, seen, b);
        ASSERT_EQ(pa.text, pb.text);
        seen.insert(pa.text);
    }
}

// Property sweep over seeds and rates: edit count equals the budget, untouched
// words are byte-identical, methods stay within the spec.
TEST(PerturbOnce, StructuralProperties) {
    const std::vector<std::vector<PerturbationMethod>> method_sets = {
        {std::begin(kAllMethods), std::end(kAllMethods)},
        {PerturbationMethod::Insert},
        {PerturbationMethod::Swap, PerturbationMethod::Keyboard},
        {PerturbationMethod::Delete, PerturbationMethod::Substitute}};
    const auto words = split_words(kTwelve);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        for (double rate : {0.1, 0.25, 0.5}) {
            for (const auto& methods : method_sets) {
                PerturbationSpec spec;
                spec.rate = rate;
                spec.methods = methods;
                Rng rng(seed);
                PerturbedText p;
                try {
                    p = perturb_once(kTwelve, spec, {}, rng);
                } catch (const Error& e) {
                    // Swap/Delete cannot touch the one-letter words; a large budget may not fit.
                    EXPECT_EQ(e.code(), ErrorCode::InvalidInput);
                    continue;
                }
                const auto budget = word_budget(kTwelve, rate);
                ASSERT_EQ(p.edits.size(), budget);
                std::set<std::size_t> idx;
                for (const auto& e : p.edits) {
                    idx.insert(e.word_index);
                    EXPECT_NE(std::find(methods.begin(), methods.end(), e.method), methods.end());
                    if (e.method == PerturbationMethod::Keyboard) {
                        const char key = static_cast<char>(std::tolower(static_cast<unsigned char>(e.char_before)));
                        EXPECT_NE(spec.keyboard.neighbors(key).find(e.char_after), std::string::npos);
                    }
                }
                EXPECT_EQ(idx.size(), budget);
                // Word count only changes if a one-letter word could be deleted, which is forbidden.
                const auto after = split_words(p.text);
                ASSERT_EQ(after.size(), words.size());
                for (std::size_t i = 0; i < words.size(); ++i) {
                    if (!idx.count(i)) EXPECT_EQ(after[i], words[i]);
                    else EXPECT_NE(after[i], words[i]);
                }
            }
        }
    }
}

TEST(PerturbationSpec, Validation) {
    PerturbationSpec s;
    EXPECT_NO_THROW(s.validate());
    s.methods.clear();
    EXPECT_THROW(s.validate(), Error);
    s = {};
    s.rate = 0.0;
    EXPECT_THROW(s.validate(), Error);
    EXPECT_EQ(method_from_string(to_string(PerturbationMethod::Keyboard)), PerturbationMethod::Keyboard);
    EXPECT_THROW(method_from_string("shout"), Error);
}
