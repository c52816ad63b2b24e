#include "protip/defenders.hpp"
#include "protip/error.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace protip;
using namespace protip::defenders;

TEST(Levenshtein, KnownDistances) {
    EXPECT_EQ(levenshtein("", ""), 0u);
    EXPECT_EQ(levenshtein("dog", "daog"), 1u);
    EXPECT_EQ(levenshtein("ball", "bll"), 1u);
    EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
    EXPECT_EQ(levenshtein("abc", ""), 3u);
    EXPECT_EQ(levenshtein("grass", "garss"), 2u);
}

TEST(Defenders, IdentityIsANoOp) {
    const auto d = identity();
    EXPECT_EQ(d.name, "identity");
    for (const char* s : {"", "A white daog", "  spaced  out "}) EXPECT_EQ(d.transform(s), s);
}

TEST(Defenders, DictionaryCorrectsSingleEdits) {
    const auto d = dictionary_corrector({"white", "dog", "ball", "red", "grass", "a"});
    EXPECT_EQ(d.transform("A white daog plays with a red bll"), "A white dog plays with a red ball");
    EXPECT_EQ(d.transform("Daog, grss."), "Dog, grass.");
    // Two edits away: left alone.
    EXPECT_EQ(d.transform("garss"), "garss");
    EXPECT_EQ(d.transform("white  dog"), "white  dog");
}

TEST(Defenders, FromSpec) {
    EXPECT_EQ(from_spec("identity").name, "identity");
    const auto d = from_spec("dict:" + testsupport::data_path("wordlist.txt").string());
    EXPECT_EQ(d.name, "dict:wordlist.txt");
    EXPECT_EQ(d.transform("A white dog sitting on a woden bench"), "A white dog sitting on a wooden bench");
    EXPECT_THROW(from_spec("autocorrect"), Error);
    EXPECT_THROW(from_spec("dict:/nonexistent/words.txt"), Error);
}
