#include "protip/error.hpp"
#include "protip/semgate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace protip;
using namespace protip::semgate;

namespace {

EmbeddingVector vec(std::vector<double> v) { return EmbeddingVector(std::move(v)); }

class FailingProvider : public EmbeddingProvider {
public:
    EmbeddingVector embed(const std::string&) override { throw std::runtime_error("encoder down"); }
};

}  // namespace

TEST(Cosine, BasicGeometry) {
    const auto v = vec({0.3, -1.2, 4.0});
    EXPECT_NEAR(cosine(v, v), 1.0, 1e-15);
    EXPECT_NEAR(cosine(vec({1, 0}), vec({0, 1})), 0.0, 1e-15);
    EXPECT_NEAR(cosine(vec({1, 1}), vec({1, 0})), 1.0 / std::sqrt(2.0), 1e-9);
    EXPECT_NEAR(cosine(vec({1, 2}), vec({-2, -4})), -1.0, 1e-15);
}

TEST(Cosine, InvalidInputs) {
    EXPECT_THROW(vec({0.0, 0.0}), Error);
    EXPECT_THROW(vec({1.0, NAN}), Error);
    EXPECT_THROW(vec({}), Error);
    EXPECT_THROW(cosine(vec({1, 0}), vec({1, 0, 0})), Error);
}

TEST(ClipScore, FormulaAndClamp) {
    EXPECT_NEAR(clip_score(vec({1, 2}), vec({2, 4})), 100.0, 1e-12);
    EXPECT_DOUBLE_EQ(clip_score(vec({1, 2}), vec({-1, -2})), 0.0);
    const double c = 0.31;
    EXPECT_NEAR(clip_score(vec({1, 0}), vec({c, std::sqrt(1 - c * c)})), 31.0, 1e-9);
}

TEST(ClipScore, RangeProperty) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> a(8), b(8);
        for (auto& x : a) x = nd(rng);
        for (auto& x : b) x = nd(rng);
        const double s = clip_score(vec(a), vec(b));
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 100.0);
    }
}

TEST(Gate, IdenticalTextPasses) {
    StubProvider p(1);
    const auto r = gate("a dog", "a dog", {0.9}, p);
    EXPECT_TRUE(r.valid);
    EXPECT_NEAR(r.similarity, 1.0, 1e-12);
}

TEST(Gate, MinusOneAcceptsEverything) {
    StubProvider p(2);
    for (const char* t : {"a cat", "zzz", "A white daog"}) EXPECT_TRUE(gate("a dog", t, {-1.0}, p).valid);
}

TEST(Gate, EngineeredSimilarity) {
    StubProvider p(3, 2);
    p.pin("orig", {1.0, 0.0});
    p.pin("pert", {0.85, std::sqrt(1 - 0.85 * 0.85)});
    const auto r = gate("orig", "pert", {0.9}, p);
    EXPECT_FALSE(r.valid);
    EXPECT_NEAR(r.similarity, 0.85, 1e-12);
    EXPECT_TRUE(gate("orig", "pert", {0.85}, p).valid);
}

TEST(Gate, ProviderFailureIsOracleUnavailable) {
    FailingProvider p;
    try {
        gate("a", "b", {0.0}, p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OracleUnavailable);
    }
}

TEST(GateConfig, GammaBounds) {
    EXPECT_NO_THROW(GateConfig{1.0}.validate());
    EXPECT_NO_THROW(GateConfig{-1.0}.validate());
    EXPECT_THROW(GateConfig{1.01}.validate(), Error);
}

TEST(StubProvider, DeterministicPerSeed) {
    StubProvider a(9), b(9), c(10);
    const auto va = a.embed("hello"), vb = b.embed("hello"), vc = c.embed("hello");
    EXPECT_NEAR(cosine(va, vb), 1.0, 1e-15);
    EXPECT_LT(cosine(va, vc), 0.9);
    EXPECT_EQ(va.dim(), 64u);
}
