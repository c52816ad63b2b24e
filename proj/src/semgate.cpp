#include "protip/semgate.hpp"

#include "protip/error.hpp"
#include "protip/rng.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

namespace protip::semgate {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    PROTIP_REQUIRE(!values_.empty(), ErrorCode::InvalidInput, "empty embedding");
    double ss = 0.0;
    for (double v : values_) {
        PROTIP_REQUIRE(std::isfinite(v), ErrorCode::InvalidInput, "non-finite embedding entry");
        ss += v * v;
    }
    norm_ = std::sqrt(ss);
    PROTIP_REQUIRE(norm_ > 0.0, ErrorCode::InvalidInput, "zero embedding vector");
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    PROTIP_REQUIRE(!a.empty() && !b.empty(), ErrorCode::InvalidInput, "zero embedding vector");
    PROTIP_REQUIRE(a.dim() == b.dim(), ErrorCode::InvalidInput,
                   "embedding dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                       std::to_string(b.dim()));
    const auto av = a.values();
    const auto bv = b.values();
    double dot = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) dot += av[i] * bv[i];
    return std::clamp(dot / (a.norm() * b.norm()), -1.0, 1.0);
}

double clip_score(const EmbeddingVector& caption_emb, const EmbeddingVector& image_emb) {
    return std::max(100.0 * cosine(caption_emb, image_emb), 0.0);
}

void GateConfig::validate() const {
    PROTIP_REQUIRE(std::isfinite(gamma) && gamma >= -1.0 && gamma <= 1.0, ErrorCode::InvalidInput,
                   "gate threshold gamma must lie in [-1,1]");
}

namespace {

EmbeddingVector embed_or_unavailable(EmbeddingProvider& provider, const std::string& text) {
    try {
        return provider.embed(text);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::OracleUnavailable) throw;
        throw Error(ErrorCode::OracleUnavailable, std::string("embedding failed: ") + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorCode::OracleUnavailable, std::string("embedding failed: ") + e.what());
    }
}

}  // namespace

GateResult gate(const EmbeddingVector& original_emb, const std::string& perturbed,
                const GateConfig& cfg, EmbeddingProvider& provider) {
    cfg.validate();
    const auto pert = embed_or_unavailable(provider, perturbed);
    const double s = cosine(original_emb, pert);
    return {s >= cfg.gamma, s};
}

GateResult gate(const std::string& original, const std::string& perturbed, const GateConfig& cfg,
                EmbeddingProvider& provider) {
    return gate(embed_or_unavailable(provider, original), perturbed, cfg, provider);
}

void StubProvider::pin(const std::string& text, std::vector<double> values) {
    PROTIP_REQUIRE(values.size() == dim_, ErrorCode::InvalidInput, "pinned embedding has wrong dimension");
    pinned_.insert_or_assign(text, EmbeddingVector(std::move(values)));
}

EmbeddingVector StubProvider::embed(const std::string& text) {
    if (auto it = pinned_.find(text); it != pinned_.end()) return it->second;
    Rng rng(derive_seed(seed_, hash_text(text)));
    std::normal_distribution<double> nd;
    std::vector<double> v(dim_);
    for (auto& x : v) x = nd(rng);
    return EmbeddingVector(std::move(v));
}

}  // namespace protip::semgate
