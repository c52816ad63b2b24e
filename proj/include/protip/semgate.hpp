#pragma once

// Embedding similarity gate and CLIP-score metric.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace protip::semgate {

// Finite, non-zero real vector.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<double> values);

    std::size_t dim() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    double norm() const { return norm_; }
    bool empty() const { return values_.empty(); }

private:
    std::vector<double> values_;
    double norm_ = 0.0;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// max(100 * cos, 0)
double clip_score(const EmbeddingVector& caption_emb, const EmbeddingVector& image_emb);

struct GateConfig {
    double gamma = 0.0;
    void validate() const;
};

struct GateResult {
    bool valid = false;
    double similarity = 0.0;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    // Implementations report transport or model failures as OracleUnavailable.
    virtual EmbeddingVector embed(const std::string& text) = 0;
};

// valid iff cosine(T(x), T(x')) >= gamma.
GateResult gate(const std::string& original, const std::string& perturbed, const GateConfig& cfg,
                EmbeddingProvider& provider);
GateResult gate(const EmbeddingVector& original_emb, const std::string& perturbed,
                const GateConfig& cfg, EmbeddingProvider& provider);

// Deterministic pseudo-embeddings: Gaussian entries seeded by a hash of the text.
// Individual texts can be pinned to fixed vectors.
class StubProvider : public EmbeddingProvider {
public:
    explicit StubProvider(std::uint64_t seed = 0, std::size_t dim = 64) : seed_(seed), dim_(dim) {}

    void pin(const std::string& text, std::vector<double> values);
    EmbeddingVector embed(const std::string& text) override;

private:
    std::uint64_t seed_;
    std::size_t dim_;
    std::map<std::string, EmbeddingVector> pinned_;
};

}  // namespace protip::semgate
