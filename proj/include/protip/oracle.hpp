#pragma once

// The generator oracle: the model under test, seen only through text
// embeddings and CLIP scores of generated images.

#include "protip/semgate.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace protip {

struct ScoreRequest {
    std::string prompt;   // text fed to generation
    std::string caption;  // text the images are scored against
    int count = 0;
    std::uint64_t seed = 0;
};

class GeneratorOracle : public semgate::EmbeddingProvider {
public:
    // `count` CLIP scores in [0,100]; failures are reported as OracleUnavailable.
    virtual std::vector<double> score(const ScoreRequest& request) = 0;
};

// Preloaded embeddings and scores:
//   {"texts": {text: [floats]}, "scores": {prompt: [floats]}}
// Score requests for a prompt are served consecutively from its list.
class FileOracle : public GeneratorOracle {
public:
    static std::unique_ptr<FileOracle> load(const std::filesystem::path& path);
    static std::unique_ptr<FileOracle> parse(const std::string& json_text);

    semgate::EmbeddingVector embed(const std::string& text) override;
    std::vector<double> score(const ScoreRequest& request) override;

private:
    std::map<std::string, semgate::EmbeddingVector> texts_;
    std::map<std::string, std::vector<double>> scores_;
    std::map<std::string, std::size_t> cursor_;
    std::mutex mu_;
};

}  // namespace protip
