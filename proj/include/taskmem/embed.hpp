#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace taskmem {

// Text -> vector. Implementations must be deterministic.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(std::string_view text) const = 0;
};

// Bag-of-words feature hashing over lowercased alphanumeric words.
class HashingEmbedder final : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dimensions = 1024) : dimensions_(dimensions) {}
    std::vector<double> embed(std::string_view text) const override;

private:
    std::size_t dimensions_;
};

// 0 when either vector has zero norm.
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

const Embedder& default_embedder();

}  // namespace taskmem
