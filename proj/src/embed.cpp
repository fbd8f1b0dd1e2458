#include "taskmem/embed.hpp"

#include <cmath>
#include <stdexcept>

#include "taskmem/text.hpp"

namespace taskmem {

std::vector<double> HashingEmbedder::embed(std::string_view s) const {
    std::vector<double> v(dimensions_, 0.0);
    for (const auto& w : text::words(s)) v[text::fnv1a(w) % dimensions_] += 1.0;
    return v;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

const Embedder& default_embedder() {
    static const HashingEmbedder embedder;
    return embedder;
}

}  // namespace taskmem
