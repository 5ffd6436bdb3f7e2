// SPDX-License-Identifier: Apache-2.0
#include "agentflow/embedding.hpp"

#include "agentflow/error.hpp"
#include "agentflow/util.hpp"

#include <cctype>
#include <cmath>

namespace agentflow {

double EmbeddingVector::norm() const {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

bool EmbeddingVector::is_zero() const {
    for (double v : values) {
        if (v != 0.0) return false;
    }
    return true;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension())
        throw Error(Errc::DimensionMismatch, "cosine of vectors with dimensions " +
                                                 std::to_string(a.dimension()) + " and " +
                                                 std::to_string(b.dimension()));
    double dot = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
    double na = a.norm();
    double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    double c = dot / (na * nb);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return c;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw Error(Errc::InvalidArgument, "embedding dimension must be positive");
}

EmbeddingVector HashingEmbedder::embed(std::string_view text) const {
    EmbeddingVector v;
    v.values.assign(dimension_, 0.0);
    for (const auto& token : tokenize(text)) v.values[util::fnv1a64(token) % dimension_] += 1.0;
    double n = v.norm();
    if (n > 0.0) {
        for (double& x : v.values) x /= n;
    }
    return v;
}

void to_json(nlohmann::json& j, const EmbeddingVector& v) { j = v.values; }

void from_json(const nlohmann::json& j, EmbeddingVector& v) {
    v.values = j.get<std::vector<double>>();
}

} // namespace agentflow
