// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace agentflow {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dimension() const noexcept { return values.size(); }
    double norm() const;
    bool is_zero() const;

    bool operator==(const EmbeddingVector&) const = default;
};

/// dot(a, b) / (|a| |b|); 0 when either vector has zero norm.
/// Throws Errc::DimensionMismatch for vectors of different length.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbeddingVector embed(std::string_view text) const = 0;
    virtual std::size_t dimension() const = 0;
};

/// Lowercased maximal runs of ASCII alphanumerics.
std::vector<std::string> tokenize(std::string_view text);

/// Hashed bag-of-words: each token lands in bucket fnv1a64(token) % D, bucket
/// counts are L2-normalized. Text without tokens maps to the zero vector.
class HashingEmbedder final : public Embedder {
public:
    static constexpr std::size_t kDefaultDimension = 256;

    explicit HashingEmbedder(std::size_t dimension = kDefaultDimension);

    EmbeddingVector embed(std::string_view text) const override;
    std::size_t dimension() const override { return dimension_; }

private:
    std::size_t dimension_;
};

void to_json(nlohmann::json& j, const EmbeddingVector& v);
void from_json(const nlohmann::json& j, EmbeddingVector& v);

} // namespace agentflow
