// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations used as test oracles. Nothing here
// calls into the library code it checks.
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace oracle {

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::vector<std::string> tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const unsigned char c = static_cast<unsigned char>(ch);
        const bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
        if (alnum) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline std::vector<double> embed(std::string_view text, std::size_t dim = 256) {
    std::vector<double> v(dim, 0.0);
    for (const auto& t : tokens(text)) v[fnv1a(t) % dim] += 1.0;
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0) {
        for (double& x : v) x /= n;
    }
    return v;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double text_cosine(std::string_view a, std::string_view b) { return cosine(embed(a), embed(b)); }

/// Indices of `docs` ranked by cosine against `query`, stable on ties.
inline std::vector<std::size_t> rank(const std::vector<std::string>& docs, std::string_view query) {
    const auto q = embed(query);
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < docs.size(); ++i) scored.push_back({cosine(embed(docs[i]), q), i});
    std::vector<std::size_t> order(docs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return scored[x].first > scored[y].first; });
    return order;
}

/// True when `order` lists every node once and respects every edge
/// child -> parents (parents must come first).
inline bool is_linear_extension(const std::vector<std::string>& order,
                                const std::map<std::string, std::set<std::string>>& parents) {
    if (order.size() != parents.size()) return false;
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (!parents.count(order[i]) || !pos.emplace(order[i], i).second) return false;
    }
    for (const auto& [child, ps] : parents) {
        for (const auto& p : ps) {
            if (pos.at(p) >= pos.at(child)) return false;
        }
    }
    return true;
}

} // namespace oracle
