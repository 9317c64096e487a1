#pragma once

// Index sets Dgm(n, m): length-m sequences of particle pairs (i < j) with no
// pair repeated back-to-back.

#include <compare>
#include <cstddef>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "critshe/error.hpp"

namespace critshe::diagrams {

using Pair = std::pair<int, int>; // 1-based, first < second

struct DiagramIndex {
    int n = 2;
    std::vector<Pair> pairs;

    int m() const { return int(pairs.size()); }
    auto operator<=>(const DiagramIndex&) const = default;

    void validate() const {
        if (n < 2) throw DomainError("DiagramIndex: n must be >= 2");
        if (pairs.empty()) throw DomainError("DiagramIndex: m must be >= 1");
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const auto [i, j] = pairs[k];
            if (!(1 <= i && i < j && j <= n)) throw DomainError("DiagramIndex: pair out of range");
            if (k > 0 && pairs[k] == pairs[k - 1]) throw DomainError("DiagramIndex: consecutive pairs repeat");
        }
    }

    std::string str() const {
        std::string s = "(";
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            if (k) s += ",";
            s += "(" + std::to_string(pairs[k].first) + "," + std::to_string(pairs[k].second) + ")";
        }
        return s + ")";
    }
};

inline std::ostream& operator<<(std::ostream& os, const DiagramIndex& d) { return os << d.str(); }

struct DiagramClass {
    bool degenerate = false;
};

inline DiagramClass classify(const DiagramIndex& d) {
    d.validate();
    std::set<int> used;
    for (auto [i, j] : d.pairs) {
        used.insert(i);
        used.insert(j);
    }
    return {int(used.size()) < d.n};
}

// All pairs of {1..n} in lexicographic order.
inline std::vector<Pair> all_pairs(int n) {
    std::vector<Pair> out;
    for (int i = 1; i <= n; ++i)
        for (int j = i + 1; j <= n; ++j) out.emplace_back(i, j);
    return out;
}

// Lazy lexicographic walk over Dgm(n, m). Holds only the current diagram.
class DiagramRange {
public:
    DiagramRange(int n, int m) : n_(n), m_(m), pairs_(n >= 2 ? all_pairs(n) : std::vector<Pair>{}) {
        if (n < 2) throw DomainError("enumerate: n must be >= 2");
        if (m < 1) throw DomainError("enumerate: m must be >= 1");
    }

    class iterator {
    public:
        using value_type = DiagramIndex;
        using difference_type = std::ptrdiff_t;

        iterator() = default;
        iterator(const DiagramRange* r, bool end) : r_(r), done_(end) {
            if (!end) {
                idx_.assign(std::size_t(r->m_), 0);
                // Smallest valid sequence alternates pair 0 and pair 1.
                for (std::size_t k = 1; k < idx_.size(); k += 2) idx_[k] = 1;
                if (r->pairs_.size() < 2 && r->m_ > 1) done_ = true;
            }
        }

        DiagramIndex operator*() const {
            DiagramIndex d{r_->n_, {}};
            d.pairs.reserve(idx_.size());
            for (std::size_t k : idx_) d.pairs.push_back(r_->pairs_[k]);
            return d;
        }

        iterator& operator++() {
            advance();
            return *this;
        }
        iterator operator++(int) {
            iterator tmp = *this;
            advance();
            return tmp;
        }
        bool operator==(const iterator& o) const {
            if (done_ || o.done_) return done_ == o.done_;
            return idx_ == o.idx_;
        }

    private:
        // Next sequence in lexicographic order: bump the rightmost position
        // that can still grow, then refill the suffix with its smallest
        // admissible completion.
        void advance() {
            const std::size_t p = r_->pairs_.size();
            for (std::size_t pos = idx_.size(); pos-- > 0;) {
                std::size_t v = idx_[pos] + 1;
                if (pos > 0 && v == idx_[pos - 1]) ++v;
                if (v < p) {
                    idx_[pos] = v;
                    for (std::size_t k = pos + 1; k < idx_.size(); ++k) idx_[k] = (idx_[k - 1] == 0) ? 1 : 0;
                    return;
                }
            }
            done_ = true;
        }

        const DiagramRange* r_ = nullptr;
        std::vector<std::size_t> idx_;
        bool done_ = true;
    };

    iterator begin() const { return iterator(this, false); }
    iterator end() const { return iterator(this, true); }

private:
    int n_, m_;
    std::vector<Pair> pairs_;
};

inline DiagramRange lazy_enumerate(int n, int m) { return DiagramRange(n, m); }

inline std::vector<DiagramIndex> enumerate(int n, int m) {
    std::vector<DiagramIndex> out;
    for (const DiagramIndex& d : DiagramRange(n, m)) out.push_back(d);
    return out;
}

using BigInt = boost::multiprecision::cpp_int;

// |Dgm(n, m)| = p (p-1)^{m-1}, p = n(n-1)/2
inline BigInt count(int n, int m) {
    if (n < 2) throw DomainError("count: n must be >= 2");
    if (m < 1) throw DomainError("count: m must be >= 1");
    const BigInt p = BigInt(n) * BigInt(n - 1) / 2;
    BigInt c = p;
    for (int k = 1; k < m; ++k) c *= (p - 1);
    return c;
}

} // namespace critshe::diagrams
