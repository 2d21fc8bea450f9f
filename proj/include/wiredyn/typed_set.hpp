#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "wiredyn/errors.hpp"

namespace wiredyn {

/// The Euclidean space R^dim carried by a port. dim = 0 is a legal
/// (trivial) port.
struct PortType {
    int dim = 1;

    friend bool operator==(const PortType&, const PortType&) = default;
};

struct Port {
    std::string name;
    PortType type;

    friend bool operator==(const Port&, const Port&) = default;
};

/// An ordered list of named, typed ports. Port names are unique within
/// the set. Vectors over the set use the canonical layout: ports in
/// declaration order, each contributing a contiguous slice of length dim.
class TypedFiniteSet {
public:
    TypedFiniteSet() = default;

    explicit TypedFiniteSet(std::vector<Port> ports) : ports_(std::move(ports)) {
        std::unordered_set<std::string_view> seen;
        offsets_.reserve(ports_.size());
        int off = 0;
        for (const auto& p : ports_) {
            if (p.type.dim < 0)
                throw DimensionError("port '" + p.name + "' has negative dimension");
            if (!seen.insert(p.name).second)
                throw Error("duplicate port name '" + p.name + "'");
            offsets_.push_back(off);
            off += p.type.dim;
        }
        total_dim_ = off;
    }

    std::size_t size() const { return ports_.size(); }
    bool empty() const { return ports_.empty(); }
    const Port& operator[](std::size_t i) const { return ports_[i]; }
    const std::vector<Port>& ports() const { return ports_; }

    auto begin() const { return ports_.begin(); }
    auto end() const { return ports_.end(); }

    /// Dimension of the dependent product of all port types.
    int total_dim() const { return total_dim_; }

    /// Start of port i's slice in the canonical vector layout.
    int offset(std::size_t i) const { return offsets_[i]; }

    std::optional<std::size_t> index_of(std::string_view name) const {
        for (std::size_t i = 0; i < ports_.size(); ++i)
            if (ports_[i].name == name) return i;
        return std::nullopt;
    }

    bool contains(std::string_view name) const { return index_of(name).has_value(); }

    friend bool operator==(const TypedFiniteSet& a, const TypedFiniteSet& b) {
        return a.ports_ == b.ports_;
    }

private:
    std::vector<Port> ports_;
    std::vector<int> offsets_;
    int total_dim_ = 0;
};

/// Coproduct of two typed sets: ports of s1 in order, then ports of s2.
/// Names that appear on both sides are qualified as "<tag>.<name>".
inline TypedFiniteSet disjoint_union(const TypedFiniteSet& s1, const TypedFiniteSet& s2,
                                     std::string_view left_tag = "L",
                                     std::string_view right_tag = "R") {
    std::vector<Port> out;
    out.reserve(s1.size() + s2.size());
    auto qualify = [](std::string_view tag, const std::string& name) {
        return std::string(tag) + "." + name;
    };
    for (const auto& p : s1) {
        if (s2.contains(p.name))
            out.push_back({qualify(left_tag, p.name), p.type});
        else
            out.push_back(p);
    }
    for (const auto& p : s2) {
        if (s1.contains(p.name))
            out.push_back({qualify(right_tag, p.name), p.type});
        else
            out.push_back(p);
    }
    return TypedFiniteSet(std::move(out));
}

/// A type-preserving function between typed finite sets: each domain
/// port maps to a codomain port of equal dimension.
class TypedFunction {
public:
    TypedFunction() = default;

    /// map[i] is the codomain index assigned to domain port i.
    TypedFunction(TypedFiniteSet domain, TypedFiniteSet codomain, std::vector<std::size_t> map)
        : domain_(std::move(domain)), codomain_(std::move(codomain)), map_(std::move(map)) {
        if (map_.size() != domain_.size())
            throw Error("typed function must be defined on every domain port");
        for (std::size_t i = 0; i < map_.size(); ++i) {
            if (map_[i] >= codomain_.size())
                throw Error("typed function maps port '" + domain_[i].name +
                            "' outside the codomain");
            if (domain_[i].type != codomain_[map_[i]].type)
                throw DimensionError("typed function breaks typing on port '" +
                                     domain_[i].name + "'");
        }
    }

    /// Convenience: build from port-name pairs.
    static TypedFunction from_names(TypedFiniteSet domain, TypedFiniteSet codomain,
                                    const std::vector<std::pair<std::string, std::string>>& pairs) {
        std::vector<std::size_t> map(domain.size(), static_cast<std::size_t>(-1));
        for (const auto& [from, to] : pairs) {
            auto di = domain.index_of(from);
            auto ci = codomain.index_of(to);
            if (!di) throw Error("unknown domain port '" + from + "'");
            if (!ci) throw Error("unknown codomain port '" + to + "'");
            map[*di] = *ci;
        }
        for (std::size_t i = 0; i < map.size(); ++i)
            if (map[i] == static_cast<std::size_t>(-1))
                throw Error("no image given for domain port '" + domain[i].name + "'");
        return TypedFunction(std::move(domain), std::move(codomain), std::move(map));
    }

    const TypedFiniteSet& domain() const { return domain_; }
    const TypedFiniteSet& codomain() const { return codomain_; }
    std::size_t apply(std::size_t domain_index) const { return map_[domain_index]; }
    const std::vector<std::size_t>& map() const { return map_; }

    bool is_bijection() const {
        if (domain_.size() != codomain_.size()) return false;
        std::vector<bool> hit(codomain_.size(), false);
        for (auto c : map_) {
            if (hit[c]) return false;
            hit[c] = true;
        }
        return true;
    }

    friend bool operator==(const TypedFunction& a, const TypedFunction& b) {
        return a.domain_ == b.domain_ && a.codomain_ == b.codomain_ && a.map_ == b.map_;
    }

private:
    TypedFiniteSet domain_;
    TypedFiniteSet codomain_;
    std::vector<std::size_t> map_;
};

/// A TypedFunction that is additionally bijective.
class TypedBijection : public TypedFunction {
public:
    TypedBijection() = default;

    explicit TypedBijection(TypedFunction q) : TypedFunction(std::move(q)) {
        if (!is_bijection()) throw Error("typed function is not a bijection");
    }

    TypedBijection(TypedFiniteSet domain, TypedFiniteSet codomain, std::vector<std::size_t> map)
        : TypedBijection(TypedFunction(std::move(domain), std::move(codomain), std::move(map))) {}

    TypedBijection inverse() const {
        std::vector<std::size_t> inv(map().size());
        for (std::size_t i = 0; i < map().size(); ++i) inv[map()[i]] = i;
        return TypedBijection(codomain(), domain(), std::move(inv));
    }
};

/// q2 after q1.
inline TypedFunction compose(const TypedFunction& q2, const TypedFunction& q1) {
    if (!(q1.codomain() == q2.domain()))
        throw InterfaceError("typed functions are not composable");
    std::vector<std::size_t> map;
    map.reserve(q1.domain().size());
    for (std::size_t i = 0; i < q1.domain().size(); ++i) map.push_back(q2.apply(q1.apply(i)));
    return TypedFunction(q1.domain(), q2.codomain(), std::move(map));
}

/// Contravariant action of q on vectors over the canonical layout:
/// the slice of the result at domain port a is the slice of v at q(a).
inline std::vector<double> pullback(const TypedFunction& q, std::span<const double> v) {
    if (static_cast<int>(v.size()) != q.codomain().total_dim())
        throw DimensionError("pullback: vector length does not match codomain dimension");
    std::vector<double> out(static_cast<std::size_t>(q.domain().total_dim()));
    for (std::size_t i = 0; i < q.domain().size(); ++i) {
        const int d = q.domain()[i].type.dim;
        const int src = q.codomain().offset(q.apply(i));
        const int dst = q.domain().offset(i);
        std::copy_n(v.begin() + src, d, out.begin() + dst);
    }
    return out;
}

inline int total_dim(const TypedFiniteSet& s) { return s.total_dim(); }

} // namespace wiredyn
