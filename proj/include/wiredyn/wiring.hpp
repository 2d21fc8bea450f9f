#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "wiredyn/typed_set.hpp"

namespace wiredyn {

/// An interface: input and output ports, no dynamics. Port names are
/// unique across inputs and outputs together.
struct BoxInterface {
    TypedFiniteSet inputs;
    TypedFiniteSet outputs;

    BoxInterface() = default;

    BoxInterface(TypedFiniteSet in, TypedFiniteSet out)
        : inputs(std::move(in)), outputs(std::move(out)) {
        for (const auto& p : inputs)
            if (outputs.contains(p.name))
                throw Error("box port name '" + p.name + "' used for both an input and an output");
    }

    friend bool operator==(const BoxInterface&, const BoxInterface&) = default;
};

/// Tensor X1 (+) X2 of two boxes. Any port name occurring in both boxes
/// is qualified as "<tag>.<name>" on each side.
inline BoxInterface tensor(const BoxInterface& x1, const BoxInterface& x2,
                           std::string_view left_tag = "L", std::string_view right_tag = "R") {
    auto names_of = [](const BoxInterface& b) {
        std::unordered_set<std::string> s;
        for (const auto& p : b.inputs) s.insert(p.name);
        for (const auto& p : b.outputs) s.insert(p.name);
        return s;
    };
    const auto n1 = names_of(x1);
    const auto n2 = names_of(x2);
    auto merge = [&](const TypedFiniteSet& a, const TypedFiniteSet& b) {
        std::vector<Port> ports;
        ports.reserve(a.size() + b.size());
        for (const auto& p : a)
            ports.push_back({n2.contains(p.name) ? std::string(left_tag) + "." + p.name : p.name,
                             p.type});
        for (const auto& p : b)
            ports.push_back({n1.contains(p.name) ? std::string(right_tag) + "." + p.name : p.name,
                             p.type});
        return TypedFiniteSet(std::move(ports));
    };
    return BoxInterface(merge(x1.inputs, x2.inputs), merge(x1.outputs, x2.outputs));
}

/// n-ary tensor with one tag per box; a port is qualified iff its name
/// occurs in more than one box.
inline BoxInterface tensor_all(const std::vector<BoxInterface>& boxes,
                               const std::vector<std::string>& tags) {
    if (boxes.size() != tags.size()) throw Error("tensor_all: one tag per box required");
    std::vector<std::unordered_set<std::string>> names(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        for (const auto& p : boxes[i].inputs) names[i].insert(p.name);
        for (const auto& p : boxes[i].outputs) names[i].insert(p.name);
    }
    auto collides = [&](std::size_t i, const std::string& name) {
        for (std::size_t j = 0; j < boxes.size(); ++j)
            if (j != i && names[j].contains(name)) return true;
        return false;
    };
    std::vector<Port> ins, outs;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        for (const auto& p : boxes[i].inputs)
            ins.push_back({collides(i, p.name) ? tags[i] + "." + p.name : p.name, p.type});
        for (const auto& p : boxes[i].outputs)
            outs.push_back({collides(i, p.name) ? tags[i] + "." + p.name : p.name, p.type});
    }
    return BoxInterface(TypedFiniteSet(std::move(ins)), TypedFiniteSet(std::move(outs)));
}

/// One problem found by validate().
struct Violation {
    std::string code; // "exposed-port" | "split-port" | "type-mismatch" | "passing-wire"
    std::string message;
};

/// Which of the four port groups an endpoint lives in.
enum class PortSide { DomIn, DomOut, CodIn, CodOut };

struct Endpoint {
    PortSide side;
    std::string port;
};

inline Endpoint dom_in(std::string p) { return {PortSide::DomIn, std::move(p)}; }
inline Endpoint dom_out(std::string p) { return {PortSide::DomOut, std::move(p)}; }
inline Endpoint cod_in(std::string p) { return {PortSide::CodIn, std::move(p)}; }
inline Endpoint cod_out(std::string p) { return {PortSide::CodOut, std::move(p)}; }

/// The four blocks of the permutation matrix realizing phi on port
/// vectors. Row layout [inp(X-bar); out(Y-bar)], column layout
/// [out(X-bar); inp(Y-bar)]; blocks are named target-then-source:
///   xx: inp(X-bar) <- out(X-bar)    xy: inp(X-bar) <- inp(Y-bar)
///   yx: out(Y-bar) <- out(X-bar)    yy: out(Y-bar) <- inp(Y-bar), always 0
struct PhiBlocks {
    Eigen::MatrixXd xx, xy, yx, yy;

    Eigen::MatrixXd full() const {
        Eigen::MatrixXd m(xx.rows() + yx.rows(), xx.cols() + xy.cols());
        m << xx, xy, yx, yy;
        return m;
    }
};

/// A wiring diagram Phi = (X, Y, phi): a typed bijection
/// phi: inp(X) + out(Y) -> out(X) + inp(Y) with no passing wires.
/// The forward map on inp(X) + out(Y) is the single source of truth;
/// phi^in / phi^out are derived views.
class WiringDiagram {
public:
    WiringDiagram() = default;

    /// Wires are (a, phi(a)) pairs: a is a DomIn or CodOut endpoint,
    /// phi(a) a DomOut or CodIn endpoint. Unknown names or endpoints on
    /// the wrong side are construction errors; missing or duplicated
    /// wires are representable and reported by validate().
    static WiringDiagram from_wires(BoxInterface dom, BoxInterface cod,
                                    const std::vector<std::pair<Endpoint, Endpoint>>& wires) {
        WiringDiagram wd;
        wd.dom_ = std::move(dom);
        wd.cod_ = std::move(cod);
        wd.phi_.assign(wd.domain_size(), std::nullopt);
        for (const auto& [a, b] : wires) {
            const std::size_t src = wd.domain_index(a);
            const std::size_t dst = wd.codomain_index(b);
            if (wd.phi_[src])
                throw Error("port '" + a.port + "' is wired twice");
            wd.phi_[src] = dst;
        }
        return wd;
    }

    static WiringDiagram from_map(BoxInterface dom, BoxInterface cod,
                                  std::vector<std::optional<std::size_t>> phi) {
        WiringDiagram wd;
        wd.dom_ = std::move(dom);
        wd.cod_ = std::move(cod);
        if (phi.size() != wd.domain_size())
            throw Error("wiring map has the wrong number of entries");
        wd.phi_ = std::move(phi);
        return wd;
    }

    const BoxInterface& dom() const { return dom_; }
    const BoxInterface& cod() const { return cod_; }

    /// Size of phi's domain inp(X) + out(Y) in ports.
    std::size_t domain_size() const { return dom_.inputs.size() + cod_.outputs.size(); }
    /// Size of phi's codomain out(X) + inp(Y) in ports.
    std::size_t codomain_size() const { return dom_.outputs.size() + cod_.inputs.size(); }

    /// phi as stored: index over [inp(X) | out(Y)] to index over
    /// [out(X) | inp(Y)], nullopt where no wire was given.
    const std::vector<std::optional<std::size_t>>& map() const { return phi_; }

    bool domain_is_cod_output(std::size_t i) const { return i >= dom_.inputs.size(); }
    bool codomain_is_cod_input(std::size_t j) const { return j >= dom_.outputs.size(); }

    const Port& domain_port(std::size_t i) const {
        return domain_is_cod_output(i) ? cod_.outputs[i - dom_.inputs.size()] : dom_.inputs[i];
    }
    const Port& codomain_port(std::size_t j) const {
        return codomain_is_cod_input(j) ? cod_.inputs[j - dom_.outputs.size()] : dom_.outputs[j];
    }

    std::vector<Violation> validate() const {
        std::vector<Violation> v;
        std::vector<int> hits(codomain_size(), 0);
        for (std::size_t i = 0; i < domain_size(); ++i) {
            if (!phi_[i]) {
                v.push_back({"exposed-port",
                             "port '" + domain_port(i).name + "' is not wired"});
                continue;
            }
            const std::size_t j = *phi_[i];
            ++hits[j];
            if (domain_port(i).type != codomain_port(j).type)
                v.push_back({"type-mismatch", "wire " + domain_port(i).name + " -> " +
                                                  codomain_port(j).name +
                                                  " joins ports of unequal dimension"});
            if (domain_is_cod_output(i) && codomain_is_cod_input(j))
                v.push_back({"passing-wire", "outer output '" + domain_port(i).name +
                                                 "' is fed by outer input '" +
                                                 codomain_port(j).name + "'"});
        }
        for (std::size_t j = 0; j < codomain_size(); ++j) {
            if (hits[j] == 0)
                v.push_back({"exposed-port",
                             "port '" + codomain_port(j).name + "' is not wired"});
            else if (hits[j] > 1)
                v.push_back({"split-port", "port '" + codomain_port(j).name +
                                               "' is the target of " + std::to_string(hits[j]) +
                                               " wires"});
        }
        return v;
    }

    bool is_valid() const { return validate().empty(); }

    void ensure_valid() const {
        auto v = validate();
        if (v.empty()) return;
        std::string msg = "invalid wiring diagram:";
        for (const auto& viol : v) msg += "\n  [" + viol.code + "] " + viol.message;
        throw ValidationError(msg);
    }

    /// phi as a typed bijection between the (tensored) port sets.
    /// Requires validity.
    TypedBijection bijection() const {
        ensure_valid();
        TypedFiniteSet domain = disjoint_union(dom_.inputs, cod_.outputs, "dom", "cod");
        TypedFiniteSet codomain = disjoint_union(dom_.outputs, cod_.inputs, "dom", "cod");
        std::vector<std::size_t> map(phi_.size());
        for (std::size_t i = 0; i < phi_.size(); ++i) map[i] = *phi_[i];
        return TypedBijection(std::move(domain), std::move(codomain), std::move(map));
    }

    friend bool operator==(const WiringDiagram&, const WiringDiagram&) = default;

private:
    std::size_t domain_index(const Endpoint& e) const {
        switch (e.side) {
        case PortSide::DomIn:
            if (auto i = dom_.inputs.index_of(e.port)) return *i;
            throw Error("unknown input port '" + e.port + "' on the inner box");
        case PortSide::CodOut:
            if (auto i = cod_.outputs.index_of(e.port)) return dom_.inputs.size() + *i;
            throw Error("unknown output port '" + e.port + "' on the outer box");
        default:
            throw Error("wire source '" + e.port +
                        "' must be an inner input or an outer output");
        }
    }

    std::size_t codomain_index(const Endpoint& e) const {
        switch (e.side) {
        case PortSide::DomOut:
            if (auto i = dom_.outputs.index_of(e.port)) return *i;
            throw Error("unknown output port '" + e.port + "' on the inner box");
        case PortSide::CodIn:
            if (auto i = cod_.inputs.index_of(e.port)) return dom_.outputs.size() + *i;
            throw Error("unknown input port '" + e.port + "' on the outer box");
        default:
            throw Error("wire target '" + e.port +
                        "' must be an inner output or an outer input");
        }
    }

    BoxInterface dom_;
    BoxInterface cod_;
    std::vector<std::optional<std::size_t>> phi_;
};

/// Identity wiring diagram on a box: every inner input is fed by the
/// matching outer input, every outer output by the matching inner output.
inline WiringDiagram identity(const BoxInterface& x) {
    std::vector<std::optional<std::size_t>> phi(x.inputs.size() + x.outputs.size());
    for (std::size_t i = 0; i < x.inputs.size(); ++i) phi[i] = x.outputs.size() + i;
    for (std::size_t i = 0; i < x.outputs.size(); ++i) phi[x.inputs.size() + i] = i;
    return WiringDiagram::from_map(x, x, std::move(phi));
}

/// Composition Psi o Phi = (X, Z, omega) by elementwise port chasing.
/// Requires cod(phi) = dom(psi) port-for-port and both diagrams valid.
inline WiringDiagram compose(const WiringDiagram& phi, const WiringDiagram& psi) {
    if (!(phi.cod() == psi.dom()))
        throw InterfaceError("compose: codomain of the first diagram must equal the domain "
                             "of the second, port-for-port");
    phi.ensure_valid();
    psi.ensure_valid();

    const BoxInterface& x = phi.dom();
    const BoxInterface& y = phi.cod();
    const BoxInterface& z = psi.cod();
    const std::size_t n_xout = x.outputs.size();
    const std::size_t n_yout = y.outputs.size();

    // phi^out as out(Y) index -> out(X) index.
    auto phi_out = [&](std::size_t yout) { return *phi.map()[x.inputs.size() + yout]; };

    std::vector<std::optional<std::size_t>> omega(x.inputs.size() + z.outputs.size());
    for (std::size_t a = 0; a < x.inputs.size(); ++a) {
        const std::size_t b = *phi.map()[a];
        if (b < n_xout) {
            omega[a] = b; // lands on an inner output already
            continue;
        }
        const std::size_t y_in = b - n_xout;
        const std::size_t c = *psi.map()[y_in];
        if (c >= n_yout) {
            omega[a] = n_xout + (c - n_yout); // outer input of Z
        } else {
            omega[a] = phi_out(c); // back through phi^out into out(X)
        }
    }
    for (std::size_t zo = 0; zo < z.outputs.size(); ++zo) {
        const std::size_t c = *psi.map()[y.inputs.size() + zo]; // in out(Y), no passing wires
        omega[x.inputs.size() + zo] = phi_out(c);
    }
    return WiringDiagram::from_map(x, z, std::move(omega));
}

/// Monoidal product of wiring diagrams: boxes stack, phi acts blockwise.
inline WiringDiagram tensor(const WiringDiagram& p1, const WiringDiagram& p2,
                            std::string_view left_tag = "L", std::string_view right_tag = "R") {
    const BoxInterface dom = tensor(p1.dom(), p2.dom(), left_tag, right_tag);
    const BoxInterface cod = tensor(p1.cod(), p2.cod(), left_tag, right_tag);

    const std::size_t in1 = p1.dom().inputs.size();
    const std::size_t in2 = p2.dom().inputs.size();
    const std::size_t out1 = p1.dom().outputs.size();
    const std::size_t out2 = p2.dom().outputs.size();
    const std::size_t yin1 = p1.cod().inputs.size();
    const std::size_t yout1 = p1.cod().outputs.size();

    // Codomain index translation into the stacked layout.
    auto tr1 = [&](std::size_t j) { return j < out1 ? j : out1 + out2 + (j - out1); };
    auto tr2 = [&](std::size_t j) {
        return j < out2 ? out1 + j : out1 + out2 + yin1 + (j - out2);
    };

    std::vector<std::optional<std::size_t>> phi(dom.inputs.size() + cod.outputs.size());
    for (std::size_t i = 0; i < in1; ++i)
        if (p1.map()[i]) phi[i] = tr1(*p1.map()[i]);
    for (std::size_t i = 0; i < in2; ++i)
        if (p2.map()[i]) phi[in1 + i] = tr2(*p2.map()[i]);
    for (std::size_t i = 0; i < yout1; ++i)
        if (p1.map()[in1 + i]) phi[in1 + in2 + i] = tr1(*p1.map()[in1 + i]);
    for (std::size_t i = 0; i < p2.cod().outputs.size(); ++i)
        if (p2.map()[in2 + i]) phi[in1 + in2 + yout1 + i] = tr2(*p2.map()[in2 + i]);

    return WiringDiagram::from_map(dom, cod, std::move(phi));
}

/// An operadic wiring diagram Phi: X_1, ..., X_n -> Y. Identical to a
/// wiring diagram on the tensored domain; labels tag the domain boxes
/// (and qualify colliding port names when flattening).
class OperadicWiring {
public:
    struct PortRef {
        std::string box;  // a domain label, or empty for the codomain box
        std::string port;
    };

    static OperadicWiring from_wires(std::vector<BoxInterface> doms,
                                     std::vector<std::string> labels, BoxInterface cod,
                                     const std::vector<std::pair<PortRef, PortRef>>& wires) {
        if (doms.size() != labels.size())
            throw Error("operadic wiring: one label per domain box required");
        OperadicWiring op;
        op.doms_ = std::move(doms);
        op.labels_ = std::move(labels);
        op.cod_ = std::move(cod);

        const BoxInterface stacked = op.stacked_dom();
        std::vector<std::pair<Endpoint, Endpoint>> flat;
        flat.reserve(wires.size());
        for (const auto& [a, b] : wires)
            flat.emplace_back(op.resolve_src(a), op.resolve_dst(b));
        op.flat_ = WiringDiagram::from_wires(stacked, op.cod_, flat);
        return op;
    }

    const std::vector<BoxInterface>& doms() const { return doms_; }
    const std::vector<std::string>& labels() const { return labels_; }
    const BoxInterface& cod() const { return cod_; }

    BoxInterface stacked_dom() const { return tensor_all(doms_, labels_); }

    std::vector<Violation> validate() const { return flat_.validate(); }

    friend bool operator==(const OperadicWiring&, const OperadicWiring&) = default;

    /// The ordinary wiring diagram on the tensored domain.
    const WiringDiagram& flatten() const { return flat_; }

private:
    // Translate a labeled port reference into the stacked box's port name.
    std::string stacked_name(std::size_t box_idx, const std::string& port,
                             bool is_input) const {
        const BoxInterface stacked = stacked_dom();
        std::size_t offset = 0;
        const TypedFiniteSet& side = is_input ? stacked.inputs : stacked.outputs;
        for (std::size_t j = 0; j < box_idx; ++j)
            offset += is_input ? doms_[j].inputs.size() : doms_[j].outputs.size();
        const auto& ports = is_input ? doms_[box_idx].inputs : doms_[box_idx].outputs;
        auto i = ports.index_of(port);
        if (!i)
            throw Error("unknown port '" + port + "' on box '" + labels_[box_idx] + "'");
        return side[offset + *i].name;
    }

    std::size_t label_index(const std::string& label) const {
        for (std::size_t i = 0; i < labels_.size(); ++i)
            if (labels_[i] == label) return i;
        throw Error("unknown box label '" + label + "'");
    }

    Endpoint resolve_src(const PortRef& r) const {
        if (r.box.empty()) return cod_out(r.port);
        return dom_in(stacked_name(label_index(r.box), r.port, /*is_input=*/true));
    }

    Endpoint resolve_dst(const PortRef& r) const {
        if (r.box.empty()) return cod_in(r.port);
        return dom_out(stacked_name(label_index(r.box), r.port, /*is_input=*/false));
    }

    std::vector<BoxInterface> doms_;
    std::vector<std::string> labels_;
    BoxInterface cod_;
    WiringDiagram flat_;
};

inline WiringDiagram flatten_operadic(const OperadicWiring& op) { return op.flatten(); }

/// The block permutation matrix of a valid wiring diagram: each wire of
/// dimension d contributes a d x d identity block. See PhiBlocks for the
/// layout; the yy block is identically zero (no passing wires).
inline PhiBlocks phi_matrix(const WiringDiagram& wd) {
    wd.ensure_valid();
    const int rx = wd.dom().inputs.total_dim();
    const int ry = wd.cod().outputs.total_dim();
    const int cx = wd.dom().outputs.total_dim();
    const int cy = wd.cod().inputs.total_dim();
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(rx + ry, cx + cy);

    auto row_offset = [&](std::size_t i) {
        return wd.domain_is_cod_output(i)
                   ? rx + wd.cod().outputs.offset(i - wd.dom().inputs.size())
                   : wd.dom().inputs.offset(i);
    };
    auto col_offset = [&](std::size_t j) {
        return wd.codomain_is_cod_input(j)
                   ? cx + wd.cod().inputs.offset(j - wd.dom().outputs.size())
                   : wd.dom().outputs.offset(j);
    };

    for (std::size_t i = 0; i < wd.domain_size(); ++i) {
        const int d = wd.domain_port(i).type.dim;
        full.block(row_offset(i), col_offset(*wd.map()[i]), d, d) =
            Eigen::MatrixXd::Identity(d, d);
    }

    PhiBlocks b;
    b.xx = full.block(0, 0, rx, cx);
    b.xy = full.block(0, cx, rx, cy);
    b.yx = full.block(rx, 0, ry, cx);
    b.yy = full.block(rx, cx, ry, cy);
    return b;
}

} // namespace wiredyn
