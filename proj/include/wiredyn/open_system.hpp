#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "wiredyn/wiring.hpp"

namespace wiredyn {

/// An open dynamical system on a box: named state variables, a
/// differential equation f_in(state, input) -> d(state)/dt, and a
/// readout f_out(state) -> output. The readout never sees the input;
/// its signature enforces that structurally. Evaluable maps must be
/// deterministic; values are immutable after construction.
class OpenSystem {
public:
    using Dynamics = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
    using Readout = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

    OpenSystem() = default;

    OpenSystem(TypedFiniteSet states, BoxInterface box, Dynamics f_in, Readout f_out)
        : states_(std::move(states)), box_(std::move(box)), f_in_(std::move(f_in)),
          f_out_(std::move(f_out)) {}

    const TypedFiniteSet& states() const { return states_; }
    const BoxInterface& box() const { return box_; }
    const Dynamics& f_in() const { return f_in_; }
    const Readout& f_out() const { return f_out_; }

    int state_dim() const { return states_.total_dim(); }
    int input_dim() const { return box_.inputs.total_dim(); }
    int output_dim() const { return box_.outputs.total_dim(); }

    /// Joint evaluation (f_in(state, input), f_out(state)). Checks
    /// lengths and reports any non-finite coordinate.
    std::pair<Eigen::VectorXd, Eigen::VectorXd> evaluate(const Eigen::VectorXd& state,
                                                         const Eigen::VectorXd& input) const {
        check_len("state", state, state_dim());
        check_len("input", input, input_dim());
        Eigen::VectorXd deriv = f_in_(state, input);
        check_len("derivative", deriv, state_dim());
        check_finite("derivative", deriv);
        Eigen::VectorXd output = f_out_(state);
        check_len("output", output, output_dim());
        check_finite("output", output);
        return {std::move(deriv), std::move(output)};
    }

private:
    static void check_len(const char* what, const Eigen::VectorXd& v, int expect) {
        if (v.size() != expect)
            throw DimensionError(std::string(what) + " vector has length " +
                                 std::to_string(v.size()) + ", expected " +
                                 std::to_string(expect));
    }
    static void check_finite(const char* what, const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (!std::isfinite(v[i]))
                throw NumericError(std::string(what) + " is non-finite at coordinate " +
                                   std::to_string(i));
    }

    TypedFiniteSet states_;
    BoxInterface box_;
    Dynamics f_in_;
    Readout f_out_;
};

/// The action of a wiring diagram on an open system: states are kept,
/// the inner inputs are routed either from the system's own outputs or
/// from the outer inputs, and the outer outputs are read off the inner
/// ones. The routing table is precomputed so per-step evaluation stays
/// allocation-light.
inline OpenSystem apply_wiring(const WiringDiagram& phi, const OpenSystem& sys) {
    if (!(sys.box() == phi.dom()))
        throw InterfaceError("apply_wiring: system's box must equal the diagram's domain");
    phi.ensure_valid();

    const BoxInterface& x = phi.dom();
    const BoxInterface& y = phi.cod();

    struct Route {
        bool from_own_output;
        int src_offset;
        int dst_offset;
        int dim;
    };
    std::vector<Route> in_routes;
    in_routes.reserve(x.inputs.size());
    const std::size_t n_xout = x.outputs.size();
    for (std::size_t a = 0; a < x.inputs.size(); ++a) {
        const std::size_t b = *phi.map()[a];
        Route r;
        r.dim = x.inputs[a].type.dim;
        r.dst_offset = x.inputs.offset(a);
        if (b < n_xout) {
            r.from_own_output = true;
            r.src_offset = x.outputs.offset(b);
        } else {
            r.from_own_output = false;
            r.src_offset = y.inputs.offset(b - n_xout);
        }
        in_routes.push_back(r);
    }
    std::vector<Route> out_routes;
    out_routes.reserve(y.outputs.size());
    for (std::size_t o = 0; o < y.outputs.size(); ++o) {
        const std::size_t b = *phi.map()[x.inputs.size() + o]; // in out(X)
        out_routes.push_back({true, x.outputs.offset(b), y.outputs.offset(o),
                              y.outputs[o].type.dim});
    }

    const int inner_in_dim = x.inputs.total_dim();
    auto f_in = sys.f_in();
    auto f_out = sys.f_out();

    OpenSystem::Dynamics g_in = [in_routes, inner_in_dim, f_in, f_out](
                                    const Eigen::VectorXd& s, const Eigen::VectorXd& yv) {
        const Eigen::VectorXd own = f_out(s);
        Eigen::VectorXd xin(inner_in_dim);
        for (const auto& r : in_routes)
            xin.segment(r.dst_offset, r.dim) =
                (r.from_own_output ? own : yv).segment(r.src_offset, r.dim);
        return f_in(s, xin);
    };
    const int outer_out_dim = y.outputs.total_dim();
    OpenSystem::Readout g_out = [out_routes, outer_out_dim, f_out](const Eigen::VectorXd& s) {
        const Eigen::VectorXd own = f_out(s);
        Eigen::VectorXd yout(outer_out_dim);
        for (const auto& r : out_routes)
            yout.segment(r.dst_offset, r.dim) = own.segment(r.src_offset, r.dim);
        return yout;
    };

    return OpenSystem(sys.states(), y, std::move(g_in), std::move(g_out));
}

/// Coherence product: disjoint states, componentwise dynamics on the
/// stacked box.
inline OpenSystem product(const OpenSystem& s1, const OpenSystem& s2,
                          std::string_view left_tag = "L", std::string_view right_tag = "R") {
    TypedFiniteSet states = disjoint_union(s1.states(), s2.states(), left_tag, right_tag);
    BoxInterface box = tensor(s1.box(), s2.box(), left_tag, right_tag);

    const int m1 = s1.state_dim(), m2 = s2.state_dim();
    const int u1 = s1.input_dim(), u2 = s2.input_dim();
    const int o1 = s1.output_dim(), o2 = s2.output_dim();
    auto f1 = s1.f_in(), f2 = s2.f_in();
    auto g1 = s1.f_out(), g2 = s2.f_out();

    OpenSystem::Dynamics f_in = [=](const Eigen::VectorXd& s, const Eigen::VectorXd& u) {
        Eigen::VectorXd d(m1 + m2);
        d.head(m1) = f1(s.head(m1), u.head(u1));
        d.tail(m2) = f2(s.tail(m2), u.tail(u2));
        return d;
    };
    OpenSystem::Readout f_out = [=](const Eigen::VectorXd& s) {
        Eigen::VectorXd o(o1 + o2);
        o.head(o1) = g1(s.head(m1));
        o.tail(o2) = g2(s.tail(m2));
        return o;
    };
    return OpenSystem(std::move(states), std::move(box), std::move(f_in), std::move(f_out));
}

/// Disjoint union of several state sets, qualifying names that occur in
/// more than one set with the owning box's label.
inline TypedFiniteSet merge_state_sets(const std::vector<TypedFiniteSet>& sets,
                                       const std::vector<std::string>& tags) {
    std::vector<Port> ports;
    auto collides = [&](std::size_t i, const std::string& name) {
        for (std::size_t j = 0; j < sets.size(); ++j)
            if (j != i && sets[j].contains(name)) return true;
        return false;
    };
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (const auto& p : sets[i])
            ports.push_back({collides(i, p.name) ? tags[i] + "." + p.name : p.name, p.type});
    return TypedFiniteSet(std::move(ports));
}

/// Operadic action: take the product of the systems (disjoint union of
/// the state variables) and apply the flattened diagram.
inline OpenSystem apply_operadic(const OperadicWiring& op,
                                 const std::vector<OpenSystem>& systems) {
    if (systems.size() != op.doms().size())
        throw InterfaceError("apply_operadic: expected " + std::to_string(op.doms().size()) +
                             " systems, got " + std::to_string(systems.size()));
    for (std::size_t i = 0; i < systems.size(); ++i)
        if (!(systems[i].box() == op.doms()[i]))
            throw InterfaceError("apply_operadic: system " + std::to_string(i) +
                                 " does not live on domain box '" + op.labels()[i] + "'");

    // Fold the product so the port and state layouts match tensor_all's
    // n-ary qualification (qualify only on cross-box collisions).
    const BoxInterface stacked = op.stacked_dom();
    std::vector<TypedFiniteSet> state_sets;
    state_sets.reserve(systems.size());
    for (const auto& s : systems) state_sets.push_back(s.states());
    TypedFiniteSet states = merge_state_sets(state_sets, op.labels());

    const std::size_t n = systems.size();
    std::vector<int> mdim(n), udim(n), odim(n);
    std::vector<OpenSystem::Dynamics> fins(n);
    std::vector<OpenSystem::Readout> fouts(n);
    for (std::size_t i = 0; i < n; ++i) {
        mdim[i] = systems[i].state_dim();
        udim[i] = systems[i].input_dim();
        odim[i] = systems[i].output_dim();
        fins[i] = systems[i].f_in();
        fouts[i] = systems[i].f_out();
    }
    const int mtot = states.total_dim();
    const int ototal = stacked.outputs.total_dim();

    OpenSystem::Dynamics f_in = [=](const Eigen::VectorXd& s, const Eigen::VectorXd& u) {
        Eigen::VectorXd d(mtot);
        int mo = 0, uo = 0;
        for (std::size_t i = 0; i < n; ++i) {
            d.segment(mo, mdim[i]) = fins[i](s.segment(mo, mdim[i]), u.segment(uo, udim[i]));
            mo += mdim[i];
            uo += udim[i];
        }
        return d;
    };
    OpenSystem::Readout f_out = [=](const Eigen::VectorXd& s) {
        Eigen::VectorXd o(ototal);
        int mo = 0, oo = 0;
        for (std::size_t i = 0; i < n; ++i) {
            o.segment(oo, odim[i]) = fouts[i](s.segment(mo, mdim[i]));
            mo += mdim[i];
            oo += odim[i];
        }
        return o;
    };

    OpenSystem combined(std::move(states), stacked, std::move(f_in), std::move(f_out));
    return apply_wiring(op.flatten(), combined);
}

} // namespace wiredyn
