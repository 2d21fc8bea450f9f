#pragma once

#include <map>
#include <string>
#include <vector>

#include "wiredyn/document.hpp"
#include "wiredyn/linear_system.hpp"

namespace wiredyn {

/// Instantiate a matrix-defined declaration.
inline LinearOpenSystem build_linear(const SystemDocument& doc, const SystemDecl& decl) {
    if (!decl.is_linear())
        throw Error("system '" + decl.name + "' is not matrix-defined");
    const BoxDecl* box = doc.find_box(decl.box_name);
    if (!box) throw Error("system '" + decl.name + "' refers to unknown box");
    const auto& lin = std::get<LinearSpec>(decl.impl);
    return LinearOpenSystem(decl.states, box->box, lin.A, lin.B, lin.C);
}

/// Instantiate any declaration as a general system. Expression systems
/// are compiled against the flat [state; input] layout.
inline OpenSystem build_general(const SystemDocument& doc, const SystemDecl& decl) {
    if (decl.is_linear()) return to_general(build_linear(doc, decl));
    const BoxDecl* box = doc.find_box(decl.box_name);
    if (!box) throw Error("system '" + decl.name + "' refers to unknown box");
    const auto& spec = std::get<ExprSpec>(decl.impl);

    std::vector<std::string> state_slots = detail::coordinate_names(decl.states);
    std::vector<std::string> full_scope = state_slots;
    for (const auto& n : detail::coordinate_names(box->box.inputs)) full_scope.push_back(n);

    using Fn = std::function<double(std::span<const double>)>;
    std::vector<Fn> dfns, ofns;
    for (const auto& e : spec.derivs) dfns.push_back(compile_expr(e, full_scope));
    for (const auto& e : spec.outputs) ofns.push_back(compile_expr(e, state_slots));

    const int m = decl.states.total_dim();
    const int no = box->box.outputs.total_dim();
    OpenSystem::Dynamics f_in = [dfns, m](const Eigen::VectorXd& s, const Eigen::VectorXd& u) {
        std::vector<double> buf(static_cast<std::size_t>(s.size() + u.size()));
        for (Eigen::Index i = 0; i < s.size(); ++i) buf[static_cast<std::size_t>(i)] = s[i];
        for (Eigen::Index i = 0; i < u.size(); ++i)
            buf[static_cast<std::size_t>(s.size() + i)] = u[i];
        Eigen::VectorXd d(m);
        for (int i = 0; i < m; ++i) d[i] = dfns[static_cast<std::size_t>(i)](buf);
        return d;
    };
    OpenSystem::Readout f_out = [ofns, no](const Eigen::VectorXd& s) {
        std::vector<double> buf(s.data(), s.data() + s.size());
        Eigen::VectorXd o(no);
        for (int i = 0; i < no; ++i) o[i] = ofns[static_cast<std::size_t>(i)](buf);
        return o;
    };
    return OpenSystem(decl.states, box->box, std::move(f_in), std::move(f_out));
}

namespace detail {

inline const SystemDecl& bound_system(const SystemDocument& doc, const WiringDecl& wiring,
                                      std::size_t i) {
    const SystemDecl* s = doc.find_system(wiring.dom_names[i]);
    if (!s)
        throw Error("wiring '" + wiring.name + "' entry '" + wiring.dom_names[i] +
                    "' is not bound to a system");
    return *s;
}

} // namespace detail

inline bool all_linear(const SystemDocument& doc, const WiringDecl& wiring) {
    for (std::size_t i = 0; i < wiring.dom_names.size(); ++i)
        if (!detail::bound_system(doc, wiring, i).is_linear()) return false;
    return true;
}

/// Flatten a wiring whose domain entries are all matrix-defined systems.
inline LinearOpenSystem flatten_linear(const SystemDocument& doc, const WiringDecl& wiring) {
    OperadicWiring op = build_operadic(doc, wiring);
    std::vector<LinearOpenSystem> systems;
    for (std::size_t i = 0; i < wiring.dom_names.size(); ++i)
        systems.push_back(build_linear(doc, detail::bound_system(doc, wiring, i)));
    return apply_operadic_linear(op, systems);
}

/// Flatten a wiring over arbitrary bound systems.
inline OpenSystem flatten_general(const SystemDocument& doc, const WiringDecl& wiring) {
    OperadicWiring op = build_operadic(doc, wiring);
    std::vector<OpenSystem> systems;
    for (std::size_t i = 0; i < wiring.dom_names.size(); ++i)
        systems.push_back(build_general(doc, detail::bound_system(doc, wiring, i)));
    return apply_operadic(op, systems);
}

namespace detail {

/// A matrix-defined system rewritten as per-coordinate expressions.
inline ExprSpec linear_to_exprs(const LinearSpec& lin, const std::vector<std::string>& states,
                                const std::vector<std::string>& inputs) {
    auto term = [](double coef, const std::string& var) -> ExprPtr {
        ExprPtr v = Expr::make_var(var);
        const double mag = coef < 0 ? -coef : coef;
        ExprPtr t = mag == 1.0 ? v : Expr::make_binary(Expr::Kind::Mul,
                                                       Expr::make_number(mag), v);
        return coef < 0 ? Expr::make_unary(Expr::Kind::Neg, t) : t;
    };
    auto row = [&](const Eigen::MatrixXd& m, Eigen::Index r,
                   const std::vector<std::string>& vars, ExprPtr acc) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (m(r, j) == 0.0) continue;
            ExprPtr t = term(m(r, j), vars[static_cast<std::size_t>(j)]);
            acc = acc ? Expr::make_binary(Expr::Kind::Add, acc, t) : t;
        }
        return acc;
    };
    ExprSpec spec;
    for (Eigen::Index r = 0; r < lin.A.rows(); ++r) {
        ExprPtr e = row(lin.B, r, inputs, row(lin.A, r, states, nullptr));
        spec.derivs.push_back(e ? e : Expr::make_number(0));
    }
    for (Eigen::Index r = 0; r < lin.C.rows(); ++r) {
        ExprPtr e = row(lin.C, r, states, nullptr);
        spec.outputs.push_back(e ? e : Expr::make_number(0));
    }
    return spec;
}

} // namespace detail

/// Apply a wiring at the document level: the result is a new document
/// holding the codomain box, one composed system on it, and the identity
/// wiring on that system (so the output can itself be flattened). If all
/// bound systems are matrix-defined the composed system is too;
/// otherwise the composed dynamics are emitted as substituted
/// expressions, keeping the result serializable.
inline SystemDocument compose_document(const SystemDocument& doc, const WiringDecl& wiring,
                                       const std::string& out_name = "composed") {
    OperadicWiring op = build_operadic(doc, wiring);
    const BoxDecl* cod = doc.find_box(wiring.cod_box);

    SystemDocument out;
    out.boxes.push_back(*cod);

    SystemDecl composed;
    composed.name = out_name;
    composed.box_name = cod->name;

    if (all_linear(doc, wiring)) {
        LinearOpenSystem flat = flatten_linear(doc, wiring);
        composed.states = flat.states;
        composed.impl = LinearSpec{flat.A, flat.B, flat.C};
    } else {
        // Symbolic path: rename each subsystem's slots into the stacked
        // layout, then route every inner input either to an inner output
        // expression or to an outer input variable.
        const WiringDiagram& flat = op.flatten();
        flat.ensure_valid();
        const BoxInterface stacked = op.stacked_dom();

        std::vector<TypedFiniteSet> state_sets;
        std::vector<ExprSpec> specs;
        for (std::size_t i = 0; i < wiring.dom_names.size(); ++i) {
            const SystemDecl& sys = detail::bound_system(doc, wiring, i);
            state_sets.push_back(sys.states);
            const BoxDecl* b = doc.find_box(sys.box_name);
            if (sys.is_linear())
                specs.push_back(detail::linear_to_exprs(
                    std::get<LinearSpec>(sys.impl), detail::coordinate_names(sys.states),
                    detail::coordinate_names(b->box.inputs)));
            else
                specs.push_back(std::get<ExprSpec>(sys.impl));
        }
        TypedFiniteSet merged = merge_state_sets(state_sets, wiring.dom_names);
        const std::vector<std::string> merged_slots = detail::coordinate_names(merged);

        // Per-subsystem rename of its own state slots into the merged layout.
        std::vector<std::map<std::string, ExprPtr>> renames(specs.size());
        {
            std::size_t k = 0;
            for (std::size_t i = 0; i < specs.size(); ++i)
                for (const auto& own : detail::coordinate_names(state_sets[i]))
                    renames[i][own] = Expr::make_var(merged_slots[k++]);
        }

        // All inner output expressions, in the stacked coordinate layout.
        std::vector<ExprPtr> inner_out(static_cast<std::size_t>(stacked.outputs.total_dim()));
        {
            std::size_t k = 0;
            for (std::size_t i = 0; i < specs.size(); ++i)
                for (const auto& e : specs[i].outputs)
                    inner_out[k++] = substitute(e, renames[i]);
        }

        // Source expression for each inner-input coordinate.
        const std::size_t n_xin = stacked.inputs.size();
        const std::size_t n_xout = stacked.outputs.size();
        const auto yin_slots = detail::coordinate_names(cod->box.inputs);
        std::vector<ExprPtr> in_src(static_cast<std::size_t>(stacked.inputs.total_dim()));
        for (std::size_t a = 0; a < n_xin; ++a) {
            const std::size_t j = *flat.map()[a];
            const int dim = stacked.inputs[a].type.dim;
            for (int c = 0; c < dim; ++c) {
                const std::size_t dst = static_cast<std::size_t>(stacked.inputs.offset(a) + c);
                if (j < n_xout)
                    in_src[dst] =
                        inner_out[static_cast<std::size_t>(stacked.outputs.offset(j) + c)];
                else
                    in_src[dst] = Expr::make_var(yin_slots[static_cast<std::size_t>(
                        cod->box.inputs.offset(j - n_xout) + c)]);
            }
        }

        ExprSpec spec;
        {
            std::size_t i = 0, local_in = 0;
            std::vector<std::string> own_inputs; // input slot names of subsystem i
            auto load_inputs = [&](std::size_t idx) {
                const SystemDecl& sys = detail::bound_system(doc, wiring, idx);
                const BoxDecl* b = doc.find_box(sys.box_name);
                return detail::coordinate_names(b->box.inputs);
            };
            own_inputs = specs.empty() ? std::vector<std::string>{} : load_inputs(0);
            std::size_t in_base = 0;
            for (i = 0; i < specs.size(); ++i) {
                if (i > 0) {
                    in_base += own_inputs.size();
                    own_inputs = load_inputs(i);
                }
                std::map<std::string, ExprPtr> subs = renames[i];
                for (local_in = 0; local_in < own_inputs.size(); ++local_in)
                    subs[own_inputs[local_in]] = in_src[in_base + local_in];
                for (const auto& e : specs[i].derivs)
                    spec.derivs.push_back(substitute(e, subs));
            }
        }
        for (std::size_t o = 0; o < cod->box.outputs.size(); ++o) {
            const std::size_t j = *flat.map()[n_xin + o]; // an inner output, no passing wires
            const int dim = cod->box.outputs[o].type.dim;
            for (int c = 0; c < dim; ++c)
                spec.outputs.push_back(
                    inner_out[static_cast<std::size_t>(stacked.outputs.offset(j) + c)]);
        }

        composed.states = std::move(merged);
        composed.impl = std::move(spec);
    }

    out.systems.push_back(std::move(composed));

    WiringDecl ident;
    ident.name = "identity";
    ident.dom_names = {out_name};
    ident.cod_box = cod->name;
    for (const auto& p : cod->box.inputs)
        ident.wires.push_back({{out_name, p.name}, {"", p.name}});
    for (const auto& p : cod->box.outputs)
        ident.wires.push_back({{"", p.name}, {out_name, p.name}});
    // Normalize codomain references the way the parser stores them.
    for (auto& [a, b] : ident.wires) {
        if (a.box.empty()) a.box = cod->name;
        if (b.box.empty()) b.box = cod->name;
    }
    out.wirings.push_back(std::move(ident));
    return out;
}

/// Everything needed to run the document's simulate block.
struct SimSetup {
    OpenSystem system;
    TypedFiniteSet states;
    BoxInterface box;
    InputSignal inputs;
    SimConfig cfg;
    Eigen::VectorXd x0;
};

inline SimSetup build_simulation(const SystemDocument& doc) {
    if (!doc.directive) throw Error("document has no simulate block");
    const SimDirective& dir = *doc.directive;

    SimSetup setup;
    if (dir.wiring) {
        const WiringDecl* w = doc.find_wiring(*dir.wiring);
        if (!w) throw Error("unknown wiring '" + *dir.wiring + "'");
        if (all_linear(doc, *w)) {
            LinearOpenSystem flat = flatten_linear(doc, *w);
            setup.states = flat.states;
            setup.box = flat.box;
            setup.system = to_general(flat);
        } else {
            OpenSystem flat = flatten_general(doc, *w);
            setup.states = flat.states();
            setup.box = flat.box();
            setup.system = std::move(flat);
        }
    } else if (dir.system) {
        const SystemDecl* s = doc.find_system(*dir.system);
        if (!s) throw Error("unknown system '" + *dir.system + "'");
        setup.system = build_general(doc, *s);
        setup.states = setup.system.states();
        setup.box = setup.system.box();
    } else {
        throw Error("simulate block names neither a wiring nor a system");
    }

    if (dir.t0) setup.cfg.t0 = *dir.t0;
    if (dir.t1) setup.cfg.t1 = *dir.t1;
    if (dir.dt) setup.cfg.dt = *dir.dt;
    if (dir.method) setup.cfg.method = *dir.method;

    setup.x0 = Eigen::VectorXd::Zero(setup.states.total_dim());
    const auto state_slots = detail::coordinate_names(setup.states);
    for (const auto& [name, value] : dir.x0) {
        auto it = std::find(state_slots.begin(), state_slots.end(), name);
        if (it == state_slots.end())
            throw Error("x0 refers to unknown state slot '" + name + "'");
        setup.x0[static_cast<Eigen::Index>(it - state_slots.begin())] = value;
    }

    setup.inputs = InputSignal(setup.box.inputs);
    // Input keys name a coordinate of an outer input port, optionally
    // qualified with the outer box's name.
    std::map<std::string, ExprPtr> per_coord;
    for (auto [name, e] : dir.inputs) {
        if (auto dot = name.find('.'); dot != std::string::npos &&
                                       !setup.box.inputs.contains(name) &&
                                       name.find('[') == std::string::npos)
            name = name.substr(dot + 1);
        per_coord[name] = std::move(e);
    }
    const std::vector<std::string> tscope = {"t"};
    for (std::size_t i = 0; i < setup.box.inputs.size(); ++i) {
        const Port& p = setup.box.inputs[i];
        const int dim = p.type.dim;
        std::vector<std::function<double(std::span<const double>)>> fns;
        bool any = false;
        for (int c = 0; c < dim; ++c) {
            std::string key = dim == 1 ? p.name : p.name + "[" + std::to_string(c) + "]";
            auto it = per_coord.find(key);
            if (it != per_coord.end()) {
                fns.push_back(compile_expr(it->second, tscope));
                any = true;
                per_coord.erase(it);
            } else {
                fns.emplace_back();
            }
        }
        if (!any) continue;
        setup.inputs.set_function(p.name, [fns, dim](double t) {
            const double buf[1] = {t};
            Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
            for (int c = 0; c < dim; ++c)
                if (fns[static_cast<std::size_t>(c)])
                    v[c] = fns[static_cast<std::size_t>(c)](std::span<const double>(buf, 1));
            return v;
        });
    }
    if (!per_coord.empty())
        throw Error("input refers to unknown input slot '" + per_coord.begin()->first + "'");
    return setup;
}

} // namespace wiredyn
