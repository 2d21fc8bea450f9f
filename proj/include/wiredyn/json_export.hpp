#pragma once

#include <json.hpp>

#include "wiredyn/document.hpp"

namespace wiredyn {

/// Machine-readable mirror of the document format.
inline nlohmann::json to_json(const SystemDocument& doc) {
    using nlohmann::json;
    json j;
    auto ports = [](const TypedFiniteSet& set) {
        json a = json::array();
        for (const auto& p : set) a.push_back({{"name", p.name}, {"dim", p.type.dim}});
        return a;
    };
    auto matrix = [](const Eigen::MatrixXd& m) {
        json rows = json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
            rows.push_back(std::move(row));
        }
        return rows;
    };

    j["boxes"] = json::array();
    for (const auto& b : doc.boxes)
        j["boxes"].push_back({{"name", b.name},
                              {"inputs", ports(b.box.inputs)},
                              {"outputs", ports(b.box.outputs)}});

    j["systems"] = json::array();
    for (const auto& s : doc.systems) {
        json sys = {{"name", s.name}, {"box", s.box_name}, {"states", ports(s.states)}};
        if (s.is_linear()) {
            const auto& lin = std::get<LinearSpec>(s.impl);
            sys["A"] = matrix(lin.A);
            sys["B"] = matrix(lin.B);
            sys["C"] = matrix(lin.C);
        } else {
            const auto& spec = std::get<ExprSpec>(s.impl);
            json d = json::array(), o = json::array();
            for (const auto& e : spec.derivs) d.push_back(to_string(e));
            for (const auto& e : spec.outputs) o.push_back(to_string(e));
            sys["derivatives"] = std::move(d);
            sys["outputs"] = std::move(o);
        }
        j["systems"].push_back(std::move(sys));
    }

    j["wirings"] = json::array();
    for (const auto& w : doc.wirings) {
        json wires = json::array();
        for (const auto& [a, b] : w.wires)
            wires.push_back({{"from", a.box + "." + a.port}, {"to", b.box + "." + b.port}});
        j["wirings"].push_back({{"name", w.name},
                                {"domain", w.dom_names},
                                {"codomain", w.cod_box},
                                {"wires", std::move(wires)}});
    }

    if (doc.directive) {
        const auto& d = *doc.directive;
        json dir;
        if (d.wiring) dir["wiring"] = *d.wiring;
        if (d.system) dir["system"] = *d.system;
        json x0 = json::object(), in = json::object();
        for (const auto& [n, v] : d.x0) x0[n] = v;
        for (const auto& [n, e] : d.inputs) in[n] = to_string(e);
        dir["x0"] = std::move(x0);
        dir["inputs"] = std::move(in);
        if (d.t0) dir["t0"] = *d.t0;
        if (d.t1) dir["t1"] = *d.t1;
        if (d.dt) dir["dt"] = *d.dt;
        if (d.method) dir["method"] = *d.method == Method::RK4 ? "rk4" : "euler";
        j["simulate"] = std::move(dir);
    }
    return j;
}

} // namespace wiredyn
