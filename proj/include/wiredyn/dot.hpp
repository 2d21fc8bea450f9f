#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "wiredyn/wiring.hpp"

namespace wiredyn {

namespace detail {

inline std::string dot_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

// Emits one cluster per (label, box) pair, port nodes, and one edge per
// wire, oriented along data flow: source port -> sink port.
inline std::string render_dot(const std::vector<std::pair<std::string, const BoxInterface*>>& boxes,
                              const BoxInterface& cod, const WiringDiagram& flat) {
    flat.ensure_valid();
    std::ostringstream os;
    os << "digraph wiring {\n";
    os << "  rankdir=LR;\n";
    os << "  node [shape=circle, width=0.12, fixedsize=true, label=\"\"];\n";

    // Node id for a port on the stacked inner box: walk the concatenated
    // layout back to its owning box so clusters stay meaningful.
    auto inner_id = [&](bool is_input, std::size_t flat_idx, std::size_t* box_out) {
        std::size_t i = flat_idx;
        for (std::size_t b = 0; b < boxes.size(); ++b) {
            const auto& side = is_input ? boxes[b].second->inputs : boxes[b].second->outputs;
            if (i < side.size()) {
                if (box_out) *box_out = b;
                return boxes[b].first + (is_input ? ".in." : ".out.") + side[i].name;
            }
            i -= side.size();
        }
        throw Error("port index out of range");
    };

    for (std::size_t b = 0; b < boxes.size(); ++b) {
        os << "  subgraph cluster_" << b << " {\n";
        os << "    label=" << dot_quote(boxes[b].first) << ";\n";
        for (std::size_t i = 0, k = 0; k < boxes[b].second->inputs.size(); ++k, ++i)
            os << "    " << dot_quote(boxes[b].first + ".in." + boxes[b].second->inputs[k].name)
               << " [xlabel=" << dot_quote(boxes[b].second->inputs[k].name) << "];\n";
        for (std::size_t k = 0; k < boxes[b].second->outputs.size(); ++k)
            os << "    " << dot_quote(boxes[b].first + ".out." + boxes[b].second->outputs[k].name)
               << " [xlabel=" << dot_quote(boxes[b].second->outputs[k].name) << "];\n";
        os << "  }\n";
    }
    for (const auto& p : cod.inputs)
        os << "  " << dot_quote("outer.in." + p.name) << " [shape=plaintext, label="
           << dot_quote(p.name) << "];\n";
    for (const auto& p : cod.outputs)
        os << "  " << dot_quote("outer.out." + p.name) << " [shape=plaintext, label="
           << dot_quote(p.name) << "];\n";

    const std::size_t n_in = flat.dom().inputs.size();
    const std::size_t n_xout = flat.dom().outputs.size();
    for (std::size_t a = 0; a < flat.domain_size(); ++a) {
        const std::size_t b = *flat.map()[a];
        // phi maps sink to source; the edge is drawn source -> sink.
        const std::string sink = a < n_in ? inner_id(true, a, nullptr)
                                          : "outer.out." + cod.outputs[a - n_in].name;
        const std::string source = b < n_xout
                                       ? inner_id(false, b, nullptr)
                                       : "outer.in." + cod.inputs[b - n_xout].name;
        os << "  " << dot_quote(source) << " -> " << dot_quote(sink) << ";\n";
    }
    os << "}\n";
    return os.str();
}

} // namespace detail

/// Graphviz rendering of a wiring diagram: the inner box as a cluster,
/// outer ports as plain nodes, one edge per wire. Deterministic output.
inline std::string to_dot(const WiringDiagram& wd) {
    std::vector<std::pair<std::string, const BoxInterface*>> boxes;
    if (!(wd.dom().inputs.empty() && wd.dom().outputs.empty()))
        boxes.emplace_back("inner", &wd.dom());
    return detail::render_dot(boxes, wd.cod(), wd);
}

/// Operadic rendering: one cluster per domain box.
inline std::string to_dot(const OperadicWiring& op) {
    std::vector<std::pair<std::string, const BoxInterface*>> boxes;
    for (std::size_t i = 0; i < op.doms().size(); ++i)
        if (!(op.doms()[i].inputs.empty() && op.doms()[i].outputs.empty()))
            boxes.emplace_back(op.labels()[i], &op.doms()[i]);
    return detail::render_dot(boxes, op.cod(), op.flatten());
}

} // namespace wiredyn
