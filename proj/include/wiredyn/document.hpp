#pragma once

#include <Eigen/Dense>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "wiredyn/expr.hpp"
#include "wiredyn/simulate.hpp"
#include "wiredyn/wiring.hpp"

namespace wiredyn {

/// One parser or validation finding, with a source location.
struct Diagnostic {
    std::string severity = "error"; // "error" | "warning"
    std::string code;
    std::string message;
    std::string file;
    std::size_t line = 0;
    std::size_t col = 0;

    std::string format() const {
        std::string s = file.empty() ? "" : file + ":";
        if (line) s += std::to_string(line) + ":" + std::to_string(col) + ": ";
        return s + severity + " [" + code + "] " + message;
    }
};

struct BoxDecl {
    std::string name;
    BoxInterface box;

    friend bool operator==(const BoxDecl&, const BoxDecl&) = default;
};

/// Matrix-defined dynamics.
struct LinearSpec {
    Eigen::MatrixXd A, B, C;

    friend bool operator==(const LinearSpec& a, const LinearSpec& b) {
        auto eq = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
            return x.rows() == y.rows() && x.cols() == y.cols() &&
                   (x.rows() == 0 || x.cols() == 0 || (x.array() == y.array()).all());
        };
        return eq(a.A, b.A) && eq(a.B, b.B) && eq(a.C, b.C);
    }
};

/// Expression-defined dynamics: one scalar expression per state
/// coordinate and per output coordinate, in canonical layout order.
struct ExprSpec {
    std::vector<ExprPtr> derivs;
    std::vector<ExprPtr> outputs;

    friend bool operator==(const ExprSpec& a, const ExprSpec& b) {
        if (a.derivs.size() != b.derivs.size() || a.outputs.size() != b.outputs.size())
            return false;
        for (std::size_t i = 0; i < a.derivs.size(); ++i)
            if (!equal(a.derivs[i], b.derivs[i])) return false;
        for (std::size_t i = 0; i < a.outputs.size(); ++i)
            if (!equal(a.outputs[i], b.outputs[i])) return false;
        return true;
    }
};

struct SystemDecl {
    std::string name;
    std::string box_name;
    TypedFiniteSet states;
    std::variant<LinearSpec, ExprSpec> impl;

    bool is_linear() const { return std::holds_alternative<LinearSpec>(impl); }

    friend bool operator==(const SystemDecl&, const SystemDecl&) = default;
};

struct WiringDecl {
    std::string name;
    std::vector<std::string> dom_names; // system or box names
    std::string cod_box;
    std::vector<std::pair<OperadicWiring::PortRef, OperadicWiring::PortRef>> wires;

    friend bool operator==(const WiringDecl& a, const WiringDecl& b) {
        auto ref_eq = [](const OperadicWiring::PortRef& x, const OperadicWiring::PortRef& y) {
            return x.box == y.box && x.port == y.port;
        };
        if (a.name != b.name || a.dom_names != b.dom_names || a.cod_box != b.cod_box ||
            a.wires.size() != b.wires.size())
            return false;
        for (std::size_t i = 0; i < a.wires.size(); ++i)
            if (!ref_eq(a.wires[i].first, b.wires[i].first) ||
                !ref_eq(a.wires[i].second, b.wires[i].second))
                return false;
        return true;
    }
};

/// The optional `simulate { ... }` block.
struct SimDirective {
    std::optional<std::string> wiring; // flatten this wiring, then simulate
    std::optional<std::string> system; // or simulate a single system directly
    std::vector<std::pair<std::string, double>> x0;      // state coordinate -> value
    std::vector<std::pair<std::string, ExprPtr>> inputs; // input coordinate -> expr in t
    std::optional<double> t0, t1, dt;
    std::optional<Method> method;

    friend bool operator==(const SimDirective& a, const SimDirective& b) {
        if (a.wiring != b.wiring || a.system != b.system || a.x0 != b.x0 || a.t0 != b.t0 ||
            a.t1 != b.t1 || a.dt != b.dt || a.method != b.method ||
            a.inputs.size() != b.inputs.size())
            return false;
        for (std::size_t i = 0; i < a.inputs.size(); ++i)
            if (a.inputs[i].first != b.inputs[i].first ||
                !equal(a.inputs[i].second, b.inputs[i].second))
                return false;
        return true;
    }
};

/// A parsed DSL document.
struct SystemDocument {
    std::vector<BoxDecl> boxes;
    std::vector<SystemDecl> systems;
    std::vector<WiringDecl> wirings;
    std::optional<SimDirective> directive;

    const BoxDecl* find_box(std::string_view name) const {
        for (const auto& b : boxes)
            if (b.name == name) return &b;
        return nullptr;
    }
    const SystemDecl* find_system(std::string_view name) const {
        for (const auto& s : systems)
            if (s.name == name) return &s;
        return nullptr;
    }
    const WiringDecl* find_wiring(std::string_view name) const {
        for (const auto& w : wirings)
            if (w.name == name) return &w;
        return nullptr;
    }

    friend bool operator==(const SystemDocument&, const SystemDocument&) = default;
};

struct ParseResult {
    SystemDocument document;
    std::vector<Diagnostic> diagnostics;

    bool ok() const {
        for (const auto& d : diagnostics)
            if (d.severity == "error") return false;
        return true;
    }
};

namespace detail {

/// Expand a typed set to per-coordinate slot names: "p" for dim 1,
/// "p[0]", "p[1]", ... otherwise.
inline std::vector<std::string> coordinate_names(const TypedFiniteSet& set) {
    std::vector<std::string> names;
    for (const auto& p : set) {
        if (p.type.dim == 1) {
            names.push_back(p.name);
        } else {
            for (int i = 0; i < p.type.dim; ++i)
                names.push_back(p.name + "[" + std::to_string(i) + "]");
        }
    }
    return names;
}

class DocumentParser {
public:
    DocumentParser(std::string_view text, std::string file)
        : file_(std::move(file)) {
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string_view::npos) end = text.size();
            lines_.emplace_back(text.substr(start, end - start));
            if (end == text.size()) break;
            start = end + 1;
        }
    }

    ParseResult run() {
        while (line_ < lines_.size()) {
            std::string s = stripped(line_);
            if (s.empty()) {
                ++line_;
                continue;
            }
            if (starts_with_word(s, "box"))
                parse_box(s);
            else if (starts_with_word(s, "system"))
                parse_system(s);
            else if (starts_with_word(s, "wiring"))
                parse_wiring(s);
            else if (starts_with_word(s, "simulate"))
                parse_simulate(s);
            else {
                error("syntax", "expected 'box', 'system', 'wiring' or 'simulate'");
                skip_block();
            }
        }
        if (result_.ok()) resolve();
        return std::move(result_);
    }

private:
    // --- low-level helpers -------------------------------------------------

    std::string stripped(std::size_t idx) const {
        std::string s(lines_[idx]);
        if (auto h = s.find('#'); h != std::string::npos) s.erase(h);
        auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static bool starts_with_word(const std::string& s, std::string_view w) {
        return s.size() >= w.size() && s.compare(0, w.size(), w) == 0 &&
               (s.size() == w.size() || s[w.size()] == ' ' || s[w.size()] == '\t' ||
                s[w.size()] == '{');
    }

    void error(std::string code, std::string msg, std::size_t col = 1) {
        result_.diagnostics.push_back(
            {"error", std::move(code), std::move(msg), file_, line_ + 1, col});
    }

    void skip_block() {
        // consume up to and including the next lone '}' (or EOF)
        while (line_ < lines_.size()) {
            std::string s = stripped(line_++);
            if (s == "}") return;
        }
    }

    static std::vector<std::string> split_ws(const std::string& s) {
        std::vector<std::string> out;
        std::istringstream is(s);
        std::string tok;
        while (is >> tok) out.push_back(tok);
        return out;
    }

    /// "box NAME {" -> NAME; diagnostics on malformed headers.
    std::optional<std::string> header_name(const std::string& s, std::string_view kw) {
        std::string rest = s.substr(kw.size());
        if (rest.empty() || rest.back() != '{') {
            error("syntax", std::string(kw) + " header must end with '{'");
            return std::nullopt;
        }
        rest.pop_back();
        auto toks = split_ws(rest);
        if (toks.size() != 1) {
            error("syntax", std::string(kw) + " header must be '" + std::string(kw) + " <name> {'");
            return std::nullopt;
        }
        return toks[0];
    }

    bool parse_number_tok(const std::string& tok, double& out) {
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
        return ec == std::errc() && p == tok.data() + tok.size();
    }

    // --- sections -----------------------------------------------------------

    void parse_box(const std::string& header) {
        auto name = header_name(header, "box ");
        ++line_;
        std::vector<Port> ins, outs;
        bool bad = false;
        while (line_ < lines_.size()) {
            std::string s = stripped(line_);
            if (s.empty()) {
                ++line_;
                continue;
            }
            if (s == "}") {
                ++line_;
                break;
            }
            // "in NAME : DIM" / "out NAME : DIM"
            auto toks = split_ws(s);
            if (toks.size() == 4 && toks[2] == ":" && (toks[0] == "in" || toks[0] == "out")) {
                double d = 0;
                if (!parse_number_tok(toks[3], d) || d < 0 || d != static_cast<int>(d)) {
                    error("syntax", "port dimension must be a non-negative integer");
                    bad = true;
                } else {
                    (toks[0] == "in" ? ins : outs).push_back({toks[1], {static_cast<int>(d)}});
                }
            } else {
                error("syntax", "expected 'in <name> : <dim>' or 'out <name> : <dim>'");
                bad = true;
            }
            ++line_;
        }
        if (!name || bad) return;
        if (result_.document.find_box(*name)) {
            error("duplicate-name", "box '" + *name + "' is already declared");
            return;
        }
        try {
            result_.document.boxes.push_back(
                {*name, BoxInterface(TypedFiniteSet(std::move(ins)),
                                     TypedFiniteSet(std::move(outs)))});
        } catch (const Error& e) {
            error("invalid-box", e.what());
        }
    }

    std::optional<Eigen::MatrixXd> parse_matrix(const std::string& body) {
        // "[ r00 r01 ; r10 r11 ]"
        auto lb = body.find('[');
        auto rb = body.rfind(']');
        if (lb == std::string::npos || rb == std::string::npos || rb < lb) {
            error("syntax", "matrix literal must be bracketed: [ a b ; c d ]");
            return std::nullopt;
        }
        std::string inner = body.substr(lb + 1, rb - lb - 1);
        std::vector<std::vector<double>> rows;
        std::size_t start = 0;
        while (start <= inner.size()) {
            std::size_t semi = inner.find(';', start);
            std::string row = inner.substr(start, semi == std::string::npos ? std::string::npos
                                                                            : semi - start);
            std::vector<double> vals;
            for (const auto& tok : split_ws(row)) {
                double v = 0;
                if (!parse_number_tok(tok, v)) {
                    error("syntax", "malformed matrix entry '" + tok + "'");
                    return std::nullopt;
                }
                vals.push_back(v);
            }
            rows.push_back(std::move(vals));
            if (semi == std::string::npos) break;
            start = semi + 1;
        }
        while (!rows.empty() && rows.back().empty()) rows.pop_back();
        const std::size_t ncols = rows.empty() ? 0 : rows[0].size();
        for (const auto& r : rows)
            if (r.size() != ncols) {
                error("syntax", "matrix rows have unequal lengths");
                return std::nullopt;
            }
        Eigen::MatrixXd m(rows.size(), ncols);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < ncols; ++j) m(i, j) = rows[i][j];
        return m;
    }

    void parse_system(const std::string& header) {
        // "system NAME : BOX {"
        std::string rest = header.substr(std::string("system").size());
        if (rest.empty() || rest.back() != '{') {
            error("syntax", "system header must be 'system <name> : <box> {'");
            skip_block();
            return;
        }
        rest.pop_back();
        auto toks = split_ws(rest);
        if (toks.size() != 3 || toks[1] != ":") {
            error("syntax", "system header must be 'system <name> : <box> {'");
            skip_block();
            return;
        }
        const std::string name = toks[0], box_name = toks[2];
        ++line_;

        std::vector<Port> states;
        std::optional<Eigen::MatrixXd> A, B, C;
        std::vector<std::pair<std::string, ExprPtr>> dots;  // state coord -> expr
        std::vector<std::pair<std::string, ExprPtr>> outs;  // output coord -> expr
        bool bad = false;
        while (line_ < lines_.size()) {
            std::string s = stripped(line_);
            if (s.empty()) {
                ++line_;
                continue;
            }
            if (s == "}") {
                ++line_;
                break;
            }
            auto t = split_ws(s);
            if (t.size() == 4 && t[0] == "state" && t[2] == ":") {
                double d = 0;
                if (!parse_number_tok(t[3], d) || d < 0 || d != static_cast<int>(d)) {
                    error("syntax", "state dimension must be a non-negative integer");
                    bad = true;
                } else {
                    states.push_back({t[1], {static_cast<int>(d)}});
                }
            } else if (t.size() >= 2 && (t[0] == "A" || t[0] == "B" || t[0] == "C") &&
                       t[1] == "=") {
                auto m = parse_matrix(s);
                if (!m) {
                    bad = true;
                } else {
                    (t[0] == "A" ? A : t[0] == "B" ? B : C) = std::move(*m);
                }
            } else if (t.size() >= 4 && (t[0] == "dot" || t[0] == "out") && t[2] == "=") {
                auto eq = s.find('=');
                std::string body = s.substr(eq + 1);
                try {
                    ExprPtr e = parse_expr_unchecked(body);
                    (t[0] == "dot" ? dots : outs).emplace_back(t[1], std::move(e));
                } catch (const ExprParseError& pe) {
                    error("syntax", pe.what(), eq + 2 + pe.column);
                    bad = true;
                }
            } else {
                error("syntax", "expected 'state', 'A/B/C =', 'dot ... =' or 'out ... ='");
                bad = true;
            }
            ++line_;
        }
        if (bad) return;
        if (result_.document.find_system(name)) {
            error("duplicate-name", "system '" + name + "' is already declared");
            return;
        }

        SystemDecl decl;
        decl.name = name;
        decl.box_name = box_name;
        try {
            decl.states = TypedFiniteSet(std::move(states));
        } catch (const Error& e) {
            error("invalid-system", e.what());
            return;
        }
        const bool has_matrices = A || B || C;
        const bool has_exprs = !dots.empty() || !outs.empty();
        if (has_matrices && has_exprs) {
            error("invalid-system",
                  "system '" + name + "' mixes matrix and expression definitions");
            return;
        }
        if (has_matrices) {
            if (!A || !B || !C) {
                error("invalid-system", "linear system '" + name + "' needs all of A, B, C");
                return;
            }
            decl.impl = LinearSpec{std::move(*A), std::move(*B), std::move(*C)};
        } else {
            pending_exprs_.push_back({result_.document.systems.size(), std::move(dots),
                                      std::move(outs)});
            decl.impl = ExprSpec{};
        }
        result_.document.systems.push_back(std::move(decl));
    }

    void parse_wiring(const std::string& header) {
        // "wiring NAME : d1 d2 ... -> COD {"
        std::string rest = header.substr(std::string("wiring").size());
        bool header_ok = !rest.empty() && rest.back() == '{';
        if (header_ok) rest.pop_back();
        auto toks = split_ws(rest);
        WiringDecl decl;
        if (!header_ok || toks.size() < 4 || toks[1] != ":" || toks[toks.size() - 2] != "->") {
            error("syntax", "wiring header must be 'wiring <name> : <dom...> -> <cod> {'");
            skip_block();
            return;
        }
        decl.name = toks[0];
        decl.cod_box = toks.back();
        for (std::size_t i = 2; i + 2 < toks.size(); ++i) decl.dom_names.push_back(toks[i]);
        ++line_;

        bool bad = false;
        while (line_ < lines_.size()) {
            std::string s = stripped(line_);
            if (s.empty()) {
                ++line_;
                continue;
            }
            if (s == "}") {
                ++line_;
                break;
            }
            auto t = split_ws(s);
            auto parse_ref = [&](const std::string& tok,
                                 OperadicWiring::PortRef& out) {
                auto dotpos = tok.find('.');
                if (dotpos == std::string::npos || dotpos == 0 || dotpos + 1 == tok.size()) {
                    error("syntax", "port reference '" + tok + "' must be '<box>.<port>'");
                    return false;
                }
                out.box = tok.substr(0, dotpos);
                out.port = tok.substr(dotpos + 1);
                return true;
            };
            OperadicWiring::PortRef a, b;
            if (t.size() != 3 || t[1] != "->" || !parse_ref(t[0], a) || !parse_ref(t[2], b)) {
                if (t.size() != 3 || t[1] != "->")
                    error("syntax", "expected '<box>.<port> -> <box>.<port>'");
                bad = true;
            } else {
                decl.wires.emplace_back(std::move(a), std::move(b));
            }
            ++line_;
        }
        if (bad) return;
        if (result_.document.find_wiring(decl.name)) {
            error("duplicate-name", "wiring '" + decl.name + "' is already declared");
            return;
        }
        result_.document.wirings.push_back(std::move(decl));
    }

    void parse_simulate(const std::string& header) {
        if (header != "simulate {") {
            error("syntax", "simulate header must be 'simulate {'");
            skip_block();
            return;
        }
        if (result_.document.directive) {
            error("duplicate-name", "only one simulate block is allowed");
            skip_block();
            return;
        }
        ++line_;
        SimDirective dir;
        bool bad = false;
        while (line_ < lines_.size()) {
            std::string s = stripped(line_);
            if (s.empty()) {
                ++line_;
                continue;
            }
            if (s == "}") {
                ++line_;
                break;
            }
            auto t = split_ws(s);
            auto num_setting = [&](std::optional<double>& slot) {
                double v = 0;
                if (t.size() == 3 && t[1] == "=" && parse_number_tok(t[2], v))
                    slot = v;
                else {
                    error("syntax", "expected '" + t[0] + " = <number>'");
                    bad = true;
                }
            };
            if (t[0] == "wiring" && t.size() == 2) {
                dir.wiring = t[1];
            } else if (t[0] == "system" && t.size() == 2) {
                dir.system = t[1];
            } else if (t[0] == "x0" && t.size() == 4 && t[2] == "=") {
                double v = 0;
                if (!parse_number_tok(t[3], v)) {
                    error("syntax", "x0 value must be a number");
                    bad = true;
                } else {
                    dir.x0.emplace_back(t[1], v);
                }
            } else if (t[0] == "input" && t.size() >= 4 && t[2] == "=") {
                auto eq = s.find('=');
                try {
                    dir.inputs.emplace_back(t[1],
                                            parse_expr(s.substr(eq + 1), {"t"}));
                } catch (const ExprParseError& pe) {
                    error("syntax", pe.what(), eq + 2 + pe.column);
                    bad = true;
                }
            } else if (t[0] == "t0") {
                num_setting(dir.t0);
            } else if (t[0] == "t1") {
                num_setting(dir.t1);
            } else if (t[0] == "dt") {
                num_setting(dir.dt);
            } else if (t[0] == "method" && t.size() == 2 &&
                       (t[1] == "euler" || t[1] == "rk4")) {
                dir.method = t[1] == "rk4" ? Method::RK4 : Method::Euler;
            } else {
                error("syntax", "unrecognized simulate setting '" + t[0] + "'");
                bad = true;
            }
            ++line_;
        }
        if (!bad) result_.document.directive = std::move(dir);
    }

    // --- resolution ---------------------------------------------------------

    void resolve() {
        auto& doc = result_.document;
        // Attach and scope-check expression systems.
        for (auto& pend : pending_exprs_) {
            SystemDecl& sys = doc.systems[pend.index];
            const BoxDecl* box = doc.find_box(sys.box_name);
            if (!box) continue; // reported below
            resolve_expr_system(sys, box->box, pend.dots, pend.outs);
        }
        for (auto& sys : doc.systems) {
            const BoxDecl* box = doc.find_box(sys.box_name);
            if (!box) {
                rerror("unresolved-name",
                       "system '" + sys.name + "' refers to unknown box '" + sys.box_name + "'");
                continue;
            }
            for (const auto& st : sys.states)
                if (box->box.inputs.contains(st.name) || box->box.outputs.contains(st.name))
                    rerror("duplicate-name", "state '" + st.name + "' of system '" + sys.name +
                                                 "' shadows a port of box '" + sys.box_name +
                                                 "'");
            if (sys.is_linear()) {
                auto& lin = std::get<LinearSpec>(sys.impl);
                const int m = sys.states.total_dim();
                const int ui = box->box.inputs.total_dim();
                const int uo = box->box.outputs.total_dim();
                // A zero-size block prints without shape information, so
                // restore the declared shape when it is also zero-size.
                auto fix_empty = [](Eigen::MatrixXd& mat, int r, int c) {
                    if (mat.size() == 0 && (r == 0 || c == 0)) mat.resize(r, c);
                };
                fix_empty(lin.A, m, m);
                fix_empty(lin.B, m, ui);
                fix_empty(lin.C, uo, m);
                if (lin.A.rows() != m || lin.A.cols() != m || lin.B.rows() != m ||
                    lin.B.cols() != ui || lin.C.rows() != uo || lin.C.cols() != m)
                    rerror("dimension-mismatch",
                           "matrix blocks of system '" + sys.name +
                               "' do not match its state/port dimensions");
            }
        }
        for (const auto& w : doc.wirings) {
            bool names_ok = true;
            for (const auto& d : w.dom_names)
                if (!doc.find_box(d) && !doc.find_system(d)) {
                    rerror("unresolved-name",
                           "wiring '" + w.name + "' refers to unknown box or system '" + d + "'");
                    names_ok = false;
                }
            if (!doc.find_box(w.cod_box)) {
                rerror("unresolved-name",
                       "wiring '" + w.name + "' refers to unknown box '" + w.cod_box + "'");
                names_ok = false;
            }
            if (!names_ok) continue;
            try {
                OperadicWiring op = build_operadic(doc, w);
                for (const auto& v : op.validate())
                    rerror(v.code, "wiring '" + w.name + "': " + v.message);
            } catch (const Error& e) {
                rerror("invalid-wiring", "wiring '" + w.name + "': " + std::string(e.what()));
            }
        }
        if (doc.directive) {
            const auto& dir = *doc.directive;
            if (dir.wiring && !doc.find_wiring(*dir.wiring))
                rerror("unresolved-name", "simulate refers to unknown wiring '" + *dir.wiring +
                                              "'");
            if (dir.system && !doc.find_system(*dir.system))
                rerror("unresolved-name", "simulate refers to unknown system '" + *dir.system +
                                              "'");
            if (dir.wiring && dir.system)
                rerror("invalid-directive", "simulate must name either a wiring or a system, "
                                            "not both");
        }
    }

    void resolve_expr_system(SystemDecl& sys, const BoxInterface& box,
                             const std::vector<std::pair<std::string, ExprPtr>>& dots,
                             const std::vector<std::pair<std::string, ExprPtr>>& outs) {
        const std::vector<std::string> state_slots = coordinate_names(sys.states);
        const std::vector<std::string> out_slots = coordinate_names(box.outputs);
        std::vector<std::string> scope = state_slots;
        for (const auto& n : coordinate_names(box.inputs)) scope.push_back(n);

        ExprSpec spec;
        spec.derivs.resize(state_slots.size());
        spec.outputs.resize(out_slots.size());
        auto place = [&](const std::vector<std::string>& slots,
                         const std::pair<std::string, ExprPtr>& item, std::vector<ExprPtr>& dst,
                         const char* kind, const std::vector<std::string>& allowed_scope) {
            auto it = std::find(slots.begin(), slots.end(), item.first);
            if (it == slots.end()) {
                rerror("unresolved-name", std::string(kind) + " equation for unknown slot '" +
                                              item.first + "' in system '" + sys.name + "'");
                return;
            }
            std::vector<std::string> vars;
            collect_vars(item.second, vars);
            for (const auto& v : vars)
                if (std::find(allowed_scope.begin(), allowed_scope.end(), v) ==
                    allowed_scope.end())
                    rerror("unresolved-name", "unknown identifier '" + v + "' in " + kind +
                                                  " equation of system '" + sys.name + "'");
            auto& slot = dst[static_cast<std::size_t>(it - slots.begin())];
            if (slot)
                rerror("duplicate-name", std::string(kind) + " equation for '" + item.first +
                                             "' given twice in system '" + sys.name + "'");
            slot = item.second;
        };
        for (const auto& d : dots) place(state_slots, d, spec.derivs, "dot", scope);
        // readouts may reference states only
        for (const auto& o : outs) place(out_slots, o, spec.outputs, "out", state_slots);
        for (std::size_t i = 0; i < spec.derivs.size(); ++i)
            if (!spec.derivs[i])
                rerror("missing-equation", "no dot equation for state slot '" + state_slots[i] +
                                               "' in system '" + sys.name + "'");
        for (std::size_t i = 0; i < spec.outputs.size(); ++i)
            if (!spec.outputs[i])
                rerror("missing-equation", "no out equation for output slot '" + out_slots[i] +
                                               "' in system '" + sys.name + "'");
        sys.impl = std::move(spec);
    }

    void rerror(std::string code, std::string msg) {
        result_.diagnostics.push_back({"error", std::move(code), std::move(msg), file_, 0, 0});
    }

public:
    /// Resolve a wiring declaration against its document.
    static OperadicWiring build_operadic(const SystemDocument& doc, const WiringDecl& decl) {
        std::vector<BoxInterface> doms;
        for (const auto& d : decl.dom_names) {
            if (const BoxDecl* b = doc.find_box(d)) {
                doms.push_back(b->box);
            } else if (const SystemDecl* s = doc.find_system(d)) {
                const BoxDecl* b2 = doc.find_box(s->box_name);
                if (!b2) throw Error("system '" + d + "' refers to unknown box");
                doms.push_back(b2->box);
            } else {
                throw Error("unknown box or system '" + d + "'");
            }
        }
        const BoxDecl* cod = doc.find_box(decl.cod_box);
        if (!cod) throw Error("unknown box '" + decl.cod_box + "'");
        std::vector<std::pair<OperadicWiring::PortRef, OperadicWiring::PortRef>> wires;
        for (auto [a, b] : decl.wires) {
            if (a.box == decl.cod_box) a.box.clear();
            if (b.box == decl.cod_box) b.box.clear();
            wires.emplace_back(std::move(a), std::move(b));
        }
        return OperadicWiring::from_wires(std::move(doms), decl.dom_names, cod->box, wires);
    }

private:
    struct PendingExprs {
        std::size_t index;
        std::vector<std::pair<std::string, ExprPtr>> dots;
        std::vector<std::pair<std::string, ExprPtr>> outs;
    };

    std::string file_;
    std::vector<std::string_view> lines_;
    std::size_t line_ = 0;
    ParseResult result_;
    std::vector<PendingExprs> pending_exprs_;
};

} // namespace detail

/// Parse a DSL document; on failure the diagnostics carry locations.
inline ParseResult parse_document(std::string_view text, std::string file = "") {
    return detail::DocumentParser(text, std::move(file)).run();
}

inline OperadicWiring build_operadic(const SystemDocument& doc, const WiringDecl& decl) {
    return detail::DocumentParser::build_operadic(doc, decl);
}

// --- serialization ----------------------------------------------------------

namespace detail {

inline void write_matrix(std::ostream& os, const char* name, const Eigen::MatrixXd& m) {
    os << "  " << name << " = [";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        os << " ";
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) os << " ";
            os << format_double(m(i, j));
        }
        if (i + 1 < m.rows()) os << " ;";
    }
    os << " ]\n";
}

} // namespace detail

/// Deterministic serialization; reparsing yields an equal document.
inline std::string serialize(const SystemDocument& doc) {
    std::ostringstream os;
    for (const auto& b : doc.boxes) {
        os << "box " << b.name << " {\n";
        for (const auto& p : b.box.inputs)
            os << "  in " << p.name << " : " << p.type.dim << "\n";
        for (const auto& p : b.box.outputs)
            os << "  out " << p.name << " : " << p.type.dim << "\n";
        os << "}\n\n";
    }
    for (const auto& s : doc.systems) {
        os << "system " << s.name << " : " << s.box_name << " {\n";
        for (const auto& p : s.states)
            os << "  state " << p.name << " : " << p.type.dim << "\n";
        if (s.is_linear()) {
            const auto& lin = std::get<LinearSpec>(s.impl);
            detail::write_matrix(os, "A", lin.A);
            detail::write_matrix(os, "B", lin.B);
            detail::write_matrix(os, "C", lin.C);
        } else {
            const auto& spec = std::get<ExprSpec>(s.impl);
            const BoxDecl* box = doc.find_box(s.box_name);
            const auto state_slots = detail::coordinate_names(s.states);
            const auto out_slots =
                box ? detail::coordinate_names(box->box.outputs) : std::vector<std::string>{};
            for (std::size_t i = 0; i < spec.derivs.size(); ++i)
                os << "  dot " << state_slots[i] << " = " << to_string(spec.derivs[i]) << "\n";
            for (std::size_t i = 0; i < spec.outputs.size(); ++i)
                os << "  out " << out_slots[i] << " = " << to_string(spec.outputs[i]) << "\n";
        }
        os << "}\n\n";
    }
    for (const auto& w : doc.wirings) {
        os << "wiring " << w.name << " :";
        for (const auto& d : w.dom_names) os << " " << d;
        os << " -> " << w.cod_box << " {\n";
        for (const auto& [a, b] : w.wires)
            os << "  " << a.box << "." << a.port << " -> " << b.box << "." << b.port << "\n";
        os << "}\n\n";
    }
    if (doc.directive) {
        const auto& d = *doc.directive;
        os << "simulate {\n";
        if (d.wiring) os << "  wiring " << *d.wiring << "\n";
        if (d.system) os << "  system " << *d.system << "\n";
        for (const auto& [n, v] : d.x0)
            os << "  x0 " << n << " = " << detail::format_double(v) << "\n";
        for (const auto& [n, e] : d.inputs)
            os << "  input " << n << " = " << to_string(e) << "\n";
        if (d.t0) os << "  t0 = " << detail::format_double(*d.t0) << "\n";
        if (d.t1) os << "  t1 = " << detail::format_double(*d.t1) << "\n";
        if (d.dt) os << "  dt = " << detail::format_double(*d.dt) << "\n";
        if (d.method) os << "  method " << (*d.method == Method::RK4 ? "rk4" : "euler") << "\n";
        os << "}\n";
    }
    return os.str();
}

} // namespace wiredyn
