// Command-line front end: validate, compose, flatten, simulate and
// export-dot over the text document format.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "wiredyn/builder.hpp"
#include "wiredyn/document.hpp"
#include "wiredyn/dot.hpp"
#include "wiredyn/json_export.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitNumeric = 3;

bool g_json_errors = false;

void report(const wiredyn::Diagnostic& d) {
    if (g_json_errors) {
        nlohmann::json j = {{"severity", d.severity}, {"code", d.code},
                            {"message", d.message},  {"file", d.file},
                            {"line", d.line},        {"col", d.col}};
        std::cerr << j.dump() << "\n";
    } else {
        std::cerr << d.format() << "\n";
    }
}

void report(const std::string& code, const std::string& message, const std::string& file = "") {
    report(wiredyn::Diagnostic{"error", code, message, file, 0, 0});
}

/// Load and fully diagnose a document; nullopt means diagnostics were
/// emitted and the caller should exit kExitInvalid.
std::optional<wiredyn::SystemDocument> load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        report("io-error", "cannot open '" + path + "'", path);
        return std::nullopt;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    wiredyn::ParseResult res = wiredyn::parse_document(buf.str(), path);
    for (const auto& d : res.diagnostics) report(d);
    if (!res.ok()) return std::nullopt;
    return std::move(res.document);
}

const wiredyn::WiringDecl* find_wiring_or_report(const wiredyn::SystemDocument& doc,
                                                 const std::string& name,
                                                 const std::string& file) {
    const wiredyn::WiringDecl* w = doc.find_wiring(name);
    if (!w) report("unresolved-name", "no wiring named '" + name + "'", file);
    return w;
}

std::string format_matrix(const Eigen::MatrixXd& m) {
    char buf[40];
    std::string s = "[";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        s += " ";
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) s += " ";
            std::snprintf(buf, sizeof buf, "%.12g", m(i, j));
            s += buf;
        }
        if (i + 1 < m.rows()) s += " ;";
    }
    s += " ]";
    return s;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"wiring-diagram toolkit for open dynamical systems"};
    app.require_subcommand(1);
    app.add_flag("--json-errors", g_json_errors, "emit diagnostics as JSON objects");

    std::string file, wiring_name, out_path, csv_path, format = "matrix", method, x0_csv;
    double t1 = 0, dt = 0;
    bool have_t1 = false, have_dt = false;

    auto* validate = app.add_subcommand("validate", "check a document and all its wirings");
    validate->add_option("file", file)->required();

    auto* compose = app.add_subcommand("compose", "apply a wiring and emit the composed system");
    compose->add_option("file", file)->required();
    compose->add_option("--wiring", wiring_name)->required();
    compose->add_option("--out", out_path);

    auto* flatten = app.add_subcommand("flatten", "print the composed matrix blocks");
    flatten->add_option("file", file)->required();
    flatten->add_option("--wiring", wiring_name)->required();
    flatten->add_option("--format", format)->check(CLI::IsMember({"matrix"}));

    auto* simulate = app.add_subcommand("simulate", "run the document's simulate block");
    simulate->add_option("file", file)->required();
    simulate->add_option("--x0", x0_csv, "comma-separated initial state, layout order");
    simulate->add_option("--t1", t1)->each([&](const std::string&) { have_t1 = true; });
    simulate->add_option("--dt", dt)->each([&](const std::string&) { have_dt = true; });
    simulate->add_option("--method", method)->check(CLI::IsMember({"euler", "rk4"}));
    simulate->add_option("--csv", csv_path)->required();

    auto* export_dot = app.add_subcommand("export-dot", "render a wiring as Graphviz DOT");
    export_dot->add_option("file", file)->required();
    export_dot->add_option("--wiring", wiring_name)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        auto doc = load(file);
        if (!doc) return kExitInvalid;

        if (validate->parsed()) return kExitOk;

        if (compose->parsed()) {
            const auto* w = find_wiring_or_report(*doc, wiring_name, file);
            if (!w) return kExitInvalid;
            wiredyn::SystemDocument out = wiredyn::compose_document(*doc, *w);
            const std::string text = wiredyn::serialize(out);
            if (out_path.empty()) {
                std::cout << text;
            } else {
                std::ofstream os(out_path, std::ios::binary);
                if (!os) {
                    report("io-error", "cannot write '" + out_path + "'");
                    return kExitUsage;
                }
                os << text;
            }
            return kExitOk;
        }

        if (flatten->parsed()) {
            const auto* w = find_wiring_or_report(*doc, wiring_name, file);
            if (!w) return kExitInvalid;
            if (!wiredyn::all_linear(*doc, *w)) {
                report("not-linear",
                       "flatten --format matrix requires matrix-defined systems", file);
                return kExitInvalid;
            }
            wiredyn::LinearOpenSystem flat = wiredyn::flatten_linear(*doc, *w);
            std::cout << "A' = " << format_matrix(flat.A) << "\n"
                      << "B' = " << format_matrix(flat.B) << "\n"
                      << "C' = " << format_matrix(flat.C) << "\n";
            return kExitOk;
        }

        if (simulate->parsed()) {
            wiredyn::SimSetup setup = wiredyn::build_simulation(*doc);
            if (have_t1) setup.cfg.t1 = t1;
            if (have_dt) setup.cfg.dt = dt;
            if (method == "euler") setup.cfg.method = wiredyn::Method::Euler;
            if (method == "rk4") setup.cfg.method = wiredyn::Method::RK4;
            if (!x0_csv.empty()) {
                std::vector<double> vals;
                std::stringstream ss(x0_csv);
                std::string tok;
                while (std::getline(ss, tok, ',')) {
                    try {
                        vals.push_back(std::stod(tok));
                    } catch (const std::exception&) {
                        report("usage", "malformed --x0 entry '" + tok + "'");
                        return kExitUsage;
                    }
                }
                if (static_cast<Eigen::Index>(vals.size()) != setup.x0.size()) {
                    report("usage", "--x0 needs " + std::to_string(setup.x0.size()) +
                                        " values, got " + std::to_string(vals.size()));
                    return kExitUsage;
                }
                for (std::size_t i = 0; i < vals.size(); ++i)
                    setup.x0[static_cast<Eigen::Index>(i)] = vals[i];
            }
            wiredyn::Trajectory traj =
                wiredyn::simulate(setup.system, setup.x0, setup.inputs, setup.cfg);
            std::ofstream os(csv_path, std::ios::binary);
            if (!os) {
                report("io-error", "cannot write '" + csv_path + "'");
                return kExitUsage;
            }
            wiredyn::write_trajectory_csv(os, traj, setup.states, setup.box.outputs);
            return kExitOk;
        }

        if (export_dot->parsed()) {
            const auto* w = find_wiring_or_report(*doc, wiring_name, file);
            if (!w) return kExitInvalid;
            std::cout << wiredyn::to_dot(wiredyn::build_operadic(*doc, *w));
            return kExitOk;
        }
    } catch (const wiredyn::NumericError& e) {
        report("numeric", e.what(), file);
        return kExitNumeric;
    } catch (const wiredyn::Error& e) {
        report("invalid", e.what(), file);
        return kExitInvalid;
    }
    return kExitUsage;
}
