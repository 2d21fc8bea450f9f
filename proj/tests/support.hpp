// Shared random generators for the property tests: boxes, valid wiring
// diagrams (built valid by construction, so closure under composition is
// a real check), linear and nonlinear systems, and expression trees.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wiredyn/expr.hpp"
#include "wiredyn/linear_system.hpp"
#include "wiredyn/open_system.hpp"
#include "wiredyn/wiring.hpp"

namespace support {

using Rng = std::mt19937;

inline int rand_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double rand_real(Rng& rng, double lo = -2.0, double hi = 2.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline wiredyn::TypedFiniteSet random_ports(Rng& rng, const std::string& prefix, int count,
                                            int max_dim = 3) {
    std::vector<wiredyn::Port> ports;
    for (int i = 0; i < count; ++i)
        ports.push_back({prefix + std::to_string(i), {rand_int(rng, 1, max_dim)}});
    return wiredyn::TypedFiniteSet(std::move(ports));
}

inline wiredyn::BoxInterface random_box(Rng& rng, const std::string& tag, int max_ports = 4) {
    return wiredyn::BoxInterface(random_ports(rng, tag + "i", rand_int(rng, 0, max_ports)),
                                 random_ports(rng, tag + "o", rand_int(rng, 0, max_ports)));
}

/// A valid wiring diagram out of a given domain box, with a freshly
/// generated codomain. Valid by construction: some inner outputs feed
/// back into inner inputs of equal dimension, every remaining inner
/// output drives a fresh outer output, and every remaining inner input
/// is fed by a fresh outer input.
inline wiredyn::WiringDiagram random_wiring_from(Rng& rng, const wiredyn::BoxInterface& x,
                                                 const std::string& tag) {
    const std::size_t n_in = x.inputs.size();
    const std::size_t n_out = x.outputs.size();

    // Bucket inner inputs and outputs by dimension, shuffle, and pair a
    // random dimension-matched prefix as feedback wires.
    std::map<int, std::vector<std::size_t>> ins_by_dim, outs_by_dim;
    for (std::size_t i = 0; i < n_in; ++i) ins_by_dim[x.inputs[i].type.dim].push_back(i);
    for (std::size_t i = 0; i < n_out; ++i) outs_by_dim[x.outputs[i].type.dim].push_back(i);

    std::vector<std::optional<std::size_t>> feeds(n_in); // inner input <- inner output
    std::vector<bool> out_used(n_out, false);
    for (auto& [dim, ins] : ins_by_dim) {
        auto oit = outs_by_dim.find(dim);
        if (oit == outs_by_dim.end()) continue;
        auto& outs = oit->second;
        std::shuffle(ins.begin(), ins.end(), rng);
        std::shuffle(outs.begin(), outs.end(), rng);
        const int pairs =
            rand_int(rng, 0, static_cast<int>(std::min(ins.size(), outs.size())));
        for (int p = 0; p < pairs; ++p) {
            feeds[ins[static_cast<std::size_t>(p)]] = outs[static_cast<std::size_t>(p)];
            out_used[outs[static_cast<std::size_t>(p)]] = true;
        }
    }

    std::vector<wiredyn::Port> y_in, y_out;
    std::vector<std::optional<std::size_t>> phi(n_in); // grows below
    std::vector<std::size_t> free_outs;
    for (std::size_t i = 0; i < n_out; ++i)
        if (!out_used[i]) free_outs.push_back(i);

    for (std::size_t i = 0; i < n_in; ++i) {
        if (feeds[i]) {
            phi[i] = *feeds[i];
        } else {
            phi[i] = n_out + y_in.size();
            y_in.push_back({tag + "i" + std::to_string(y_in.size()), x.inputs[i].type});
        }
    }
    for (std::size_t fo : free_outs) {
        y_out.push_back({tag + "o" + std::to_string(y_out.size()), x.outputs[fo].type});
        phi.push_back(fo);
    }
    wiredyn::BoxInterface y{wiredyn::TypedFiniteSet(std::move(y_in)),
                            wiredyn::TypedFiniteSet(std::move(y_out))};
    return wiredyn::WiringDiagram::from_map(x, std::move(y), std::move(phi));
}

inline Eigen::MatrixXd random_matrix(Rng& rng, int r, int c) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rand_real(rng);
    return m;
}

inline Eigen::VectorXd random_vector(Rng& rng, int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rand_real(rng);
    return v;
}

inline wiredyn::LinearOpenSystem random_linear(Rng& rng, const wiredyn::BoxInterface& box,
                                               const std::string& tag) {
    wiredyn::TypedFiniteSet states = random_ports(rng, tag + "s", rand_int(rng, 0, 3));
    const int m = states.total_dim();
    return wiredyn::LinearOpenSystem(std::move(states), box, random_matrix(rng, m, m),
                                     random_matrix(rng, m, box.inputs.total_dim()),
                                     random_matrix(rng, box.outputs.total_dim(), m));
}

/// A smooth nonlinear system with randomly drawn coefficients; dynamics
/// and readout are bounded-coefficient mixes of tanh/sin terms so that
/// pointwise comparisons stay well-scaled.
inline wiredyn::OpenSystem random_general(Rng& rng, const wiredyn::BoxInterface& box,
                                          const std::string& tag) {
    wiredyn::TypedFiniteSet states = random_ports(rng, tag + "s", rand_int(rng, 0, 3));
    const int m = states.total_dim();
    const int ni = box.inputs.total_dim();
    const int no = box.outputs.total_dim();
    Eigen::MatrixXd w1 = random_matrix(rng, m, m);
    Eigen::MatrixXd w2 = random_matrix(rng, m, ni);
    Eigen::MatrixXd w3 = random_matrix(rng, no, m);
    Eigen::VectorXd b1 = random_vector(rng, m);
    Eigen::VectorXd b2 = random_vector(rng, no);
    wiredyn::OpenSystem::Dynamics f_in =
        [w1, w2, b1](const Eigen::VectorXd& s, const Eigen::VectorXd& u) -> Eigen::VectorXd {
        Eigen::VectorXd lin = w1 * s + w2 * u + b1;
        return lin.array().tanh() + (0.5 * lin.array()).sin().matrix().array();
    };
    wiredyn::OpenSystem::Readout f_out =
        [w3, b2](const Eigen::VectorXd& s) -> Eigen::VectorXd {
        Eigen::VectorXd lin = w3 * s + b2;
        return lin.array().tanh();
    };
    return wiredyn::OpenSystem(std::move(states), box, std::move(f_in), std::move(f_out));
}

/// Random expression over the given scope; constants are non-negative
/// (negation appears only as an explicit node) so printing round-trips
/// to a structurally equal tree.
inline wiredyn::ExprPtr random_expr(Rng& rng, const std::vector<std::string>& scope,
                                    int depth = 4) {
    using wiredyn::Expr;
    if (depth == 0 || rand_int(rng, 0, 3) == 0) {
        if (!scope.empty() && rand_int(rng, 0, 1) == 0)
            return Expr::make_var(scope[static_cast<std::size_t>(
                rand_int(rng, 0, static_cast<int>(scope.size()) - 1))]);
        return Expr::make_number(std::round(rand_real(rng, 0, 8) * 64.0) / 64.0);
    }
    switch (rand_int(rng, 0, 7)) {
    case 0: return Expr::make_binary(Expr::Kind::Add, random_expr(rng, scope, depth - 1),
                                     random_expr(rng, scope, depth - 1));
    case 1: return Expr::make_binary(Expr::Kind::Sub, random_expr(rng, scope, depth - 1),
                                     random_expr(rng, scope, depth - 1));
    case 2: return Expr::make_binary(Expr::Kind::Mul, random_expr(rng, scope, depth - 1),
                                     random_expr(rng, scope, depth - 1));
    case 3: return Expr::make_binary(Expr::Kind::Div, random_expr(rng, scope, depth - 1),
                                     random_expr(rng, scope, depth - 1));
    case 4: return Expr::make_binary(Expr::Kind::Pow, random_expr(rng, scope, depth - 1),
                                     random_expr(rng, scope, depth - 1));
    case 5: return Expr::make_unary(Expr::Kind::Neg, random_expr(rng, scope, depth - 1));
    default: {
        static const char* fns[] = {"sin", "cos", "exp", "log", "tanh", "sqrt", "abs"};
        return Expr::make_call(fns[rand_int(rng, 0, 6)], random_expr(rng, scope, depth - 1));
    }
    }
}

inline bool matrices_close(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (a.size() == 0) return true;
    return (a - b).cwiseAbs().maxCoeff() <= tol;
}

inline bool matrices_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           (a.size() == 0 || (a.array() == b.array()).all());
}

/// Relative sup-norm difference, guarded for tiny magnitudes.
inline double rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) return 1e300;
    double worst = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1.0});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

} // namespace support
