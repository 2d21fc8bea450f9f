#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>

#include "wiredyn/open_system.hpp"
#include "wiredyn/wiring.hpp"

namespace wiredyn {

/// A linear open system: [dm; u_out] = [A B; C 0] [m; u_in] over the
/// canonical port layouts. The input-to-output block is identically
/// zero and therefore not stored.
struct LinearOpenSystem {
    TypedFiniteSet states;
    BoxInterface box;
    Eigen::MatrixXd A; // state <- state
    Eigen::MatrixXd B; // state <- input
    Eigen::MatrixXd C; // output <- state

    LinearOpenSystem() = default;

    LinearOpenSystem(TypedFiniteSet states_, BoxInterface box_, Eigen::MatrixXd a,
                     Eigen::MatrixXd b, Eigen::MatrixXd c)
        : states(std::move(states_)), box(std::move(box_)), A(std::move(a)), B(std::move(b)),
          C(std::move(c)) {
        const int m = states.total_dim();
        const int u_in = box.inputs.total_dim();
        const int u_out = box.outputs.total_dim();
        auto check = [](const char* name, const Eigen::MatrixXd& mat, int r, int c2) {
            if (mat.rows() != r || mat.cols() != c2)
                throw DimensionError(std::string(name) + " block is " +
                                     std::to_string(mat.rows()) + "x" +
                                     std::to_string(mat.cols()) + ", expected " +
                                     std::to_string(r) + "x" + std::to_string(c2));
        };
        check("A", A, m, m);
        check("B", B, m, u_in);
        check("C", C, u_out, m);
    }

    int state_dim() const { return states.total_dim(); }
};

/// Closed-form wiring action on a linear system:
///   A' = B xx C + A,  B' = B xy,  C' = yx C
/// with xx, xy, yx the phi-matrix blocks. The composed input-to-output
/// block is zero by construction.
inline LinearOpenSystem apply_wiring_linear(const WiringDiagram& phi,
                                            const LinearOpenSystem& sys) {
    if (!(sys.box == phi.dom()))
        throw InterfaceError("apply_wiring_linear: system's box must equal the diagram's domain");
    const PhiBlocks pb = phi_matrix(phi);
    if (pb.xx.cols() != sys.C.rows() || pb.xx.rows() != sys.B.cols())
        throw DimensionError("apply_wiring_linear: system blocks do not match the box layout");
    Eigen::MatrixXd a = sys.B * pb.xx * sys.C + sys.A;
    Eigen::MatrixXd b = sys.B * pb.xy;
    Eigen::MatrixXd c = pb.yx * sys.C;
    return LinearOpenSystem(sys.states, phi.cod(), std::move(a), std::move(b), std::move(c));
}

/// Coherence product: block-diagonal A, B, C on concatenated layouts.
inline LinearOpenSystem product_linear(const LinearOpenSystem& s1, const LinearOpenSystem& s2,
                                       std::string_view left_tag = "L",
                                       std::string_view right_tag = "R") {
    TypedFiniteSet states = disjoint_union(s1.states, s2.states, left_tag, right_tag);
    BoxInterface box = tensor(s1.box, s2.box, left_tag, right_tag);

    auto blockdiag = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(a.rows() + b.rows(), a.cols() + b.cols());
        m.topLeftCorner(a.rows(), a.cols()) = a;
        m.bottomRightCorner(b.rows(), b.cols()) = b;
        return m;
    };
    return LinearOpenSystem(std::move(states), std::move(box), blockdiag(s1.A, s2.A),
                            blockdiag(s1.B, s2.B), blockdiag(s1.C, s2.C));
}

/// Operadic action on linear systems.
inline LinearOpenSystem apply_operadic_linear(const OperadicWiring& op,
                                              const std::vector<LinearOpenSystem>& systems) {
    if (systems.size() != op.doms().size())
        throw InterfaceError("apply_operadic_linear: expected " +
                             std::to_string(op.doms().size()) + " systems, got " +
                             std::to_string(systems.size()));
    for (std::size_t i = 0; i < systems.size(); ++i)
        if (!(systems[i].box == op.doms()[i]))
            throw InterfaceError("apply_operadic_linear: system " + std::to_string(i) +
                                 " does not live on domain box '" + op.labels()[i] + "'");

    std::vector<TypedFiniteSet> state_sets;
    state_sets.reserve(systems.size());
    for (const auto& s : systems) state_sets.push_back(s.states);
    TypedFiniteSet states = merge_state_sets(state_sets, op.labels());
    const BoxInterface stacked = op.stacked_dom();

    int m = 0, uin = 0, uout = 0;
    for (const auto& s : systems) {
        m += s.state_dim();
        uin += s.box.inputs.total_dim();
        uout += s.box.outputs.total_dim();
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, uin);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(uout, m);
    int mo = 0, ui = 0, uo = 0;
    for (const auto& s : systems) {
        A.block(mo, mo, s.A.rows(), s.A.cols()) = s.A;
        B.block(mo, ui, s.B.rows(), s.B.cols()) = s.B;
        C.block(uo, mo, s.C.rows(), s.C.cols()) = s.C;
        mo += s.state_dim();
        ui += s.box.inputs.total_dim();
        uo += s.box.outputs.total_dim();
    }
    LinearOpenSystem combined(std::move(states), stacked, std::move(A), std::move(B),
                              std::move(C));
    return apply_wiring_linear(op.flatten(), combined);
}

/// The embedding of a linear system into the general algebra:
/// f_in(s, u) = A s + B u, f_out(s) = C s.
inline OpenSystem to_general(const LinearOpenSystem& sys) {
    Eigen::MatrixXd A = sys.A, B = sys.B, C = sys.C;
    return OpenSystem(
        sys.states, sys.box,
        [A, B](const Eigen::VectorXd& s, const Eigen::VectorXd& u) -> Eigen::VectorXd {
            return A * s + B * u;
        },
        [C](const Eigen::VectorXd& s) -> Eigen::VectorXd { return C * s; });
}

/// Composite of two phi-matrices without any port chasing:
///   omega.xx = phi.xy psi.xx phi.yx + phi.xx
///   omega.xy = phi.xy psi.xy
///   omega.yx = psi.yx phi.yx
///   omega.yy = 0
/// Equals phi_matrix(compose(Phi, Psi)) entrywise.
inline PhiBlocks compose_phi_matrices(const PhiBlocks& phi, const PhiBlocks& psi) {
    if (phi.xy.cols() != psi.xx.rows() || psi.xx.cols() != phi.yx.rows())
        throw DimensionError("compose_phi_matrices: incompatible block shapes");
    PhiBlocks w;
    w.xx = phi.xy * psi.xx * phi.yx + phi.xx;
    w.xy = phi.xy * psi.xy;
    w.yx = psi.yx * phi.yx;
    w.yy = Eigen::MatrixXd::Zero(w.yx.rows(), w.xy.cols());
    return w;
}

} // namespace wiredyn
