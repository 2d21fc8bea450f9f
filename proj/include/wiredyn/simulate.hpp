#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "wiredyn/linear_system.hpp"
#include "wiredyn/open_system.hpp"

namespace wiredyn {

/// Time-varying assignment for the outer input ports: per port either a
/// constant vector or a map time -> vector. Unset ports default to zero.
class InputSignal {
public:
    using TimeFn = std::function<Eigen::VectorXd(double)>;

    InputSignal() = default;
    explicit InputSignal(TypedFiniteSet inputs) : inputs_(std::move(inputs)) {
        fns_.resize(inputs_.size());
    }

    void set_constant(std::string_view port, const Eigen::VectorXd& value) {
        const std::size_t i = port_index(port);
        if (value.size() != inputs_[i].type.dim)
            throw DimensionError("input '" + std::string(port) + "' expects dimension " +
                                 std::to_string(inputs_[i].type.dim));
        fns_[i] = [value](double) { return value; };
    }

    void set_constant(std::string_view port, double value) {
        set_constant(port, Eigen::VectorXd::Constant(1, value));
    }

    void set_function(std::string_view port, TimeFn fn) { fns_[port_index(port)] = std::move(fn); }

    /// The full input vector at time t, in the canonical port layout.
    Eigen::VectorXd sample(double t) const {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(inputs_.total_dim());
        for (std::size_t i = 0; i < inputs_.size(); ++i) {
            if (!fns_[i]) continue;
            Eigen::VectorXd v = fns_[i](t);
            if (v.size() != inputs_[i].type.dim)
                throw DimensionError("input '" + inputs_[i].name +
                                     "' produced a vector of the wrong dimension");
            u.segment(inputs_.offset(i), inputs_[i].type.dim) = v;
        }
        return u;
    }

    const TypedFiniteSet& inputs() const { return inputs_; }

private:
    std::size_t port_index(std::string_view port) const {
        if (auto i = inputs_.index_of(port)) return *i;
        throw Error("unknown input port '" + std::string(port) + "'");
    }

    TypedFiniteSet inputs_;
    std::vector<TimeFn> fns_;
};

enum class Method { Euler, RK4 };

struct SimConfig {
    double t0 = 0.0;
    double t1 = 1.0;
    double dt = 0.01;
    Method method = Method::RK4;

    void validate() const {
        if (!(t1 > t0)) throw NumericError("simulation requires t1 > t0");
        if (!(dt > 0)) throw NumericError("simulation requires dt > 0");
        if (dt > t1 - t0) throw NumericError("simulation requires dt <= t1 - t0");
    }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> outputs;
};

/// Fixed-step explicit integration of an open system under a
/// time-varying input. Outputs are recorded via f_out at each stored
/// state. The last step is shortened to land on t1 exactly.
inline Trajectory simulate(const OpenSystem& sys, const Eigen::VectorXd& x0,
                           const InputSignal& u, const SimConfig& cfg) {
    cfg.validate();
    if (x0.size() != sys.state_dim())
        throw DimensionError("initial state has length " + std::to_string(x0.size()) +
                             ", expected " + std::to_string(sys.state_dim()));

    auto deriv = [&](double t, const Eigen::VectorXd& s) {
        Eigen::VectorXd d = sys.f_in()(s, u.sample(t));
        for (Eigen::Index i = 0; i < d.size(); ++i)
            if (!std::isfinite(d[i]))
                throw NumericError("non-finite derivative at t=" + std::to_string(t) +
                                   ", state coordinate " + std::to_string(i));
        return d;
    };

    Trajectory traj;
    Eigen::VectorXd s = x0;
    double t = cfg.t0;
    traj.times.push_back(t);
    traj.states.push_back(s);
    traj.outputs.push_back(sys.f_out()(s));

    for (long k = 1; t < cfg.t1; ++k) {
        double tn = cfg.t0 + static_cast<double>(k) * cfg.dt;
        if (tn > cfg.t1 - 1e-12 * (cfg.t1 - cfg.t0)) tn = cfg.t1;
        const double h = tn - t;
        if (h <= 0) break;
        switch (cfg.method) {
        case Method::Euler: {
            s = s + h * deriv(t, s);
            break;
        }
        case Method::RK4: {
            const Eigen::VectorXd k1 = deriv(t, s);
            const Eigen::VectorXd k2 = deriv(t + h / 2, s + (h / 2) * k1);
            const Eigen::VectorXd k3 = deriv(t + h / 2, s + (h / 2) * k2);
            const Eigen::VectorXd k4 = deriv(t + h, s + h * k3);
            s = s + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
            break;
        }
        }
        t = tn;
        traj.times.push_back(t);
        traj.states.push_back(s);
        traj.outputs.push_back(sys.f_out()(s));
    }
    return traj;
}

/// Steady state of a linear system under constant input: solves
/// A s + B u = 0. Throws for singular or near-singular A, reporting a
/// condition estimate.
inline Eigen::VectorXd equilibrium(const LinearOpenSystem& sys, const Eigen::VectorXd& u) {
    if (u.size() != sys.box.inputs.total_dim())
        throw DimensionError("equilibrium: input vector has the wrong length");
    const int m = sys.state_dim();
    if (m == 0) return Eigen::VectorXd(0);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys.A);
    const Eigen::VectorXd diag = lu.matrixLU().diagonal().cwiseAbs();
    const double pmax = diag.maxCoeff();
    const double pmin = diag.minCoeff();
    const double cond = pmin > 0 ? pmax / pmin : std::numeric_limits<double>::infinity();
    if (!lu.isInvertible() || pmin <= 1e-14 * pmax)
        throw NumericError("equilibrium: A is singular or ill-conditioned (condition estimate " +
                           std::to_string(cond) + ")");

    Eigen::VectorXd s = lu.solve(-(sys.B * u));
    const double residual = (sys.A * s + sys.B * u).norm();
    const double scale = sys.A.norm() * s.norm() + (sys.B * u).norm();
    if (residual > 1e-10 * std::max(scale, 1e-300))
        throw NumericError("equilibrium: solve residual too large (" +
                           std::to_string(residual) + ")");
    return s;
}

/// Trajectory CSV: header "t,<state names>,<output port names>", one row
/// per stored step, 12 significant digits, LF line endings.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                                 const TypedFiniteSet& states, const TypedFiniteSet& outputs) {
    auto column_names = [&](const TypedFiniteSet& set, std::string& line) {
        for (const auto& p : set) {
            if (p.type.dim == 1) {
                line += "," + p.name;
            } else {
                for (int i = 0; i < p.type.dim; ++i)
                    line += "," + p.name + "[" + std::to_string(i) + "]";
            }
        }
    };
    std::string header = "t";
    column_names(states, header);
    column_names(outputs, header);
    os << header << "\n";

    char buf[40];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return std::string(buf);
    };
    for (std::size_t r = 0; r < traj.times.size(); ++r) {
        std::string line = num(traj.times[r]);
        for (Eigen::Index i = 0; i < traj.states[r].size(); ++i)
            line += "," + num(traj.states[r][i]);
        for (Eigen::Index i = 0; i < traj.outputs[r].size(); ++i)
            line += "," + num(traj.outputs[r][i]);
        os << line << "\n";
    }
}

} // namespace wiredyn
