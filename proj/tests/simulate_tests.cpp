#include <catch2/catch_amalgamated.hpp>
#include <sstream>

#include "support.hpp"
#include "wiredyn/simulate.hpp"

using namespace wiredyn;

namespace {

OpenSystem decay() {
    // Closed box, dx = -x.
    return OpenSystem(
        TypedFiniteSet({{"x", {1}}}), BoxInterface{},
        [](const Eigen::VectorXd& s, const Eigen::VectorXd&) -> Eigen::VectorXd { return -s; },
        [](const Eigen::VectorXd&) { return Eigen::VectorXd(0); });
}

double decay_error(Method m, double dt) {
    SimConfig cfg{0.0, 1.0, dt, m};
    Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
    Trajectory traj = simulate(decay(), x0, InputSignal(TypedFiniteSet{}), cfg);
    return std::abs(traj.states.back()[0] - std::exp(-1.0));
}

} // namespace

TEST_CASE("RK4 integrates exponential decay to 1e-6") {
    CHECK(decay_error(Method::RK4, 0.01) <= 1e-6);
}

TEST_CASE("halving the step shows fourth-order convergence") {
    const double ratio = decay_error(Method::RK4, 0.1) / decay_error(Method::RK4, 0.05);
    CHECK(ratio >= 12.0);
    CHECK(ratio <= 20.0);
}

TEST_CASE("Euler is first order") {
    const double ratio = decay_error(Method::Euler, 0.01) / decay_error(Method::Euler, 0.005);
    CHECK(ratio >= 1.8);
    CHECK(ratio <= 2.2);
}

TEST_CASE("the last step is shortened to land on t1") {
    SimConfig cfg{0.0, 1.0, 0.3, Method::Euler};
    Trajectory traj = simulate(decay(), Eigen::VectorXd::Ones(1),
                               InputSignal(TypedFiniteSet{}), cfg);
    REQUIRE(traj.times.size() == 5);
    CHECK(traj.times.back() == 1.0);
    CHECK(traj.times[3] == Catch::Approx(0.9));
    CHECK(traj.states.size() == traj.times.size());
    CHECK(traj.outputs.size() == traj.times.size());
}

TEST_CASE("stateless systems have constant outputs") {
    BoxInterface box{TypedFiniteSet{}, TypedFiniteSet({{"y", {1}}})};
    OpenSystem sys(
        TypedFiniteSet{}, box,
        [](const Eigen::VectorXd&, const Eigen::VectorXd&) { return Eigen::VectorXd(0); },
        [](const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(1, 2.5); });
    SimConfig cfg{0.0, 1.0, 0.25, Method::RK4};
    Trajectory traj = simulate(sys, Eigen::VectorXd(0), InputSignal(TypedFiniteSet{}), cfg);
    for (const auto& s : traj.states) CHECK(s.size() == 0);
    for (const auto& o : traj.outputs) CHECK(o[0] == 2.5);
}

TEST_CASE("input signals: defaults, constants, time functions") {
    TypedFiniteSet ins({{"a", {1}}, {"b", {2}}});
    InputSignal u(ins);
    Eigen::VectorXd v0 = u.sample(0.0);
    CHECK(v0.isZero());

    u.set_constant("a", 3.0);
    u.set_function("b", [](double t) {
        Eigen::VectorXd v(2);
        v << t, 2 * t;
        return v;
    });
    Eigen::VectorXd v1 = u.sample(1.5);
    CHECK(v1[0] == 3.0);
    CHECK(v1[1] == 1.5);
    CHECK(v1[2] == 3.0);

    CHECK_THROWS_AS(u.set_constant("b", 1.0), DimensionError);
    CHECK_THROWS_AS(u.set_constant("zz", 1.0), Error);
    u.set_function("a", [](double) { return Eigen::VectorXd(2); });
    CHECK_THROWS_AS(u.sample(0.0), DimensionError);
}

TEST_CASE("a time-varying input drives the expected response") {
    // dx = u(t) with u = cos(t): x(t) = sin(t).
    BoxInterface box{TypedFiniteSet({{"u", {1}}}), TypedFiniteSet{}};
    OpenSystem sys(
        TypedFiniteSet({{"x", {1}}}), box,
        [](const Eigen::VectorXd&, const Eigen::VectorXd& u) { return u; },
        [](const Eigen::VectorXd&) { return Eigen::VectorXd(0); });
    InputSignal u(box.inputs);
    u.set_function("u", [](double t) { return Eigen::VectorXd::Constant(1, std::cos(t)); });
    SimConfig cfg{0.0, 2.0, 0.01, Method::RK4};
    Trajectory traj = simulate(sys, Eigen::VectorXd::Zero(1), u, cfg);
    CHECK(std::abs(traj.states.back()[0] - std::sin(2.0)) <= 1e-8);
}

TEST_CASE("non-finite derivatives stop the run with a located error") {
    OpenSystem sys(
        TypedFiniteSet({{"x", {1}}}), BoxInterface{},
        [](const Eigen::VectorXd& s, const Eigen::VectorXd&) -> Eigen::VectorXd {
            return s.array().square().matrix() * 1e100; // blows up fast
        },
        [](const Eigen::VectorXd&) { return Eigen::VectorXd(0); });
    SimConfig cfg{0.0, 1.0, 0.1, Method::Euler};
    CHECK_THROWS_AS(simulate(sys, Eigen::VectorXd::Ones(1), InputSignal(TypedFiniteSet{}), cfg),
                    NumericError);
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(SimConfig({0.0, 0.0, 0.1, Method::RK4}).validate(), NumericError);
    CHECK_THROWS_AS(SimConfig({0.0, 1.0, 0.0, Method::RK4}).validate(), NumericError);
    CHECK_THROWS_AS(SimConfig({0.0, 1.0, 2.0, Method::RK4}).validate(), NumericError);
    CHECK_THROWS_AS(simulate(decay(), Eigen::VectorXd(2), InputSignal(TypedFiniteSet{}),
                             SimConfig{0, 1, 0.1, Method::RK4}),
                    DimensionError);
}

TEST_CASE("trajectory CSV layout") {
    TypedFiniteSet states({{"x", {1}}, {"v", {2}}});
    TypedFiniteSet outs({{"y", {1}}});
    Trajectory traj;
    traj.times = {0.0, 0.5};
    Eigen::VectorXd s(3);
    s << 1.0 / 3.0, 2, 3;
    traj.states = {s, s};
    traj.outputs = {Eigen::VectorXd::Constant(1, 0.1), Eigen::VectorXd::Constant(1, 0.2)};
    std::ostringstream os;
    write_trajectory_csv(os, traj, states, outs);
    const std::string text = os.str();
    CHECK(text ==
          "t,x,v[0],v[1],y\n"
          "0,0.333333333333,2,3,0.1\n"
          "0.5,0.333333333333,2,3,0.2\n");
    CHECK(text.find('\r') == std::string::npos);
}
