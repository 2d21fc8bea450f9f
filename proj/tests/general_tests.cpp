#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"
#include "wiredyn/linear_system.hpp"
#include "wiredyn/open_system.hpp"

using namespace wiredyn;

namespace {

const BoxInterface kX1{TypedFiniteSet({{"a", {1}}, {"b", {1}}}),
                       TypedFiniteSet({{"c", {1}}})};
const BoxInterface kX2{TypedFiniteSet({{"a", {1}}, {"b", {1}}}),
                       TypedFiniteSet({{"c", {1}}, {"d", {1}}})};
const BoxInterface kYBox{TypedFiniteSet({{"a", {1}}, {"b", {1}}}),
                         TypedFiniteSet({{"c", {1}}})};

OpenSystem tank1() {
    return OpenSystem(
        TypedFiniteSet({{"Q1", {1}}}), kX1,
        [](const Eigen::VectorXd& s, const Eigen::VectorXd& u) {
            return Eigen::VectorXd::Constant(1, -0.1 * s[0] + u[0] + u[1]);
        },
        [](const Eigen::VectorXd& s) { return Eigen::VectorXd::Constant(1, 0.1 * s[0]); });
}

OpenSystem tank2() {
    return OpenSystem(
        TypedFiniteSet({{"Q2", {1}}}), kX2,
        [](const Eigen::VectorXd& s, const Eigen::VectorXd& u) {
            return Eigen::VectorXd::Constant(1, -0.2 * s[0] + u[0] + u[1]);
        },
        [](const Eigen::VectorXd& s) {
            Eigen::VectorXd o(2);
            o << 0.125 * s[0], 0.075 * s[0];
            return o;
        });
}

OperadicWiring tank_wiring() {
    return OperadicWiring::from_wires(
        {kX1, kX2}, {"f1", "f2"}, kYBox,
        {{{"f1", "a"}, {"", "b"}},
         {{"f1", "b"}, {"f2", "d"}},
         {{"f2", "a"}, {"", "a"}},
         {{"f2", "b"}, {"f1", "c"}},
         {{"", "c"}, {"f2", "c"}}});
}

} // namespace

TEST_CASE("composed tank system reproduces the single-equation form") {
    OpenSystem composed = apply_operadic(tank_wiring(), {tank1(), tank2()});
    REQUIRE(composed.state_dim() == 2);
    Eigen::VectorXd u(2);
    u << 3.0, 1.5;
    support::Rng rng(101);
    for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd s = support::random_vector(rng, 2) * 50.0;
        auto [d, o] = composed.evaluate(s, u);
        // dQ1 = -.1 Q1 + .075 Q2 + 1.5; dQ2 = .1 Q1 - .2 Q2 + 3; out = .125 Q2
        CHECK(std::abs(d[0] - (-0.1 * s[0] + 0.075 * s[1] + 1.5)) <= 1e-12);
        CHECK(std::abs(d[1] - (0.1 * s[0] - 0.2 * s[1] + 3.0)) <= 1e-12);
        CHECK(std::abs(o[0] - 0.125 * s[1]) <= 1e-12);
    }
}

TEST_CASE("identity wiring leaves evaluation unchanged") {
    OpenSystem s = tank2();
    OpenSystem r = apply_wiring(identity(kX2), s);
    support::Rng rng(3);
    for (int i = 0; i < 10; ++i) {
        Eigen::VectorXd st = support::random_vector(rng, 1);
        Eigen::VectorXd u = support::random_vector(rng, 2);
        auto [d1, o1] = s.evaluate(st, u);
        auto [d2, o2] = r.evaluate(st, u);
        CHECK(support::rel_diff(d1, d2) == 0.0);
        CHECK(support::rel_diff(o1, o2) == 0.0);
    }
}

TEST_CASE("self-feedback closes a system over its own readout") {
    // One box whose output feeds its own input; the closed system on the
    // empty box integrates dx = f_out(x) = x.
    BoxInterface x{TypedFiniteSet({{"u", {1}}}), TypedFiniteSet({{"y", {1}}})};
    OpenSystem sys(
        TypedFiniteSet({{"s", {1}}}), x,
        [](const Eigen::VectorXd&, const Eigen::VectorXd& u) { return u; },
        [](const Eigen::VectorXd& s) { return s; });
    WiringDiagram loop =
        WiringDiagram::from_wires(x, BoxInterface{}, {{dom_in("u"), dom_out("y")}});
    REQUIRE(loop.is_valid());
    OpenSystem closed = apply_wiring(loop, sys);
    CHECK(closed.input_dim() == 0);
    CHECK(closed.output_dim() == 0);
    Eigen::VectorXd st(1);
    st << 4.25;
    auto [d, o] = closed.evaluate(st, Eigen::VectorXd(0));
    CHECK(d[0] == 4.25);
}

TEST_CASE("the readout never sees the input") {
    // g_out of a composed system depends only on the state, even when
    // outer inputs change.
    OpenSystem composed = apply_operadic(tank_wiring(), {tank1(), tank2()});
    Eigen::VectorXd s(2);
    s << 7.0, 9.0;
    Eigen::VectorXd out = composed.f_out()(s);
    CHECK(out.size() == 1);
    CHECK(out[0] == 0.125 * 9.0);
}

TEST_CASE("general action is functorial over composition") {
    support::Rng rng(41);
    for (int iter = 0; iter < 50; ++iter) {
        BoxInterface x = support::random_box(rng, "x");
        WiringDiagram p1 = support::random_wiring_from(rng, x, "p");
        WiringDiagram p2 = support::random_wiring_from(rng, p1.cod(), "q");
        OpenSystem f = support::random_general(rng, x, "s");
        OpenSystem once = apply_wiring(compose(p1, p2), f);
        OpenSystem twice = apply_wiring(p2, apply_wiring(p1, f));
        for (int pt = 0; pt < 5; ++pt) {
            Eigen::VectorXd s = support::random_vector(rng, f.state_dim());
            Eigen::VectorXd u = support::random_vector(rng, p2.cod().inputs.total_dim());
            auto [d1, o1] = once.evaluate(s, u);
            auto [d2, o2] = twice.evaluate(s, u);
            CHECK(support::rel_diff(d1, d2) <= 1e-9);
            CHECK(support::rel_diff(o1, o2) <= 1e-9);
        }
    }
}

TEST_CASE("product of nonlinear systems acts componentwise") {
    support::Rng rng(43);
    BoxInterface b1 = support::random_box(rng, "a");
    BoxInterface b2 = support::random_box(rng, "b");
    OpenSystem s1 = support::random_general(rng, b1, "a");
    OpenSystem s2 = support::random_general(rng, b2, "b");
    OpenSystem p = product(s1, s2);
    for (int pt = 0; pt < 20; ++pt) {
        Eigen::VectorXd st = support::random_vector(rng, p.state_dim());
        Eigen::VectorXd u = support::random_vector(rng, p.input_dim());
        auto [d, o] = p.evaluate(st, u);
        auto [d1, o1] = s1.evaluate(st.head(s1.state_dim()), u.head(s1.input_dim()));
        auto [d2, o2] = s2.evaluate(st.tail(s2.state_dim()), u.tail(s2.input_dim()));
        Eigen::VectorXd dcat(d1.size() + d2.size()), ocat(o1.size() + o2.size());
        dcat << d1, d2;
        ocat << o1, o2;
        CHECK(support::rel_diff(d, dcat) == 0.0);
        CHECK(support::rel_diff(o, ocat) == 0.0);
    }
}

TEST_CASE("evaluation reports bad vectors and non-finite results") {
    OpenSystem s = tank1();
    CHECK_THROWS_AS(s.evaluate(Eigen::VectorXd(2), Eigen::VectorXd(2)), DimensionError);
    CHECK_THROWS_AS(s.evaluate(Eigen::VectorXd::Zero(1), Eigen::VectorXd(1)), DimensionError);

    OpenSystem bad(
        TypedFiniteSet({{"s", {1}}}), BoxInterface{},
        [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
            return Eigen::VectorXd::Constant(1, std::nan(""));
        },
        [](const Eigen::VectorXd&) { return Eigen::VectorXd(0); });
    CHECK_THROWS_AS(bad.evaluate(Eigen::VectorXd::Zero(1), Eigen::VectorXd(0)), NumericError);
}

TEST_CASE("wiring application requires the matching box") {
    CHECK_THROWS_AS(apply_wiring(identity(kX1), tank2()), InterfaceError);
    CHECK_THROWS_AS(apply_operadic(tank_wiring(), {tank1()}), InterfaceError);
}

TEST_CASE("operadic special cases") {
    SECTION("a single box wired straight through is unchanged pointwise") {
        OperadicWiring id1 = OperadicWiring::from_wires(
            {kX1}, {"f"}, kX1,
            {{{"f", "a"}, {"", "a"}},
             {{"f", "b"}, {"", "b"}},
             {{"", "c"}, {"f", "c"}}});
        OpenSystem sys = tank1();
        OpenSystem wrapped = apply_operadic(id1, {sys});
        support::Rng rng(71);
        for (int i = 0; i < 20; ++i) {
            Eigen::VectorXd s = support::random_vector(rng, 1);
            Eigen::VectorXd u = support::random_vector(rng, 2);
            auto [d1, o1] = sys.evaluate(s, u);
            auto [d2, o2] = wrapped.evaluate(s, u);
            CHECK(support::rel_diff(d1, d2) == 0.0);
            CHECK(support::rel_diff(o1, o2) == 0.0);
        }
    }
    SECTION("no boxes onto the closed box gives the empty autonomous system") {
        OperadicWiring op0 = OperadicWiring::from_wires({}, {}, BoxInterface{}, {});
        OpenSystem sys = apply_operadic(op0, {});
        CHECK(sys.state_dim() == 0);
        auto [d, o] = sys.evaluate(Eigen::VectorXd(0), Eigen::VectorXd(0));
        CHECK(d.size() == 0);
        CHECK(o.size() == 0);
    }
}

TEST_CASE("product with the empty system leaves slices unchanged") {
    OpenSystem empty(TypedFiniteSet{}, BoxInterface{},
                     [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
                         return Eigen::VectorXd(0);
                     },
                     [](const Eigen::VectorXd&) { return Eigen::VectorXd(0); });
    OpenSystem sys = tank2();
    OpenSystem p = product(sys, empty);
    CHECK(p.state_dim() == sys.state_dim());
    CHECK(p.box() == sys.box());
    support::Rng rng(72);
    for (int i = 0; i < 20; ++i) {
        Eigen::VectorXd s = support::random_vector(rng, 1);
        Eigen::VectorXd u = support::random_vector(rng, 2);
        auto [d1, o1] = sys.evaluate(s, u);
        auto [d2, o2] = p.evaluate(s, u);
        CHECK(support::rel_diff(d1, d2) == 0.0);
        CHECK(support::rel_diff(o1, o2) == 0.0);
    }
}

TEST_CASE("zero-state systems evaluate with empty derivatives") {
    BoxInterface passbox{TypedFiniteSet{}, TypedFiniteSet({{"y", {1}}})};
    OpenSystem constant(TypedFiniteSet{}, passbox,
                        [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
                            return Eigen::VectorXd(0);
                        },
                        [](const Eigen::VectorXd&) {
                            return Eigen::VectorXd::Constant(1, 7.0);
                        });
    auto [d, o] = constant.evaluate(Eigen::VectorXd(0), Eigen::VectorXd(0));
    CHECK(d.size() == 0);
    REQUIRE(o.size() == 1);
    CHECK(o[0] == 7.0);
}
