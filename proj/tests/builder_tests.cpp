#include <catch2/catch_amalgamated.hpp>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "wiredyn/builder.hpp"

using namespace wiredyn;

namespace {

SystemDocument load_fixture() {
    std::ifstream in(std::string(WIREDYN_FIXTURE_DIR) + "/tanks.wd");
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    ParseResult r = parse_document(buf.str(), "tanks.wd");
    REQUIRE(r.ok());
    return r.document;
}

// Two expression-defined systems feeding each other under an outer box.
const char* kNonlinearText = R"(box P {
  in u : 1
  out y : 1
}

box Q {
  in a : 1
  in b : 1
  out c : 1
  out d : 1
}

box Outer {
  in w : 1
  out z : 1
}

system pend : P {
  state th : 1
  dot th = -sin(th) + 0.5*u
  out y = tanh(th)
}

system mix : Q {
  state m : 1
  dot m = -0.25*m + a*b
  out c = m^2 + 0.125
  out d = 0.5*m
}

wiring loop : pend mix -> Outer {
  pend.u -> mix.c
  mix.a -> pend.y
  mix.b -> Outer.w
  Outer.z -> mix.d
}
)";

} // namespace

TEST_CASE("linear document flattening matches the in-memory path") {
    SystemDocument doc = load_fixture();
    const WiringDecl* w = doc.find_wiring("pipes");
    REQUIRE(w);
    REQUIRE(all_linear(doc, *w));
    LinearOpenSystem flat = flatten_linear(doc, *w);
    Eigen::MatrixXd a(2, 2), b(2, 2), c(1, 2);
    a << -0.1, 0.075, 0.1, -0.2;
    b << 0, 1, 1, 0;
    c << 0, 0.125;
    CHECK(support::matrices_close(flat.A, a, 1e-12));
    CHECK(support::matrices_close(flat.B, b, 1e-12));
    CHECK(support::matrices_close(flat.C, c, 1e-12));
}

TEST_CASE("compose emits a document whose flatten equals the direct flatten") {
    SystemDocument doc = load_fixture();
    const WiringDecl* w = doc.find_wiring("pipes");
    SystemDocument out = compose_document(doc, *w);

    // The emitted document must survive its own serialization.
    ParseResult r = parse_document(serialize(out), "composed");
    REQUIRE(r.ok());
    CHECK(out == r.document);

    const WiringDecl* ident = r.document.find_wiring("identity");
    REQUIRE(ident);
    LinearOpenSystem direct = flatten_linear(doc, *w);
    LinearOpenSystem via = flatten_linear(r.document, *ident);
    CHECK(support::matrices_close(direct.A, via.A, 1e-12));
    CHECK(support::matrices_close(direct.B, via.B, 1e-12));
    CHECK(support::matrices_close(direct.C, via.C, 1e-12));
}

TEST_CASE("expression systems compose symbolically") {
    ParseResult r = parse_document(kNonlinearText, "nl");
    for (const auto& d : r.diagnostics) INFO(d.format());
    REQUIRE(r.ok());
    const SystemDocument& doc = r.document;
    const WiringDecl* w = doc.find_wiring("loop");
    REQUIRE(w);
    CHECK_FALSE(all_linear(doc, *w));

    OpenSystem direct = flatten_general(doc, *w);
    SystemDocument cdoc = compose_document(doc, *w);

    // Result is still serializable and reparses to itself.
    ParseResult r2 = parse_document(serialize(cdoc), "nl2");
    for (const auto& d : r2.diagnostics) INFO(d.format());
    REQUIRE(r2.ok());
    CHECK(cdoc == r2.document);

    OpenSystem symbolic = build_general(r2.document, r2.document.systems[0]);
    REQUIRE(symbolic.state_dim() == direct.state_dim());
    support::Rng rng(55);
    for (int pt = 0; pt < 50; ++pt) {
        Eigen::VectorXd s = support::random_vector(rng, direct.state_dim());
        Eigen::VectorXd u = support::random_vector(rng, direct.input_dim());
        auto [d1, o1] = direct.evaluate(s, u);
        auto [d2, o2] = symbolic.evaluate(s, u);
        CHECK(support::rel_diff(d1, d2) <= 1e-12);
        CHECK(support::rel_diff(o1, o2) <= 1e-12);
    }
}

TEST_CASE("mixed linear and expression systems compose via expressions") {
    std::string text = std::string(kNonlinearText) +
                       R"(
system gain : P {
  state g : 1
  A = [ -1 ]
  B = [ 2 ]
  C = [ 0.5 ]
}

wiring loop2 : gain mix -> Outer {
  gain.u -> mix.c
  mix.a -> gain.y
  mix.b -> Outer.w
  Outer.z -> mix.d
}
)";
    ParseResult r = parse_document(text, "mixed");
    for (const auto& d : r.diagnostics) INFO(d.format());
    REQUIRE(r.ok());
    const WiringDecl* w = r.document.find_wiring("loop2");
    REQUIRE(w);
    CHECK_FALSE(all_linear(r.document, *w));

    OpenSystem direct = flatten_general(r.document, *w);
    SystemDocument cdoc = compose_document(r.document, *w);
    REQUIRE_FALSE(cdoc.systems[0].is_linear());
    OpenSystem symbolic = build_general(cdoc, cdoc.systems[0]);
    support::Rng rng(56);
    for (int pt = 0; pt < 30; ++pt) {
        Eigen::VectorXd s = support::random_vector(rng, direct.state_dim());
        Eigen::VectorXd u = support::random_vector(rng, direct.input_dim());
        auto [d1, o1] = direct.evaluate(s, u);
        auto [d2, o2] = symbolic.evaluate(s, u);
        CHECK(support::rel_diff(d1, d2) <= 1e-12);
        CHECK(support::rel_diff(o1, o2) <= 1e-12);
    }
}

TEST_CASE("the simulate block builds a runnable setup") {
    SystemDocument doc = load_fixture();
    SimSetup setup = build_simulation(doc);
    CHECK(setup.cfg.t1 == 200.0);
    CHECK(setup.cfg.dt == 0.01);
    CHECK(setup.cfg.method == Method::RK4);
    CHECK(setup.x0.isZero());
    Eigen::VectorXd u = setup.inputs.sample(0.0);
    REQUIRE(u.size() == 2);
    CHECK(u[0] == 3.0);
    CHECK(u[1] == 1.5);

    Trajectory traj = simulate(setup.system, setup.x0, setup.inputs,
                               SimConfig{0.0, 1.0, 0.01, Method::RK4});
    CHECK(traj.states.back()[0] > 0.0);
}

TEST_CASE("time-dependent directive inputs are compiled") {
    const char* text = R"(box B {
  in u : 1
  out y : 1
}
system s : B {
  state q : 1
  dot q = u - q
  out y = q
}
simulate {
  system s
  input u = sin(2*t) + 1
  t0 = 0
  t1 = 1
  dt = 0.1
  method euler
}
)";
    ParseResult r = parse_document(text, "t");
    REQUIRE(r.ok());
    SimSetup setup = build_simulation(r.document);
    CHECK(setup.cfg.method == Method::Euler);
    CHECK(setup.inputs.sample(0.0)[0] == 1.0);
    CHECK(std::abs(setup.inputs.sample(0.25)[0] - (std::sin(0.5) + 1.0)) <= 1e-15);
}

TEST_CASE("x0 and input names are checked") {
    SystemDocument doc = load_fixture();
    doc.directive->x0.emplace_back("nope", 1.0);
    CHECK_THROWS_AS(build_simulation(doc), Error);
    SystemDocument doc2 = load_fixture();
    doc2.directive->inputs.emplace_back("Y.zz", Expr::make_number(1));
    CHECK_THROWS_AS(build_simulation(doc2), Error);
}
