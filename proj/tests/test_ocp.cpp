#include "catch2/catch_amalgamated.hpp"

#include "bandpinv/ocp.hpp"
#include "bandpinv/saddle.hpp"

#include <cmath>

using namespace bandpinv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

OcpScenario scalar_scenario(double lambda, double b, double c, double T) {
    OcpScenario sc;
    sc.Lambda = Eigen::MatrixXd::Constant(1, 1, lambda);
    sc.B = Eigen::MatrixXd::Constant(1, 1, b);
    sc.C = Eigen::MatrixXd::Constant(1, 1, c);
    sc.T = T;
    sc.sbar = Eigen::VectorXd::Zero(1);
    sc.lambdabar = Eigen::VectorXd::Zero(1);
    return sc;
}

/// The well-conditioned benchmark: scalar dynamics 1.1, unit actuation and
/// observation, horizon 10, with a verified closed-loop certificate.
OcpScenario regular_scenario() {
    OcpScenario sc = scalar_scenario(1.1, 1.0, 1.0, 10.0);
    StabilityCert cert;
    cert.K_stab = Eigen::MatrixXd::Constant(1, 1, 2.1);
    cert.K_det = Eigen::MatrixXd::Constant(1, 1, 2.1);
    cert.L = 2.1;
    cert.alpha = 1.0;
    sc.cert = cert;
    return sc;
}

} // namespace

TEST_CASE("TimeSignal kinds evaluate, integrate, and report support") {
    TimeSignal zero;
    CHECK(zero.at(3.0, 2).norm() == 0.0);
    CHECK(zero.sq_mass(0.0, 10.0, 2) == 0.0);

    TimeSignal c;
    c.kind = TimeSignal::Kind::constant;
    c.value = Eigen::VectorXd::Constant(2, 3.0);
    CHECK(c.at(5.0, 2)(0) == 3.0);
    CHECK_THAT(c.sq_mass(0.0, 2.0, 2), WithinRel(36.0, 1e-14)); // ||(3,3)||^2 * 2
    CHECK(c.support(10.0) == std::pair<double, double>{0.0, 10.0});

    TimeSignal ind;
    ind.kind = TimeSignal::Kind::indicator;
    ind.lo = 4.0;
    ind.hi = 6.0;
    CHECK(ind.at(4.0, 1)(0) == 1.0); // closed interval
    CHECK(ind.at(6.0, 1)(0) == 1.0);
    CHECK(ind.at(3.999, 1).norm() == 0.0);
    CHECK(ind.at(6.001, 1).norm() == 0.0);
    CHECK_THAT(ind.sq_mass(0.0, 10.0, 1), WithinRel(2.0, 1e-14));
    CHECK_THAT(ind.sq_mass(5.0, 10.0, 1), WithinRel(1.0, 1e-14));
    CHECK(ind.sq_mass(7.0, 10.0, 1) == 0.0);
    CHECK(ind.support(10.0) == std::pair<double, double>{4.0, 6.0});

    TimeSignal bad;
    bad.kind = TimeSignal::Kind::constant;
    bad.value = Eigen::VectorXd::Ones(2);
    CHECK_THROWS_AS(bad.at(0.0, 3), std::invalid_argument);
}

TEST_CASE("dtilde closed-form spot values") {
    // L=1, alpha=1: 3*sqrt(5) + 9
    CHECK_THAT(dtilde(1.0, 1.0), WithinRel(3.0 * std::sqrt(5.0) + 9.0, 1e-14));
    // alpha=2 shrinks both terms by 1/4 (and the root changes)
    CHECK_THAT(dtilde(1.0, 2.0), WithinRel(3.0 * std::sqrt(8.0) / 4.0 + 9.0 / 4.0, 1e-14));
    CHECK_THAT(dtilde(1.0, 2.0), WithinRel(4.371320343559642, 1e-12));
    // the decay exponent this feeds
    CHECK_THAT(1.0 / (4.0 * dtilde(1.0, 1.0)), WithinRel(0.015915, 1e-4));
    // the benchmark certificate constant
    CHECK_THAT(dtilde(2.1, 1.0), WithinRel(336.585, 1e-3));
    CHECK_THROWS_AS(dtilde(0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(dtilde(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("h_norm is the mesh-weighted Euclidean norm") {
    CHECK_THAT(h_norm(Eigen::VectorXd::Ones(4), 0.25), WithinRel(1.0, 1e-14));
    CHECK(h_norm(Eigen::VectorXd::Zero(5), 0.1) == 0.0);
    CHECK_THROWS_AS(h_norm(Eigen::VectorXd::Ones(2), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(h_norm(Eigen::VectorXd::Ones(2), -1.0), std::invalid_argument);
}

TEST_CASE("h_norm squared converges to the integral for a sampled function") {
    // f(t) = t on [0,1]: integral of f^2 is 1/3
    double prev_err = 1.0;
    for (int N : {10, 100, 1000}) {
        const double h = 1.0 / N;
        Eigen::VectorXd v(N);
        for (int k = 1; k <= N; ++k) v(k - 1) = h * k;
        const double val = h_norm(v, h);
        const double err = std::abs(val * val - 1.0 / 3.0);
        CHECK(err < prev_err);
        prev_err = err;
    }
    CHECK(prev_err < 1e-3);
}

TEST_CASE("check_stability_cert accepts the benchmark certificate") {
    const auto sc = regular_scenario();
    CHECK(check_stability_cert(sc).empty());
}

TEST_CASE("check_stability_cert reports norm caps and decay failures") {
    auto sc = regular_scenario();
    sc.cert->L = 1.05; // below ||Lambda|| = 1.1 and the closed-loop transient
    const auto issues = check_stability_cert(sc);
    CHECK_FALSE(issues.empty());

    auto unstable = regular_scenario();
    unstable.cert->K_stab = Eigen::MatrixXd::Zero(1, 1); // open loop grows like e^{1.1 t}
    const auto bad = check_stability_cert(unstable);
    REQUIRE_FALSE(bad.empty());
    bool mentions_decay = false;
    for (const auto& s : bad)
        if (s.find("decay") != std::string::npos) mentions_decay = true;
    CHECK(mentions_decay);

    OcpScenario no_cert = scalar_scenario(1.1, 1.0, 1.0, 10.0);
    const auto missing = check_stability_cert(no_cert);
    REQUIRE(missing.size() == 1);
    CHECK(missing[0].find("no certificate") != std::string::npos);
}

TEST_CASE("scenario validation catches dimension mismatches") {
    OcpScenario sc = scalar_scenario(1.1, 1.0, 1.0, 10.0);
    sc.sbar = Eigen::VectorXd::Ones(2);
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc = scalar_scenario(1.1, 1.0, 1.0, -1.0);
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc = scalar_scenario(1.1, 1.0, 1.0, 10.0);
    sc.B = Eigen::MatrixXd::Ones(2, 1);
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
}

TEST_CASE("the smallest discretization is 8x8 and one-step banded") {
    OcpScenario sc = regular_scenario();
    DiscretizedOcp ocp(sc, 2);
    CHECK(ocp.dimension() == 8); // 3 state + 2 control + 3 adjoint blocks
    CHECK(ocp.H().rows() == 8);
    const auto banded = ocp.banded();
    CHECK(*banded.certified_bandwidth == ocp.h());
    CHECK_THROWS_AS(DiscretizedOcp(sc, 1), std::invalid_argument);
}

TEST_CASE("assembly places the benchmark coefficients and scaled boundary rows") {
    OcpScenario sc = regular_scenario();
    sc.sbar = Eigen::VectorXd::Constant(1, 0.7);
    sc.lambdabar = Eigen::VectorXd::Constant(1, -0.4);
    const int N = 10;
    DiscretizedOcp ocp(sc, N);
    const double h = 1.0; // T=10, N=10
    CHECK(ocp.h() == h);
    const Eigen::MatrixXd& H = ocp.H();
    // output weighting on each state diagonal except the terminal node
    CHECK(H(ocp.s_offset(0), ocp.s_offset(0)) == 1.0);
    CHECK(H(ocp.s_offset(N), ocp.s_offset(N)) == 0.0);
    // identity on the control diagonal
    CHECK(H(ocp.u_offset(3), ocp.u_offset(3)) == 1.0);
    // dynamics coupling -1/h - Lambda on the subdiagonal state block
    CHECK_THAT(H(ocp.l_offset(4), ocp.s_offset(3)), WithinRel(-1.0 / h - 1.1, 1e-14));
    CHECK_THAT(H(ocp.l_offset(4), ocp.s_offset(4)), WithinRel(1.0 / h, 1e-14));
    CHECK_THAT(H(ocp.l_offset(4), ocp.u_offset(3)), WithinRel(-1.0, 1e-14));
    // boundary rows are scaled by 1/h: data vector starts rows with sbar/h
    // at the first adjoint slot and ends the state rows with lambdabar/h
    CHECK_THAT(ocp.p()(ocp.l_offset(0)), WithinRel(0.7 / h, 1e-14));
    CHECK_THAT(ocp.p()(ocp.s_offset(N)), WithinRel(-0.4 / h, 1e-14));
}

TEST_CASE("H is exactly symmetric and exactly one-step banded") {
    for (double lambda : {1.1, -0.5}) {
        OcpScenario sc = scalar_scenario(lambda, 1.0, 1.0, 10.0);
        sc.sbar = Eigen::VectorXd::Ones(1);
        sc.q.kind = TimeSignal::Kind::indicator;
        sc.q.lo = 4.0;
        sc.q.hi = 6.0;
        DiscretizedOcp ocp(sc, 16);
        CHECK((ocp.H() - ocp.H().transpose()).cwiseAbs().maxCoeff() == 0.0);
        auto banded = ocp.banded();
        CHECK(*banded.certified_bandwidth == ocp.h());
    }
}

TEST_CASE("the saddle assembly of the primal and constraint blocks reproduces H") {
    OcpScenario sc = regular_scenario();
    DiscretizedOcp ocp(sc, 12);
    const auto sys = assemble_saddle(ocp.primal_block(), ocp.constraint_block());
    CHECK((sys.A - ocp.H()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the primal block's top eigenvalue is capped by the output weight") {
    OcpScenario sc = regular_scenario();
    DiscretizedOcp ocp(sc, 12);
    const auto th = estimate_thetas(ocp.primal_block(), ocp.constraint_block());
    const double c_norm2 = spectral_norm(sc.C);
    CHECK(th.theta1 <= std::max(c_norm2 * c_norm2, 1.0) + 1e-12);
}

TEST_CASE("the certified singular interval of the saddle split encloses the spectrum of H") {
    OcpScenario sc = regular_scenario();
    DiscretizedOcp ocp(sc, 20);
    const auto th = estimate_thetas(ocp.primal_block(), ocp.constraint_block());
    const auto iv = singular_interval(th);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(ocp.H());
    const Eigen::VectorXd sv = svd.singularValues();
    CHECK(sv(0) <= iv.hi * (1.0 + 1e-9));
    CHECK(sv(sv.size() - 1) >= iv.lo * (1.0 - 1e-9));
}

TEST_CASE("all-zero data solves to the zero profile") {
    OcpScenario sc = scalar_scenario(1.1, 1.0, 1.0, 10.0);
    DiscretizedOcp ocp(sc, 20);
    const auto prof = solve(ocp);
    CHECK(prof.z.norm() == 0.0);
    for (double v : prof.s_norms) CHECK(v == 0.0);
    for (double v : prof.u_norms) CHECK(v == 0.0);
    for (double v : prof.lambda_norms) CHECK(v == 0.0);
}

TEST_CASE("the boundary-driven benchmark solves tightly and decays away from the ends") {
    OcpScenario sc = regular_scenario();
    sc.sbar = Eigen::VectorXd::Ones(1);
    sc.lambdabar = Eigen::VectorXd::Ones(1);
    const int N = 200;
    DiscretizedOcp ocp(sc, N);
    const auto prof = solve(ocp);
    CHECK(prof.residual_rel <= 1e-9);
    REQUIRE(prof.s_norms.size() == static_cast<std::size_t>(N) + 1);
    // the state decays moving inward from t = 0 ...
    CHECK(prof.s_norms[N / 2] < 0.05 * prof.s_norms[0]);
    CHECK(prof.s_norms[N / 10] < prof.s_norms[0]);
    CHECK(prof.s_norms[N / 4] < prof.s_norms[N / 10]);
    // ... and the adjoint decays moving inward from t = T
    CHECK(prof.lambda_norms[N / 2] < 0.05 * prof.lambda_norms[N]);
}

TEST_CASE("the banded elimination agrees with the dense factorization") {
    OcpScenario sc = regular_scenario();
    sc.sbar = Eigen::VectorXd::Ones(1);
    sc.lambdabar = Eigen::VectorXd::Constant(1, 0.5);
    sc.d.kind = TimeSignal::Kind::indicator;
    sc.d.lo = 4.0;
    sc.d.hi = 6.0;
    DiscretizedOcp ocp(sc, 60);
    SolveOptions banded;
    banded.method = SolveMethod::banded;
    SolveOptions dense;
    dense.method = SolveMethod::dense;
    const auto zb = solve(ocp, banded);
    const auto zd = solve(ocp, dense);
    CHECK(std::string(zb.method_used) == "banded");
    CHECK(std::string(zd.method_used) == "dense");
    CHECK((zb.z - zd.z).norm() <= 1e-8 * zd.z.norm());
}

TEST_CASE("a numerically singular system is reported with its smallest singular value") {
    // An explosive uncontrolled, unobserved mode makes H invertible only in
    // exact arithmetic; the solver must refuse rather than return garbage.
    OcpScenario sc = scalar_scenario(30.0, 0.0, 0.0, 10.0);
    sc.sbar = Eigen::VectorXd::Ones(1);
    sc.lambdabar = Eigen::VectorXd::Ones(1);
    DiscretizedOcp ocp(sc, 64);
    CHECK_THROWS_WITH(solve(ocp), Catch::Matchers::ContainsSubstring("singular"));
}

TEST_CASE("stability sweep is non-diverging and within twice the certified constant") {
    const auto sc = regular_scenario();
    const auto rows = stability_sweep(sc, {50, 100, 200});
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 1; i < rows.size(); ++i)
        CHECK(rows[i].norm_Hinv <= rows[i - 1].norm_Hinv * 1.1);
    const double dt = dtilde(2.1, 1.0);
    for (const auto& row : rows) {
        CHECK_THAT(row.dtilde_value, WithinRel(dt, 1e-14));
        CHECK(row.within_2dtilde);
        CHECK_THAT(row.norm_Hinv, WithinRel(1.0 / row.sigma_min, 1e-12));
    }
}

TEST_CASE("a trivially stable scenario meets the certified inverse-norm cap") {
    OcpScenario sc = scalar_scenario(-1.0, 1.0, 1.0, 10.0);
    StabilityCert cert;
    cert.K_stab = Eigen::MatrixXd::Zero(1, 1);
    cert.K_det = Eigen::MatrixXd::Zero(1, 1);
    cert.L = 1.0;
    cert.alpha = 1.0;
    sc.cert = cert;
    REQUIRE(check_stability_cert(sc).empty());
    const auto rows = stability_sweep(sc, {40, 80});
    for (const auto& row : rows) CHECK(row.norm_Hinv <= 2.0 * dtilde(1.0, 1.0));
}

TEST_CASE("consistency residuals decrease under mesh refinement") {
    auto sc = regular_scenario();
    sc.sbar = Eigen::VectorXd::Ones(1);
    sc.lambdabar = Eigen::VectorXd::Ones(1);
    const auto rows = consistency_sweep(sc, {20, 40, 80}, 320);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].residual_hnorm < rows[0].residual_hnorm);
    CHECK(rows[2].residual_hnorm < rows[1].residual_hnorm);
    CHECK_THROWS_AS(consistency_sweep(sc, {30}, 320), std::invalid_argument);
}

TEST_CASE("consistency on a closed-form scenario is first-order accurate") {
    // With no dynamics coupling and constant forcing the exact solution is
    // linear in time, so the subsampled reference satisfies the coarse
    // equations up to roundoff: comfortably below the 3 h ||d|| allowance.
    OcpScenario sc = scalar_scenario(0.0, 0.0, 0.0, 10.0);
    sc.sbar = Eigen::VectorXd::Constant(1, 0.3);
    sc.lambdabar = Eigen::VectorXd::Constant(1, -0.2);
    sc.d.kind = TimeSignal::Kind::constant;
    sc.d.value = Eigen::VectorXd::Constant(1, 2.0);
    const auto rows = consistency_sweep(sc, {20, 40}, 160);
    for (const auto& row : rows) CHECK(row.residual_hnorm <= 3.0 * row.h * 2.0);
}

TEST_CASE("consistency on a zero-data scenario is identically zero") {
    OcpScenario sc = scalar_scenario(1.1, 1.0, 1.0, 10.0);
    const auto rows = consistency_sweep(sc, {20, 40}, 160);
    for (const auto& row : rows) CHECK(row.residual_hnorm == 0.0);
}

TEST_CASE("decay experiment bounds the interior response to boundary data") {
    auto sc = regular_scenario();
    sc.sbar = Eigen::VectorXd::Ones(1);
    sc.lambdabar = Eigen::VectorXd::Ones(1);
    const auto rows = decay_experiment(sc, 200, {{"middle", 4.0, 6.0}});
    REQUIRE(rows.size() == 1);
    CHECK(std::isfinite(rows[0].bound));
    CHECK(rows[0].response <= rows[0].bound);
    // the window sits 4 time units from either boundary: loose but certified
    const double dt = dtilde(2.1, 1.0);
    CHECK_THAT(rows[0].bound, WithinRel(8.0 * dt * 2.0 * std::exp(-4.0 / (4.0 * dt)), 1e-12));
}

TEST_CASE("decay experiment bounds the boundary response to interior sources") {
    auto sc = regular_scenario();
    for (TimeSignal* sig : {&sc.q, &sc.r, &sc.d}) {
        sig->kind = TimeSignal::Kind::indicator;
        sig->lo = 4.0;
        sig->hi = 6.0;
    }
    const auto rows = decay_experiment(sc, 200, {{"left", 0.0, 1.0}, {"src", 4.0, 6.0}});
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        CHECK(std::isfinite(row.bound));
        CHECK(row.response <= row.bound);
    }
    // the response inside the source window dominates the far-field response
    CHECK(rows[1].response > rows[0].response);
}

TEST_CASE("decay experiment without a verified certificate leaves bounds unset") {
    OcpScenario sc = scalar_scenario(1.1, 1.0, 1.0, 10.0);
    sc.sbar = Eigen::VectorXd::Ones(1);
    const auto rows = decay_experiment(sc, 50, {{"middle", 4.0, 6.0}});
    REQUIRE(rows.size() == 1);
    CHECK(std::isnan(rows[0].bound));
    CHECK(rows[0].response >= 0.0);
}

TEST_CASE("decay experiment with zero sources has zero response") {
    OcpScenario sc = scalar_scenario(1.1, 1.0, 1.0, 10.0);
    const auto rows = decay_experiment(sc, 50, {{"anywhere", 2.0, 8.0}});
    CHECK(rows[0].response == 0.0);
}

TEST_CASE("fit_decay_rate recovers an exact exponential") {
    std::vector<double> ts, ms;
    for (int k = 0; k <= 100; ++k) {
        const double t = 0.1 * k;
        ts.push_back(t);
        ms.push_back(std::exp(-2.0 * t));
    }
    const auto fit = fit_decay_rate(ts, ms, 0.0, 10.0);
    CHECK_THAT(fit.rate, WithinAbs(2.0, 1e-6));
    CHECK(fit.points == 101);
}

TEST_CASE("fit_decay_rate of a constant track is zero") {
    std::vector<double> ts, ms;
    for (int k = 0; k <= 50; ++k) {
        ts.push_back(0.2 * k);
        ms.push_back(0.7);
    }
    const auto fit = fit_decay_rate(ts, ms, 0.0, 10.0);
    CHECK_THAT(fit.rate, WithinAbs(0.0, 1e-12));
}

TEST_CASE("fit_decay_rate rejects thin windows and nonpositive magnitudes") {
    std::vector<double> ts{0, 1, 2, 3}, ms{1, 1, 1, 1};
    CHECK_THROWS_WITH(fit_decay_rate(ts, ms, 0.0, 3.0),
                      Catch::Matchers::ContainsSubstring("at least 10"));
    std::vector<double> ts2, ms2;
    for (int k = 0; k < 20; ++k) {
        ts2.push_back(k);
        ms2.push_back(k == 7 ? 0.0 : 1.0);
    }
    CHECK_THROWS_AS(fit_decay_rate(ts2, ms2, 0.0, 20.0), std::invalid_argument);
    CHECK_THROWS_AS(fit_decay_rate({0, 1}, {1, 1, 1}, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("the ill-conditioned benchmark shows growth instead of decay") {
    // Weak actuation (1e-6) and observation (1e-3) leave the unstable mode
    // essentially uncontrolled: the state grows through the window.
    OcpScenario sc = scalar_scenario(1.1, 1e-6, 1e-3, 10.0);
    sc.sbar = Eigen::VectorXd::Ones(1);
    sc.lambdabar = Eigen::VectorXd::Ones(1);
    DiscretizedOcp ocp(sc, 400);
    const auto prof = solve(ocp);
    CHECK(prof.residual_rel <= 1e-9);
    CHECK(prof.s_norms[200] / prof.s_norms[0] >= 1.0);
    const auto [wlo, whi] = boundary_fit_window(sc.T);
    const auto fit = fit_decay_rate(prof.times, prof.s_norms, wlo, whi);
    CHECK(fit.rate <= 0.0);
}

TEST_CASE("default fit windows avoid the boundary layers") {
    const auto [blo, bhi] = boundary_fit_window(10.0);
    CHECK_THAT(blo, WithinRel(1.5, 1e-14));
    CHECK_THAT(bhi, WithinRel(4.5, 1e-14));
    const auto [ilo, ihi] = interior_fit_window(10.0, 6.0);
    CHECK_THAT(ilo, WithinRel(6.5, 1e-14));
    CHECK_THAT(ihi, WithinRel(9.0, 1e-14));
    // a late source clips the window at 0.9 T
    const auto [llo, lhi] = interior_fit_window(10.0, 8.0);
    CHECK_THAT(lhi, WithinRel(9.0, 1e-14));
    CHECK(llo < lhi);
}
