#include "shooting.hpp"

#include "kernel.hpp"
#include "rng.hpp"

#include "doctest.h"

#include <cmath>

using namespace actigeo;

namespace {
Points random_points(Rng& rng, int n, double span = 1.0) {
    Points p(n, 2);
    for (int i = 0; i < n; ++i) {
        p(i, 0) = span * (2.0 * rng.uniform() - 1.0);
        p(i, 1) = span * (2.0 * rng.uniform() - 1.0);
    }
    return p;
}

Points random_momenta(Rng& rng, int n, double scale) {
    Points p(n, 2);
    for (int i = 0; i < n; ++i) {
        p(i, 0) = scale * rng.normal();
        p(i, 1) = scale * rng.normal();
    }
    return p;
}
}  // namespace

TEST_CASE("hamiltonian closed forms") {
    SUBCASE("zero momenta") {
        Rng rng(3);
        const Points q = random_points(rng, 6);
        CHECK(hamiltonian(q, Points::Zero(6, 2), 0.2) == 0.0);
    }
    SUBCASE("single point with unit momentum") {
        Points q(1, 2), p(1, 2);
        q << 0.2, -0.5;
        p << 1.0, 0.0;
        CHECK(hamiltonian(q, p, 0.2) == doctest::Approx(0.5));
    }
    SUBCASE("two coincident points, equal unit momenta") {
        Points q(2, 2), p(2, 2);
        q << 0.1, 0.1, 0.1, 0.1;
        p << 1.0, 0.0, 1.0, 0.0;
        // all four kernel values are 1 and all momentum dot products 1
        CHECK(hamiltonian(q, p, 0.3) == doctest::Approx(2.0));
    }
}

TEST_CASE("geodesic integration") {
    SUBCASE("zero momenta give the identity flow") {
        Rng rng(17);
        const Points q0 = random_points(rng, 9);
        const GeodesicPath path =
            integrate_geodesic({q0, Points::Zero(9, 2)}, 11, 0.2);
        for (const GeodesicStep& s : path.steps) {
            CHECK((s.q - q0).cwiseAbs().maxCoeff() == 0.0);
        }
    }

    SUBCASE("single landmark travels in a straight line") {
        Points q0(1, 2), p0(1, 2);
        q0 << -0.3, 0.2;
        p0 << 0.4, -0.25;
        const GeodesicPath path = integrate_geodesic({q0, p0}, 11, 0.2);
        // self-interaction force vanishes, so p stays constant and
        // q(1) = q0 + p0 exactly
        CHECK(path.steps.back().q(0, 0) ==
              doctest::Approx(q0(0, 0) + p0(0, 0)).epsilon(1e-14));
        CHECK(path.steps.back().q(0, 1) ==
              doctest::Approx(q0(0, 1) + p0(0, 1)).epsilon(1e-14));
        CHECK((path.steps.back().p - p0).cwiseAbs().maxCoeff() < 1e-14);
    }

    SUBCASE("11 steps track a 200-step reference") {
        Rng rng(29);
        const Points q0 = random_points(rng, 20);
        const Points p0 = random_momenta(rng, 20, 0.05);
        const GeodesicPath coarse = integrate_geodesic({q0, p0}, 11, 0.2);
        const GeodesicPath fine = integrate_geodesic({q0, p0}, 200, 0.2);
        CHECK((coarse.steps.back().q - fine.steps.back().q)
                  .cwiseAbs()
                  .maxCoeff() < 1e-4);
    }

    SUBCASE("blow-up is reported with the failing step") {
        Points q0(2, 2), p0(2, 2);
        q0 << 0.0, 0.0, 0.01, 0.0;
        p0 << 5e4, 0.0, -5e4, 0.0;
        CHECK_THROWS_WITH_AS(integrate_geodesic({q0, p0}, 11, 0.2),
                             doctest::Contains("step"), Error);
    }
}

TEST_CASE("energy conservation along geodesics") {
    Rng rng(31);
    for (int rep = 0; rep < 5; ++rep) {
        const int n = 5 + static_cast<int>(rng.integer(46));
        const Points q0 = random_points(rng, n);
        const Points p0 = random_momenta(rng, n, 0.05);
        const double h0 = hamiltonian(q0, p0, 0.2);
        const GeodesicPath path = integrate_geodesic({q0, p0}, 11, 0.2);
        double drift = 0.0;
        for (const GeodesicStep& s : path.steps) {
            drift = std::max(drift, std::abs(hamiltonian(s.q, s.p, 0.2) - h0));
        }
        CHECK(drift / std::max(h0, 1e-12) <= 1e-6);
    }
}

TEST_CASE("flow of passive points") {
    Rng rng(37);
    const Points q0 = random_points(rng, 12);
    const Points p0 = random_momenta(rng, 12, 0.06);
    const GeodesicPath path = integrate_geodesic({q0, p0}, 11, 0.2);

    SUBCASE("control points flow to the path endpoint") {
        const Points moved = flow_points(path, q0);
        CHECK((moved - path.steps.back().q).cwiseAbs().maxCoeff() < 1e-10);
    }

    SUBCASE("zero-momenta path leaves points unchanged") {
        const GeodesicPath id_path =
            integrate_geodesic({q0, Points::Zero(12, 2)}, 11, 0.2);
        const Points pts = random_points(rng, 25);
        CHECK((flow_points(id_path, pts) - pts).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("reversed geodesic transports points back") {
        const Points pts = random_points(rng, 15);
        const Points fwd = flow_points(path, pts);
        MomentaField rev{path.steps.back().q, -path.steps.back().p};
        const GeodesicPath back = integrate_geodesic(rev, 11, 0.2);
        const Points returned = flow_points(back, fwd);
        CHECK((returned - pts).cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("small-momenta flow is linear in the field") {
    // displacement for eps * p0 equals eps * v0 + O(eps^2): the Richardson
    // ratio between eps and eps/2 errors approaches 4
    Rng rng(41);
    const Points q0 = random_points(rng, 10);
    const Points p0 = random_momenta(rng, 10, 0.3);
    const Points targets = random_points(rng, 8);
    const Points v0 = eval_vector_field(targets, q0, p0, 0.2);

    const auto displacement_error = [&](double eps) {
        const GeodesicPath path = integrate_geodesic({q0, eps * p0}, 11, 0.2);
        const Points moved = flow_points(path, targets);
        return ((moved - targets) / eps - v0).cwiseAbs().maxCoeff();
    };
    const double e1 = displacement_error(2e-3);
    const double e2 = displacement_error(1e-3);
    CHECK(e1 / e2 > 1.6);  // first-order term cancels, remainder is O(eps)
    CHECK(e2 < 1e-3);
}

TEST_CASE("path serializes to json") {
    Rng rng(43);
    const Points q0 = random_points(rng, 4);
    const Points p0 = random_momenta(rng, 4, 0.05);
    const GeodesicPath path = integrate_geodesic({q0, p0}, 5, 0.2);
    const nlohmann::json j = path_to_json(path);
    CHECK(j.at("n_steps") == 5);
    CHECK(j.at("steps").size() == 6);
    CHECK(j.at("steps")[0].at("q").size() == 4);
    CHECK(j.at("steps")[0].at("q")[0][0].get<double>() ==
          doctest::Approx(q0(0, 0)));
}
