#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "irid/math/rng.hpp"
#include "irid/math/vec3.hpp"

using namespace irid;

TEST_CASE("vec3 algebra") {
    Vec3 a{1.f, 2.f, 3.f}, b{-2.f, 0.5f, 4.f};
    CHECK(dot(a, b) == doctest::Approx(-2.f + 1.f + 12.f));
    Vec3 c = cross(Vec3{1, 0, 0}, Vec3{0, 1, 0});
    CHECK(c.x == 0.f);
    CHECK(c.y == 0.f);
    CHECK(c.z == 1.f);
    CHECK(length(normalize(a)) == doctest::Approx(1.f));
    Vec3 r = reflect(Vec3{0, 0, 1}, normalize(Vec3{0, 1, 1}));
    CHECK(r.x == doctest::Approx(0.f));
    CHECK(r.y == doctest::Approx(1.f).epsilon(1e-6));
    CHECK(r.z == doctest::Approx(0.f).epsilon(1e-6));
}

TEST_CASE("orthonormal basis is orthonormal and right-handed") {
    Pcg32 rng(7);
    for (int i = 0; i < 100; ++i) {
        Vec3 n = normalize(Vec3{rng.next_float() * 2 - 1, rng.next_float() * 2 - 1,
                                rng.next_float() * 2 - 1});
        Vec3 t, b;
        orthonormal_basis(n, t, b);
        CHECK(std::fabs(dot(t, b)) < 1e-6f);
        CHECK(std::fabs(dot(t, n)) < 1e-6f);
        CHECK(std::fabs(dot(b, n)) < 1e-6f);
        CHECK(length(t) == doctest::Approx(1.f).epsilon(1e-5));
        CHECK(dot(cross(t, b), n) == doctest::Approx(1.f).epsilon(1e-5));
    }
}

TEST_CASE("pcg32 determinism and stream independence") {
    Pcg32 a(42, 1), b(42, 1), c(42, 2);
    for (int i = 0; i < 16; ++i) CHECK(a.next_u32() == b.next_u32());
    bool any_diff = false;
    Pcg32 a2(42, 1);
    for (int i = 0; i < 16; ++i) any_diff |= (a2.next_u32() != c.next_u32());
    CHECK(any_diff);
}

TEST_CASE("pcg32 uniform range and bounded draws") {
    Pcg32 rng(3);
    for (int i = 0; i < 10000; ++i) {
        float u = rng.next_float();
        CHECK(u >= 0.f);
        CHECK(u < 1.f);
    }
    for (int i = 0; i < 10000; ++i) CHECK(rng.next_below(7) < 7);
    double d = 0;
    Pcg32 r2(9);
    for (int i = 0; i < 10000; ++i) d += r2.next_double();
    CHECK(d / 10000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("gaussian draws have unit moments") {
    Pcg32 rng(11);
    const int n = 200000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double z = rng.next_gaussian();
        sum += z;
        sum2 += z * z;
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(0.02));
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("mix64 spreads consecutive ids") {
    CHECK(mix64(1) != mix64(2));
    CHECK((mix64(1) ^ mix64(2)) > 0xFFFFFFFFull);  // differ in high bits too
}
