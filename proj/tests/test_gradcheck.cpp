#include <doctest.h>

#include "noran/gradcheck.hpp"

using namespace noran;

TEST_CASE("relative error uses a floored denominator") {
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
    CHECK(relative_error(-1.0, 1.0) == doctest::Approx(2.0));
    // Near zero the floor keeps tiny absolute gaps small.
    CHECK(relative_error(1e-9, 0.0) == doctest::Approx(1e-7));
}

TEST_CASE("every component passes") {
    const auto results = run_gradcheck(0);
    REQUIRE(results.size() == 5);
    const char* names[] = {"tensor", "layers", "lstm", "discriminator", "loss"};
    for (std::size_t i = 0; i < 5; ++i) {
        INFO(results[i].component, " worst ", results[i].worst, " ", results[i].max_rel_error);
        CHECK(results[i].component == names[i]);
        CHECK(results[i].passed);
        CHECK(results[i].max_rel_error < 1e-4);
        CHECK(results[i].entries > 0);
    }
    const std::string table = gradcheck_table(results);
    for (const char* n : names) CHECK(table.find(n) != std::string::npos);
}

TEST_CASE("a perturbed backward rule is caught") {
    testing::set_backward_fault(1.1);
    const auto results = run_gradcheck(0);
    testing::set_backward_fault(1.0);
    bool any_failed = false;
    for (const auto& r : results) any_failed = any_failed || !r.passed;
    CHECK(any_failed);
    CHECK(results[0].component == "tensor");
    CHECK_FALSE(results[0].passed);
    CHECK(results[0].worst.rfind("pointwise:", 0) == 0);
    CHECK_FALSE(results[2].passed);
    // Restored rules pass again.
    for (const auto& r : run_gradcheck(0)) CHECK(r.passed);
}
