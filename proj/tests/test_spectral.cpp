#include <doctest.h>

#include <algorithm>

#include "commutators.hpp"
#include "models.hpp"
#include "mourre.hpp"
#include "spectral.hpp"

using namespace tempo;

namespace {

std::vector<double> kappa_of(const OperatorPair& pair) {
    DerivedOperators der;
    if (!pair.exact) der = commutator_chain(pair, 2, false);
    auto js = joint_spectral(pair, pair.exact ? nullptr : &der, true, 7);
    auto k = kappa_estimate(js, layout_of(js, pair.d()));
    std::vector<double> out;
    for (const auto& p : k.points) out.push_back(p.lambda);
    std::sort(out.begin(), out.end());
    return out;
}

void check_set(const std::vector<double>& got, const std::vector<double>& expect, double delta) {
    REQUIRE(got.size() == expect.size());
    for (size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - expect[i]) <= delta);
}

}  // namespace

TEST_CASE("critical sets of small models") {
    check_set(kappa_of(build_convolution_zd(two_cos(128))), {-2.0, 2.0}, 0.05);
    check_set(kappa_of(build_convolution_zd(square_lattice(16))), {-4.0, 0.0, 4.0}, 0.1);
    check_set(kappa_of(build_model("friedrichs", {{"N", "64"}, {"L", "32"}})), {}, 0.0);
    check_set(kappa_of(build_jacobi_laguerre(96)), {0.0}, 2.0);
}

TEST_CASE("grouping keeps the smallest velocity of each cluster") {
    auto g = group_critical({{1.0, 0.3}, {1.01, 0.1}, {3.0, 0.2}}, 0.05);
    REQUIRE(g.size() == 2);
    CHECK(g[0].lambda == 1.01);
    CHECK(g[0].hprime_sq_min == 0.1);
    CHECK(g[1].lambda == 3.0);
}

TEST_CASE("commutator identity and a window away from the critical set") {
    auto pair = build_jacobi_laguerre(128);
    auto der = commutator_chain(pair, 2, false);
    auto cd = build_conjugate(pair, der);
    CHECK(check_commutator_identity(pair, cd).residual < 1e-8);
    auto js = joint_spectral(pair, &der, true, 3);
    auto lay = layout_of(js, 1);
    auto w = mourre_window(cd, js, lay, js.table(js.size() / 3, lay.h), 0.5);
    CHECK(w.pass);
    CHECK(w.a_measured > 0.0);
}

TEST_CASE("kernel split of the graph model has the expected dimension") {
    auto pair = build_adjacency(layered_graph({1, 2}, -16, 15, true, M_PI / 2));
    auto der = commutator_chain(pair, 2, false);
    auto js = joint_spectral(pair, &der, true, 1);
    auto split = kernel_split(js, layout_of(js, 1));
    CHECK(split.K_basis.cols() == 16);
    auto red = reduced_pair(pair, split);
    CHECK(red.h_offblock < 1e-10);
}
