#include <doctest.h>

#include <cmath>
#include <vector>

#include "gridcascade/kernels.hpp"
#include "gridcascade/netmodel.hpp"

using namespace gridcascade;

namespace {

std::vector<double> random_vector(SeededUniform& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.next(-1.0, 1.0);
    return v;
}

void check_table(const kernels::KernelTable& t) {
    const kernels::KernelTable& ref = kernels::scalar_table();
    SeededUniform rng(5);
    for (std::size_t n = 0; n <= 37; ++n) {
        const std::vector<double> x = random_vector(rng, n);
        const std::vector<double> y = random_vector(rng, n);
        CHECK(std::abs(t.dot(x.data(), y.data(), n) - ref.dot(x.data(), y.data(), n)) <= 1e-13);

        std::vector<double> a1 = y;
        std::vector<double> a2 = y;
        t.axpy(0.7, x.data(), a1.data(), n);
        ref.axpy(0.7, x.data(), a2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(a1[i] - a2[i]) <= 1e-15);

        const std::size_t rows = 1 + n % 7;
        const std::vector<double> m = random_vector(rng, rows * n);
        std::vector<double> g1(rows);
        std::vector<double> g2(rows);
        t.gemv(m.data(), rows, n, x.data(), g1.data());
        ref.gemv(m.data(), rows, n, x.data(), g2.data());
        for (std::size_t i = 0; i < rows; ++i) CHECK(std::abs(g1[i] - g2[i]) <= 1e-13);

        const std::vector<double> z = random_vector(rng, rows);
        std::vector<double> h1(n);
        std::vector<double> h2(n);
        t.gemv_t(m.data(), rows, n, z.data(), h1.data());
        ref.gemv_t(m.data(), rows, n, z.data(), h2.data());
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(h1[i] - h2[i]) <= 1e-13);
    }
}

}  // namespace

TEST_CASE("scalar kernels on known values") {
    const kernels::KernelTable& t = kernels::scalar_table();
    const std::vector<double> x = {1.0, 2.0, 3.0};
    const std::vector<double> y = {4.0, -5.0, 6.0};
    CHECK(t.dot(x.data(), y.data(), 3) == 12.0);
    const std::vector<double> m = {1.0, 0.0, 2.0, 0.0, 1.0, -1.0};
    std::vector<double> out(2);
    t.gemv(m.data(), 2, 3, x.data(), out.data());
    CHECK(out == std::vector<double>{7.0, -1.0});
    std::vector<double> back(3);
    t.gemv_t(m.data(), 2, 3, std::vector<double>{1.0, 2.0}.data(), back.data());
    CHECK(back == std::vector<double>{1.0, 2.0, 0.0});
}

TEST_CASE("scalar table is self-consistent") { check_table(kernels::scalar_table()); }

TEST_CASE("avx2 matches the scalar reference") {
    const kernels::KernelTable* t = kernels::avx2_table();
    if (t == nullptr) {
        MESSAGE("AVX2 kernels unavailable on this machine");
        return;
    }
    check_table(*t);
}

TEST_CASE("table selection") {
    const std::string_view before = kernels::active().name;
    CHECK(kernels::select("scalar"));
    CHECK(kernels::active().name == "scalar");
    CHECK_FALSE(kernels::select("nonsense"));
    CHECK(kernels::select(before));
}
