#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cmfda/harmonic.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cmfda;

namespace {

double max_abs_diff(const Coeffs& a, const Coeffs& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::vector<Sample> random_days(std::mt19937_64& rng, int n, const Coeffs& a, double noise = 0.0) {
    std::uniform_int_distribution<int> day(1, 366);
    std::normal_distribution<double> eps(0.0, noise > 0 ? noise : 1.0);
    std::vector<Sample> s;
    for (int i = 0; i < n; ++i) {
        const int d = day(rng);
        s.push_back({d, predict(a, d) + (noise > 0 ? eps(rng) : 0.0)});
    }
    return s;
}

// Least-squares solution through Eigen's complete orthogonal decomposition,
// independent of the normal equations.
Coeffs eigen_oracle(const std::vector<Sample>& samples) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), 5);
    Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double w = 2.0 * std::numbers::pi * samples[i].doy / 366.0;
        const auto r = static_cast<Eigen::Index>(i);
        x(r, 0) = 1.0;
        x(r, 1) = std::cos(w);
        x(r, 2) = std::sin(w);
        x(r, 3) = std::cos(2 * w);
        x(r, 4) = std::sin(2 * w);
        y(r) = samples[i].value;
    }
    const Eigen::VectorXd b = x.completeOrthogonalDecomposition().solve(y);
    return {b(0), b(1), b(2), b(3), b(4)};
}

}  // namespace

TEST_CASE("design vector") {
    const auto full = design_vector(366);
    CHECK(full[0] == 1.0);
    CHECK(full[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(full[2]) < 1e-14);
    CHECK(full[3] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(full[4]) < 1e-14);

    const auto half = design_vector(183);
    CHECK(half[1] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(std::abs(half[2]) < 1e-14);
    CHECK(half[3] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(half[4]) < 1e-14);

    const auto q = design_vector(91);
    const double w = 2.0 * std::numbers::pi * 91.0 / 366.0;
    CHECK(q[1] == doctest::Approx(std::cos(w)).epsilon(1e-15));
    CHECK(q[2] == doctest::Approx(std::sin(w)).epsilon(1e-15));
    CHECK(q[3] == doctest::Approx(std::cos(2 * w)).epsilon(1e-15));
    CHECK(q[4] == doctest::Approx(std::sin(2 * w)).epsilon(1e-15));

    CHECK_THROWS_AS(design_vector(0), Error);
    CHECK_THROWS_AS(design_vector(367), Error);
    try {
        design_vector(0);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OutOfRangeDay);
    }
}

TEST_CASE("fit recovers a constant series") {
    std::vector<Sample> s;
    for (int d = 1; d <= 366; d += 16) s.push_back({d, 0.3});
    const auto a = fit_coefficients(s);
    CHECK(max_abs_diff(a, {0.3, 0, 0, 0, 0}) < 1e-8);
}

TEST_CASE("fit recovers known coefficients and predicts") {
    const Coeffs a{0.4, 0.1, -0.05, 0.02, 0.03};
    const auto series = testsupport::make_series("p", 2003, 2004, [&](Band, Date, int doy) { return predict(a, doy); });
    const DateInterval w{Date::from_ymd(2003, 1, 1), Date::from_ymd(2004, 12, 31)};
    const auto m = fit(series, Band::NIR, w);
    CHECK(max_abs_diff(m.coeffs, a) < 1e-8);
    CHECK(m.n_obs == 46);
    CHECK(m.band == Band::NIR);
    CHECK(m.pixel_id == "p");
    CHECK(m.train_window == w);
    CHECK(predict(m, 100) == doctest::Approx(predict(a, 100)).epsilon(1e-8));

    CHECK(predict(Coeffs{0.3, 0, 0, 0, 0}, 17) == 0.3);
    CHECK(predict(Coeffs{0, 1, 0, 0, 0}, 366) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(predict(a, 0), Error);
}

TEST_CASE("insufficient and degenerate data") {
    std::vector<Sample> three{{10, 0.1}, {50, 0.2}, {90, 0.3}};
    CHECK_THROWS_AS(fit_coefficients(three), Error);
    try {
        fit_coefficients(three);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientData);
    }

    // Twenty samples on only two distinct days cannot pin five coefficients.
    std::vector<Sample> clustered;
    for (int i = 0; i < 20; ++i) clustered.push_back({i % 2 ? 100 : 200, 0.1 * i});
    try {
        fit_coefficients(clustered);
        FAIL("expected RankDeficient");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RankDeficient);
    }

    FitOptions loose;
    loose.min_obs = 5;
    std::vector<Sample> five{{10, 0.1}, {80, 0.2}, {150, 0.3}, {220, 0.1}, {300, 0.2}};
    CHECK_NOTHROW(fit_coefficients(five, loose));
}

TEST_CASE("training samples honor the window and clearness") {
    auto s = testsupport::make_series("p", 2003, 2005, testsupport::stable(), [](Date d) {
        return d.month() == 6 ? Reliability::Cloudy : Reliability::Good;
    });
    s.observations[2].set(Band::NIR, fill_value(Band::NIR));
    const DateInterval w{Date::from_ymd(2003, 1, 1), Date::from_ymd(2004, 12, 31)};
    const auto samples = training_samples(s, Band::NIR, w);
    long expected = 0;
    for (const auto& o : s.observations)
        if (w.contains(o.nominal) && o.is_clear() && o.has_value(Band::NIR)) ++expected;
    CHECK(static_cast<long>(samples.size()) == expected);
    CHECK(training_samples(s, Band::Red, w).size() == samples.size() + 1);
}

TEST_CASE("residual sign and missing values") {
    HarmonicModel m;
    m.coeffs = {0.3, 0, 0, 0, 0};
    Observation o;
    o.nominal = Date::from_ymd(2005, 1, 1);
    o.composite_doy = 1;
    o.reliability = Reliability::Good;
    o.set(Band::NIR, 0.5);
    CHECK(residual(m, o, Band::NIR) == doctest::Approx(0.2).epsilon(1e-15));
    o.set(Band::NIR, 0.3);
    CHECK(residual(m, o, Band::NIR) == 0.0);
    o.set(Band::NIR, fill_value(Band::NIR));
    try {
        residual(m, o, Band::NIR);
        FAIL("expected MissingBandValue");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingBandValue);
    }
}

TEST_CASE("residuals of a fit sum to zero over the training set") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const auto s = random_days(rng, 40, {0.3, 0.05, -0.02, 0.01, 0.0}, 0.02);
        const auto a = fit_coefficients(s);
        double sum = 0.0;
        for (const auto& x : s) sum += x.value - predict(a, x.doy);
        CHECK(std::abs(sum) < 1e-6 * static_cast<double>(s.size()));
    }
}

TEST_CASE("fit agrees with an orthogonal-decomposition oracle") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coef(-0.5, 0.5);
    for (int trial = 0; trial < 200; ++trial) {
        const Coeffs a{coef(rng), coef(rng), coef(rng), coef(rng), coef(rng)};
        const auto s = random_days(rng, 20, a, 0.05);
        CHECK(max_abs_diff(fit_coefficients(s), eigen_oracle(s)) < 1e-6);
    }
}

TEST_CASE("fit is invariant to observation order") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = random_days(rng, 30, {0.2, 0.05, 0.01, -0.02, 0.01}, 0.03);
        const auto a = fit_coefficients(s);
        std::shuffle(s.begin(), s.end(), rng);
        CHECK(max_abs_diff(a, fit_coefficients(s)) < 1e-10);
    }
}

TEST_CASE("adding a constant shifts only the intercept") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> shift(-0.5, 0.5);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = random_days(rng, 30, {0.2, 0.05, 0.01, -0.02, 0.01}, 0.03);
        const auto a = fit_coefficients(s);
        const double c = shift(rng);
        for (auto& x : s) x.value += c;
        const auto b = fit_coefficients(s);
        CHECK(std::abs(b[0] - (a[0] + c)) < 1e-8);
        for (std::size_t i = 1; i < kCoeffCount; ++i) CHECK(std::abs(b[i] - a[i]) < 1e-8);
    }
}

TEST_CASE("order-2 variant") {
    const InterAnnualCoeffs a{0.3, 0.05, -0.02, 0.03, 0.01, 0.01, -0.005};
    std::vector<Sample> s;
    for (int y = 0; y < 2; ++y)
        for (int d = 1; d <= 366; d += 8) {
            const auto x = design_vector_order2(d);
            double v = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) v += a[i] * x[i];
            s.push_back({d, v});
        }
    const auto b = fit_order2(s);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-8);

    const auto x = design_vector_order2(50);
    double retained = 0.0, zeroed = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        retained += a[i] * x[i];
        if (i != 3 && i != 4) zeroed += a[i] * x[i];
    }
    CHECK(predict_order2(b, 50, InterAnnualPrediction::Retained) == doctest::Approx(retained).epsilon(1e-8));
    CHECK(predict_order2(b, 50, InterAnnualPrediction::Zeroed) == doctest::Approx(zeroed).epsilon(1e-8));
}
