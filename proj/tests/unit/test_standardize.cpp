#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "cmfda/pipeline.hpp"
#include "cmfda/standardize.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cmfda;

namespace {

// Lower-tail standard normal quantile by bisection on erfc.
double bisect_quantile(double p) {
    if (p > 0.5) return -bisect_quantile(1.0 - p);
    double lo = -40.0, hi = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

ErrorContext ctx(const std::string& px, const std::string& site, int col, int row, int doy) {
    return {px, site, col, row, doy};
}

// Two sites, 25 pixels each on a 10x10 corner (four cube squares), errors on
// two periods of the year with pixel- and period-specific spread.
std::vector<ErrorRecord> synthetic_history(std::uint64_t seed, int per_pixel) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<ErrorRecord> out;
    for (const std::string site : {"a", "b"}) {
        for (int k = 0; k < 25; ++k) {
            const int col = (k * 2) % 10, row = (k * 3) % 10;
            const std::string id = make_pixel_id(site, col, row);
            const double scale = 0.01 + 0.002 * k + (site == "b" ? 0.01 : 0.0);
            for (int i = 0; i < per_pixel; ++i) {
                const int doy = i % 2 ? 3 : 153;
                const double period_scale = doy == 3 ? 1.0 : 2.0;
                out.push_back({ctx(id, site, col, row, doy), scale * period_scale * g(rng)});
            }
        }
    }
    return out;
}

double ks_uniform_centered(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double f = v[i] + 0.5;
        d = std::max({d, (static_cast<double>(i) + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

bool is_final_ecdf(Scheme s) {
    const auto st = stages_of(s);
    return !st.empty() && st.back().stat == StageStat::Ecdf;
}

bool is_final_sd(Scheme s) {
    const auto st = stages_of(s);
    return !st.empty() && st.back().stat == StageStat::Sd;
}

// Groups transformed history by the most specific key of the final stage.
std::map<std::string, std::vector<double>> by_final_key(const Standardizer& s, std::span<const ErrorRecord> h) {
    std::map<std::string, std::vector<double>> out;
    const auto& last = s.stages.back();
    for (const auto& r : h) {
        const auto key = key_chain(last.spec.key, r.ctx).front();
        if (last.entries.count(key)) out[key].push_back(transform(s, r.eps, r.ctx));
    }
    return out;
}

}  // namespace

TEST_CASE("scheme table") {
    CHECK(kAllSchemes.size() == 17);
    std::set<std::string_view> codes;
    for (Scheme s : kAllSchemes) {
        codes.insert(scheme_code(s));
        CHECK(parse_scheme(scheme_code(s)) == s);
        CHECK(parse_scheme(scheme_name(s)) == s);
    }
    CHECK(codes.size() == 17);
    for (const char* c : {"---", "2", "3", "II", "III", "1", "I", "4a", "4b", "II.1", "III.1", "2.I", "3.I", "IVi",
                          "IVii", "4c", "IViii"})
        CHECK(codes.count(c) == 1);
    CHECK(stages_of(Scheme::DayPixel_SdOverall_Sd) ==
          std::vector<StageSpec>{{StageStat::Sd, StageKey::PeriodOverall}, {StageStat::Sd, StageKey::Pixel}});
    CHECK(stages_of(Scheme::DayPixel_EcdfSite_Ecdf) ==
          std::vector<StageSpec>{{StageStat::Ecdf, StageKey::PeriodSite}, {StageStat::Ecdf, StageKey::Pixel}});
    CHECK(stages_of(Scheme::Identity).empty());
    try {
        parse_scheme("5");
        FAIL("expected InvalidConfig");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidConfig);
    }
}

TEST_CASE("ecdf evaluation") {
    const std::vector<double> s{1, 2, 3};
    CHECK(ecdf_eval(s, 2) == 0.5);
    CHECK(ecdf_eval(s, 0) == 0.25);
    CHECK(ecdf_eval(s, 1) == 0.25);
    CHECK(ecdf_eval(s, 10) == 0.75);
    CHECK(ecdf_eval(s, 2.5) == 0.5);
    try {
        ecdf_eval(std::vector<double>{}, 1.0);
        FAIL("expected EmptySample");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptySample);
    }
}

TEST_CASE("inverse normal cdf") {
    CHECK(inverse_normal_cdf(0.5) == 0.0);
    CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
    CHECK(std::abs(inverse_normal_cdf(0.975) - bisect_quantile(0.975)) < 1e-9);
    for (double p : {0.0, 1.0, -0.1, 1.5}) {
        try {
            inverse_normal_cdf(p);
            FAIL("expected OutOfDomain");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::OutOfDomain);
        }
    }
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> lg(-12.0, std::log10(0.5));
    for (int i = 0; i < 2000; ++i) {
        // Snap p so that 1 - p is exact and both tails see the same point.
        const double p = 1.0 - (1.0 - std::pow(10.0, lg(rng)));
        CHECK(std::abs(inverse_normal_cdf(p) - bisect_quantile(p)) < 1e-8);
        CHECK(std::abs(inverse_normal_cdf(1.0 - p) - bisect_quantile(1.0 - p)) < 1e-8);
        CHECK(std::abs(inverse_normal_cdf(p) + inverse_normal_cdf(1.0 - p)) < 1e-10);
    }
}

TEST_CASE("sample sd uses n-1") {
    CHECK(sample_sd(std::vector{-0.1, 0.1}) == doctest::Approx(0.1 * std::sqrt(2.0)).epsilon(1e-14));
    CHECK(sample_sd(std::vector{1.0, 2.0, 3.0, 4.0}) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("fitting examples") {
    const std::vector<ErrorRecord> h{{ctx("p", "a", 0, 0, 10), -0.1},
                                     {ctx("p", "a", 0, 0, 30), 0.1},
                                     {ctx("q", "a", 1, 0, 30), 0.4}};
    SUBCASE("identity") {
        const auto s = fit_standardizer(h, Scheme::Identity, Band::NIR);
        CHECK(s.stages.empty());
        CHECK(transform(s, 0.123, h[0].ctx) == 0.123);
    }
    SUBCASE("pixel sd") {
        const auto s = fit_standardizer(h, Scheme::PixelSd, Band::NIR);
        REQUIRE(s.stages.size() == 1);
        CHECK(s.stages[0].entries.at("px:p").sd == doctest::Approx(0.1 * std::sqrt(2.0)).epsilon(1e-14));
        // q has one error, so it falls back to the site.
        CHECK(s.stages[0].entries.count("px:q") == 0);
        CHECK(transform(s, 0.3, h[2].ctx) == doctest::Approx(0.3 / sample_sd(std::vector{-0.1, 0.1, 0.4})));
    }
    SUBCASE("cube ecdf keeps one sorted sample per populated cube") {
        const auto s = fit_standardizer(h, Scheme::CubeEcdf, Band::NIR);
        long cubes = 0;
        for (const auto& [key, e] : s.stages[0].entries) {
            CHECK(std::is_sorted(e.sorted.begin(), e.sorted.end()));
            CHECK(e.sorted.size() == static_cast<std::size_t>(e.n));
            if (key.rfind("cube:", 0) == 0) ++cubes;
        }
        CHECK(cubes == 2);  // periods 1 and 5 of square 0
    }
    SUBCASE("pixel ecdf maps the median to zero") {
        std::vector<ErrorRecord> m;
        for (double v : {0.3, -0.2, 0.1, 0.05, -0.4}) m.push_back({ctx("p", "a", 0, 0, 10), v});
        const auto s = fit_standardizer(m, Scheme::PixelEcdf, Band::NIR);
        CHECK(transform(s, 0.05, m[0].ctx) == 0.0);
    }
    SUBCASE("period sd") {
        const double a = 0.03 / std::sqrt(2.0);
        const std::vector<ErrorRecord> p{{ctx("p", "a", 0, 0, 151), a}, {ctx("q", "a", 1, 0, 155), -a}};
        const auto s = fit_standardizer(p, Scheme::DaySdOverall, Band::NIR);
        REQUIRE(period_of_day(153) == 30);
        CHECK(transform(s, 0.06, ctx("r", "b", 5, 5, 153)) == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("errors") {
        try {
            fit_standardizer({}, Scheme::PixelSd, Band::NIR);
            FAIL("expected EmptyHistory");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::EmptyHistory);
        }
        const std::vector<ErrorRecord> one{{ctx("p", "a", 0, 0, 10), 0.1}};
        const auto s = fit_standardizer(one, Scheme::PixelSd, Band::NIR);
        try {
            transform(s, 0.1, one[0].ctx);
            FAIL("expected UnknownKey");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::UnknownKey);
        }
    }
}

TEST_CASE("fallback chains") {
    const ErrorContext c = ctx("s_c07r12", "s", 7, 12, 100);
    CHECK(key_chain(StageKey::Pixel, c) == std::vector<std::string>{"px:s_c07r12", "site:s", "*"});
    CHECK(key_chain(StageKey::PeriodOverall, c) == std::vector<std::string>{"p:19", "*"});
    CHECK(key_chain(StageKey::PeriodSite, c) == std::vector<std::string>{"sp:s|19", "p:19", "*"});
    CHECK(key_chain(StageKey::Cube, c) == std::vector<std::string>{"cube:s|11|19", "sp:s|19", "site:s", "*"});
}

TEST_CASE("sd schemes give unit sd per key on their own history") {
    const auto h = synthetic_history(3, 40);
    for (Scheme s : kAllSchemes) {
        if (!is_final_sd(s)) continue;
        CAPTURE(scheme_code(s));
        const auto st = fit_standardizer(h, s, Band::NIR);
        const auto groups = by_final_key(st, h);
        CHECK(!groups.empty());
        for (const auto& [key, v] : groups) {
            if (v.size() < 2) continue;
            CAPTURE(key);
            CHECK(std::abs(sample_sd(v) - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("ecdf schemes give uniform values per key on their own history") {
    const auto h = synthetic_history(4, 120);
    for (Scheme s : kAllSchemes) {
        if (!is_final_ecdf(s)) continue;
        CAPTURE(scheme_code(s));
        const auto st = fit_standardizer(h, s, Band::NIR);
        long checked = 0;
        for (const auto& [key, v] : by_final_key(st, h)) {
            if (v.size() < 100) continue;
            CAPTURE(key);
            for (double x : v) {
                CHECK(x > -0.5);
                CHECK(x < 0.5);
            }
            CHECK(ks_uniform_centered(v) < 2.0 / std::sqrt(static_cast<double>(v.size())));
            ++checked;
        }
        CHECK(checked > 0);
    }
}

TEST_CASE("transform is monotone in the error") {
    const auto h = synthetic_history(5, 20);
    const std::vector<ErrorContext> contexts{h[0].ctx, h[777].ctx, ctx("new", "a", 3, 3, 200),
                                             ctx("other", "zz", 20, 20, 366)};
    for (Scheme s : kAllSchemes) {
        CAPTURE(scheme_code(s));
        const auto st = fit_standardizer(h, s, Band::NIR);
        for (const auto& c : contexts) {
            double prev = -std::numeric_limits<double>::infinity();
            for (double e = -0.3; e <= 0.3; e += 0.001) {
                const double t = transform(st, e, c);
                CHECK(t >= prev);
                prev = t;
            }
        }
    }
}

TEST_CASE("fitting uses only the history") {
    auto h = synthetic_history(6, 20);
    const auto before = fit_standardizer(h, Scheme::DayPixel_EcdfSite_Sd, Band::NIR);
    const ErrorContext fresh = ctx("fresh", "a", 0, 0, 3);
    const double t = transform(before, 0.02, fresh);
    const auto again = fit_standardizer(h, Scheme::DayPixel_EcdfSite_Sd, Band::NIR);
    CHECK(before == again);
    CHECK(transform(again, 0.02, fresh) == t);
}

TEST_CASE("identity scheme leaves detection unchanged") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 0.06);
    const auto windows = make_windows(2003, 2);
    const Band bands[] = {Band::NIR, Band::NDVI};
    std::vector<PixelErrors> errs;
    for (int i = 0; i < 20; ++i) {
        auto s = testsupport::make_series("p" + std::to_string(i), 2003, 2007, [&](Band b, Date, int doy) {
            return std::clamp(testsupport::forest_value(b, doy) + g(rng), 0.0, 1.0);
        });
        errs.push_back(compute_errors(s, windows, fit_pixel_models(s, windows, bands, {})));
    }
    const auto set = fit_standardizers(errs, Scheme::Identity, bands);
    for (const auto& e : errs) {
        const auto z = standardize(e, set);
        for (int c = 2; c <= 6; ++c)
            for (double L : {0.03, 0.06, 0.1}) {
                CHECK(evaluate(DetectionRule::multivariate(L, L, c), e) ==
                      evaluate(DetectionRule::multivariate(L, L, c), z));
                CHECK(evaluate(DetectionRule::univariate(Band::NIR, L, c), e) ==
                      evaluate(DetectionRule::univariate(Band::NIR, L, c), z));
            }
    }
}
