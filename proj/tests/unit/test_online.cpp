#include <map>

#include "cmfda/online.hpp"
#include "cmfda/pipeline.hpp"
#include "cmfda/synth.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cmfda;

namespace {

const WindowPair kPeriod = window_for_prediction_year(2007);
const std::vector<Band> kBands{Band::NIR, Band::NDVI};

std::map<PixelId, DetectionResult> batch_flags(const std::vector<PixelSeries>& px, const DetectionRule& rule,
                                               std::vector<std::vector<WindowModels>>* models_out = nullptr) {
    const std::vector<WindowPair> w{kPeriod};
    const auto models = fit_all(px, w, kBands, FitOptions{}, 1);
    const auto errs = errors_all(px, w, models, 1);
    std::map<PixelId, DetectionResult> out;
    for (const auto& r : detect_all(rule, errs, 1))
        if (r.flagged) out[r.pixel_id] = r;
    if (models_out) *models_out = models;
    return out;
}

void check_same(const std::map<PixelId, DetectionResult>& online, const std::map<PixelId, DetectionResult>& batch) {
    CHECK(online.size() == batch.size());
    for (const auto& [id, r] : batch) {
        REQUIRE(online.count(id) == 1);
        CHECK(online.at(id).first_flag_date == r.first_flag_date);
        CHECK(online.at(id).triggering_band == r.triggering_band);
    }
}

// Site whose events all happen inside the monitored year.
std::vector<PixelSeries> site_with_events_in(int year, std::uint64_t seed, double noise_scale) {
    auto cfg = scenario(seed % 2 ? "sonora-like" : "yucatan-like", seed, 30, noise_scale);
    cfg.first_year = 2004;
    cfg.last_year = 2008;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> doy(1, days_in_year(year));
    for (auto& e : cfg.events) e.date = Date::from_ymd(year, 1, 1).plus_days(doy(rng) - 1);
    return generate_site(cfg).grid.pixels();
}

}  // namespace

TEST_CASE("refit interval covers the two years before a run") {
    CHECK(refit_interval(Date::from_ymd(2006, 3, 6)) ==
          DateInterval{Date::from_ymd(2004, 3, 6), Date::from_ymd(2006, 3, 5)});
    CHECK(refit_interval(Date::from_ymd(2008, 2, 29)) ==
          DateInterval{Date::from_ymd(2006, 2, 28), Date::from_ymd(2008, 2, 28)});
    CHECK(refit_interval(Date::from_ymd(2007, 1, 1)) ==
          DateInterval{Date::from_ymd(2005, 1, 1), Date::from_ymd(2006, 12, 31)});
    CHECK(parse_online_policy("refit") == OnlinePolicy::Refit);
    CHECK(parse_online_policy(to_string(OnlinePolicy::FixedModels)) == OnlinePolicy::FixedModels);
    CHECK_THROWS_AS(parse_online_policy("sometimes"), Error);
}

TEST_CASE("fixed-model monitoring matches batch detection") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto px = site_with_events_in(2007, seed, 1.0);
        const auto rule = default_multivariate_rule();
        std::vector<std::vector<WindowModels>> models;
        const auto batch = batch_flags(px, rule, &models);
        CHECK(!batch.empty());

        OnlineConfig cfg;
        cfg.rule = rule;
        cfg.period = kPeriod;
        cfg.policy = OnlinePolicy::FixedModels;
        OnlineMonitor mon(cfg, px);
        std::map<PixelId, WindowModels> by_pixel;
        for (std::size_t i = 0; i < px.size(); ++i) by_pixel[px[i].pixel_id] = models[i][0];
        mon.set_models(by_pixel);
        mon.replay();
        check_same(mon.flagged(), batch);
    }
}

TEST_CASE("refit monitoring matches batch detection on noiseless sites") {
    for (std::uint64_t seed = 4; seed <= 5; ++seed) {
        const auto px = site_with_events_in(2007, seed, 0.0);
        const auto rule = default_multivariate_rule();
        const auto batch = batch_flags(px, rule);
        CHECK(batch.size() >= 20);

        OnlineConfig cfg;
        cfg.rule = rule;
        cfg.period = kPeriod;
        OnlineMonitor mon(cfg, px);
        mon.replay();
        check_same(mon.flagged(), batch);
        CHECK(!mon.latest_models().empty());
    }
}

TEST_CASE("appending one date at a time matches a full replay") {
    const auto full = site_with_events_in(2007, 7, 1.0);
    const std::vector<PixelSeries> px(full.begin(), full.begin() + 150);
    OnlineConfig cfg;
    cfg.period = kPeriod;
    cfg.rule = DetectionRule::multivariate(0.06, 0.12, 3);

    OnlineMonitor whole(cfg, px);
    whole.replay();

    // Archive through 2006, then feed 2007 and the extension date by date.
    std::vector<PixelSeries> archive = px;
    std::vector<std::vector<Observation>> rest(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
        auto& obs = archive[i].observations;
        const auto cut = std::find_if(obs.begin(), obs.end(),
                                      [](const Observation& o) { return o.nominal.year >= 2007; });
        rest[i].assign(cut, obs.end());
        obs.erase(cut, obs.end());
    }
    OnlineMonitor inc(cfg, archive);
    std::size_t flagged_total = 0;
    for (std::size_t k = 0; k < rest[0].size(); ++k) {
        std::vector<PixelSeries> batch;
        for (std::size_t i = 0; i < px.size(); ++i)
            batch.push_back({px[i].pixel_id, px[i].site_id, px[i].col, px[i].row, {rest[i][k]}});
        inc.append(batch);
        const Date t = rest[0][k].nominal;
        if (!kPeriod.predict.contains(t)) continue;
        const auto before = inc.flagged().size();
        const auto now = inc.step(t);
        CHECK(inc.flagged().size() == before + now.size());
        for (const auto& r : now) CHECK(r.first_flag_date == t);
        flagged_total += now.size();
        CHECK(inc.last_processed() == t);
    }
    CHECK(flagged_total == whole.flagged().size());
    check_same(inc.flagged(), whole.flagged());
}

TEST_CASE("cloudy batches and flagged pixels leave the state unchanged") {
    const Date event = Date::from_ymd(2007, 3, 1);
    std::vector<PixelSeries> px{
        testsupport::make_series("drop", 2005, 2007, testsupport::stepped(Band::NIR, event, -0.3)),
        testsupport::make_series("calm", 2005, 2007, testsupport::stable()),
    };
    OnlineConfig cfg;
    cfg.period = kPeriod;
    OnlineMonitor mon(cfg, px);
    mon.replay();
    REQUIRE(mon.flagged().size() == 1);
    const auto first = mon.flagged().at("drop");
    CHECK(first.first_flag_date.has_value());

    // The next date lies in the extension; fully cloudy, it flags nothing.
    auto cloudy = testsupport::make_series("calm", 2005, 2008, testsupport::stable(),
                                           [](Date) { return Reliability::Cloudy; });
    cloudy.observations = {cloudy.observations[px[1].observations.size()]};
    mon.append(std::vector<PixelSeries>{cloudy});
    const auto snapshot = mon.flagged();
    CHECK(mon.step(cloudy.observations[0].nominal).empty());
    CHECK(mon.flagged() == snapshot);
    CHECK(mon.last_processed() == cloudy.observations[0].nominal);

    // Re-stepping earlier dates never re-reports an already flagged pixel.
    for (const auto& o : px[0].observations)
        if (kPeriod.predict.contains(o.nominal)) CHECK(mon.step(o.nominal).empty());
    CHECK(mon.flagged().at("drop") == first);

    OnlineMonitor resumed(cfg, px);
    resumed.restore(std::vector<DetectionResult>{first}, mon.last_processed());
    CHECK(resumed.replay().empty());
    CHECK(resumed.flagged().size() == 1);
}

TEST_CASE("forest mask limits monitoring") {
    const Date event = Date::from_ymd(2007, 3, 1);
    std::vector<PixelSeries> px{
        testsupport::make_series("a", 2005, 2007, testsupport::stepped(Band::NIR, event, -0.3)),
        testsupport::make_series("b", 2005, 2007, testsupport::stepped(Band::NIR, event, -0.3)),
    };
    OnlineConfig cfg;
    cfg.period = kPeriod;
    OnlineMonitor mon(cfg, px);
    mon.set_forest_mask({"b"});
    mon.replay();
    CHECK(mon.flagged().size() == 1);
    CHECK(mon.flagged().count("b") == 1);
}

TEST_CASE("batches must continue the archive") {
    auto whole = testsupport::make_series("a", 2005, 2007, testsupport::stable());
    auto next = whole;
    const auto cut = whole.observations.begin() + 46;
    whole.observations.erase(cut, whole.observations.end());
    next.observations.erase(next.observations.begin(), next.observations.begin() + 46);
    std::vector<PixelSeries> px{whole};
    OnlineConfig cfg;
    cfg.period = kPeriod;
    OnlineMonitor mon(cfg, px);

    auto gap = next;
    gap.observations.erase(gap.observations.begin());
    try {
        mon.append(std::vector<PixelSeries>{gap});
        FAIL("expected InvalidValue");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidValue);
    }
    auto stranger = next;
    stranger.pixel_id = "zz";
    CHECK_THROWS_AS(mon.append(std::vector<PixelSeries>{stranger}), Error);
    CHECK_NOTHROW(mon.append(std::vector<PixelSeries>{next}));

    CHECK_THROWS_AS(OnlineMonitor(cfg, {px[0], px[0]}), Error);
}

TEST_CASE("batch results do not depend on the thread count") {
    const auto px = site_with_events_in(2007, 9, 1.0);
    const std::vector<WindowPair> w{kPeriod};
    const auto m1 = fit_all(px, w, kBands, FitOptions{}, 1);
    const auto m4 = fit_all(px, w, kBands, FitOptions{}, 4);
    const auto e1 = errors_all(px, w, m1, 1);
    const auto e4 = errors_all(px, w, m4, 4);
    const auto rule = default_multivariate_rule();
    CHECK(detect_all(rule, e1, 1) == detect_all(rule, e4, 4));
}
