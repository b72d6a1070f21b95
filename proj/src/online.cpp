#include "cmfda/online.hpp"

#include <algorithm>

#include "cmfda/parallel.hpp"

namespace cmfda {

std::string_view to_string(OnlinePolicy p) noexcept {
    return p == OnlinePolicy::Refit ? "refit" : "fixed-models";
}

OnlinePolicy parse_online_policy(std::string_view text) {
    if (text == "refit") return OnlinePolicy::Refit;
    if (text == "fixed-models" || text == "fixed") return OnlinePolicy::FixedModels;
    throw Error(ErrorCode::InvalidConfig, "unknown online policy '" + std::string(text) + "'");
}

DateInterval refit_interval(Date start) {
    const unsigned m = start.month();
    unsigned d = start.day_of_month();
    if (m == 2 && d == 29) d = 28;
    return {Date::from_ymd(start.year - 2, m, d), start.plus_days(-1)};
}

OnlineMonitor::OnlineMonitor(OnlineConfig cfg, std::vector<PixelSeries> archive)
    : cfg_(std::move(cfg)), archive_(std::move(archive)) {
    for (std::size_t i = 0; i < archive_.size(); ++i) {
        if (!index_.emplace(archive_[i].pixel_id, i).second)
            throw Error(ErrorCode::InvalidValue, "pixel " + archive_[i].pixel_id + " archived twice");
    }
}

void OnlineMonitor::set_forest_mask(std::set<PixelId> mask) { mask_ = std::move(mask); }

void OnlineMonitor::set_models(std::map<PixelId, WindowModels> models) { models_ = std::move(models); }

void OnlineMonitor::restore(std::span<const DetectionResult> flagged, std::optional<Date> last_processed) {
    for (const auto& d : flagged)
        if (d.flagged) flagged_[d.pixel_id] = d;
    last_processed_ = last_processed;
}

void OnlineMonitor::append(std::span<const PixelSeries> batch) {
    for (const auto& b : batch) {
        const auto it = index_.find(b.pixel_id);
        if (it == index_.end()) throw Error(ErrorCode::InvalidValue, "batch pixel " + b.pixel_id + " is not archived");
        auto& obs = archive_[it->second].observations;
        for (const auto& o : b.observations) {
            validate(o);
            if (!obs.empty() && days_between(obs.back().nominal, o.nominal) != kDaysPerComposite)
                throw Error(ErrorCode::InvalidValue, "batch for " + b.pixel_id + " breaks the 16-day cadence at " +
                                                         o.nominal.iso());
            obs.push_back(o);
        }
    }
}

namespace {

bool usable(const Observation& o, std::span<const Band> bands) {
    if (!o.is_clear()) return false;
    return std::all_of(bands.begin(), bands.end(), [&](Band b) { return o.has_value(b); });
}

// Position of nominal date t in a 16-day series, if present.
std::optional<std::size_t> position_of(const PixelSeries& s, Date t) {
    if (s.observations.empty()) return std::nullopt;
    const auto offset = days_between(s.observations.front().nominal, t);
    if (offset < 0 || offset % kDaysPerComposite != 0) return std::nullopt;
    const auto i = static_cast<std::size_t>(offset / kDaysPerComposite);
    if (i >= s.observations.size()) return std::nullopt;
    return i;
}

}  // namespace

std::optional<DetectionResult> OnlineMonitor::evaluate_pixel(std::size_t index, Date t,
                                                             std::vector<HarmonicModel>& fitted) const {
    const PixelSeries& s = archive_[index];
    const auto bands = cfg_.rule.bands();
    const auto pos = position_of(s, t);
    if (!pos || !usable(s.observations[*pos], bands)) return std::nullopt;

    // The newest usable date and the C-1 usable dates before it.
    const auto consec = static_cast<std::size_t>(cfg_.rule.consec());
    std::vector<const Observation*> run;
    for (std::size_t i = *pos + 1; i-- > 0 && run.size() < consec;)
        if (usable(s.observations[i], bands)) run.push_back(&s.observations[i]);
    if (run.size() < consec) return std::nullopt;
    std::reverse(run.begin(), run.end());
    const Date start = run.front()->nominal;
    if (!cfg_.period.predict_year.contains(start) || !cfg_.period.predict.contains(t)) return std::nullopt;

    WindowModels models;
    if (cfg_.policy == OnlinePolicy::Refit) {
        const auto train = refit_interval(start);
        for (Band b : bands) {
            try {
                models[band_slot(b)] = fit(s, b, train, cfg_.fit);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::InsufficientData || e.code() == ErrorCode::RankDeficient) return std::nullopt;
                throw;
            }
            fitted.push_back(*models[band_slot(b)]);
        }
    } else {
        const auto it = models_.find(s.pixel_id);
        if (it == models_.end()) return std::nullopt;
        for (Band b : bands) {
            if (!it->second[band_slot(b)]) return std::nullopt;
            models[band_slot(b)] = it->second[band_slot(b)];
        }
    }

    PixelErrors errors{s.pixel_id, s.site_id, s.col, s.row, {}};
    WindowErrors we{cfg_.period.index, cfg_.period.predict_year, cfg_.period.predict, {}};
    for (const Observation* o : run) {
        ErrorPoint p{o->nominal, o->composite_doy, {}, 0};
        for (Band b : bands) p.set(b, residual(*models[band_slot(b)], *o, b));
        we.points.push_back(p);
    }
    errors.windows.push_back(std::move(we));
    auto result = evaluate(cfg_.rule, errors);
    if (!result.flagged) return std::nullopt;
    return result;
}

std::vector<DetectionResult> OnlineMonitor::step(Date t) {
    std::vector<std::optional<DetectionResult>> found(archive_.size());
    std::vector<std::vector<HarmonicModel>> fitted(archive_.size());
    parallel_for(archive_.size(), cfg_.threads, [&](std::size_t i) {
        const auto& id = archive_[i].pixel_id;
        if (flagged_.count(id) || (mask_ && !mask_->count(id))) return;
        found[i] = evaluate_pixel(i, t, fitted[i]);
    });

    std::vector<DetectionResult> out;
    for (std::size_t i = 0; i < archive_.size(); ++i) {
        if (!fitted[i].empty()) latest_models_[archive_[i].pixel_id] = std::move(fitted[i]);
        if (found[i]) {
            flagged_[found[i]->pixel_id] = *found[i];
            out.push_back(std::move(*found[i]));
        }
    }
    last_processed_ = t;
    return out;
}

std::vector<DetectionResult> OnlineMonitor::replay() {
    std::set<Date> dates;
    for (const auto& s : archive_)
        for (const auto& o : s.observations)
            if (cfg_.period.predict.contains(o.nominal) && (!last_processed_ || *last_processed_ < o.nominal))
                dates.insert(o.nominal);
    std::vector<DetectionResult> out;
    for (Date t : dates) {
        auto flagged = step(t);
        out.insert(out.end(), std::make_move_iterator(flagged.begin()), std::make_move_iterator(flagged.end()));
    }
    return out;
}

}  // namespace cmfda
