#include "cmfda/errors.hpp"

namespace cmfda {

std::vector<WindowModels> fit_pixel_models(const PixelSeries& series, std::span<const WindowPair> windows,
                                           std::span<const Band> bands, const FitOptions& opts,
                                           std::vector<FitSkip>* skips) {
    std::vector<WindowModels> out(windows.size());
    for (std::size_t j = 0; j < windows.size(); ++j) {
        for (Band b : bands) {
            try {
                out[j][band_slot(b)] = fit(series, b, windows[j].train, opts);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::InsufficientData && e.code() != ErrorCode::RankDeficient) throw;
                if (skips) skips->push_back({series.pixel_id, windows[j].index, b, e.code()});
            }
        }
    }
    return out;
}

PixelErrors compute_errors(const PixelSeries& series, std::span<const WindowPair> windows,
                           std::span<const WindowModels> models) {
    if (models.size() != windows.size())
        throw Error(ErrorCode::ShapeMismatch, "models and windows differ in length for " + series.pixel_id);
    PixelErrors out{series.pixel_id, series.site_id, series.col, series.row, {}};
    for (std::size_t j = 0; j < windows.size(); ++j) {
        const WindowModels& wm = models[j];
        bool any = false;
        for (const auto& m : wm) any = any || m.has_value();
        if (!any) continue;

        WindowErrors we{windows[j].index, windows[j].predict_year, windows[j].predict, {}};
        for (const Observation& o : series.observations) {
            if (!windows[j].predict.contains(o.nominal) || !o.is_clear()) continue;
            ErrorPoint p{o.nominal, o.composite_doy, {}, 0};
            for (Band b : kAllBands) {
                const auto& m = wm[band_slot(b)];
                if (m && o.has_value(b)) p.set(b, residual(*m, o, b));
            }
            if (p.mask != 0) we.points.push_back(p);
        }
        out.windows.push_back(std::move(we));
    }
    return out;
}

}  // namespace cmfda
