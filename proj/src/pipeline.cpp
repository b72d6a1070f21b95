#include "cmfda/pipeline.hpp"

#include "cmfda/parallel.hpp"

namespace cmfda {

std::vector<std::vector<WindowModels>> fit_all(std::span<const PixelSeries> pixels,
                                               std::span<const WindowPair> windows, std::span<const Band> bands,
                                               const FitOptions& opts, int threads, std::vector<FitSkip>* skips) {
    std::vector<std::vector<WindowModels>> models(pixels.size());
    std::vector<std::vector<FitSkip>> local(pixels.size());
    parallel_for(pixels.size(), threads, [&](std::size_t i) {
        models[i] = fit_pixel_models(pixels[i], windows, bands, opts, &local[i]);
    });
    if (skips)
        for (auto& l : local) skips->insert(skips->end(), l.begin(), l.end());
    return models;
}

std::vector<PixelErrors> errors_all(std::span<const PixelSeries> pixels, std::span<const WindowPair> windows,
                                    std::span<const std::vector<WindowModels>> models, int threads) {
    if (models.size() != pixels.size()) throw Error(ErrorCode::ShapeMismatch, "one model set per pixel expected");
    std::vector<PixelErrors> errors(pixels.size());
    parallel_for(pixels.size(), threads,
                 [&](std::size_t i) { errors[i] = compute_errors(pixels[i], windows, models[i]); });
    return errors;
}

std::vector<CovarianceRecord> covariance_records(std::span<const PixelErrors> errors) {
    std::vector<CovarianceRecord> out;
    for (const auto& px : errors)
        for (const auto& w : px.windows)
            for (const auto& p : w.points)
                if (p.has(Band::NIR) && p.has(Band::NDVI))
                    out.push_back({px.site_id, px.col, px.row, p.doy, p.get(Band::NIR), p.get(Band::NDVI)});
    return out;
}

std::vector<DetectionResult> detect_all(const DetectionRule& rule, std::span<const PixelErrors> errors, int threads) {
    std::vector<DetectionResult> out(errors.size());
    parallel_for(errors.size(), threads, [&](std::size_t i) { out[i] = evaluate(rule, errors[i]); });
    return out;
}

std::vector<ModelFile> to_model_files(std::span<const PixelSeries> pixels, std::span<const WindowPair> windows,
                                      std::span<const std::vector<WindowModels>> models) {
    std::vector<ModelFile> files;
    for (std::size_t j = 0; j < windows.size(); ++j) {
        ModelFile f{windows[j], {}};
        for (std::size_t i = 0; i < pixels.size(); ++i)
            for (const auto& m : models[i][j])
                if (m) f.models.push_back(*m);
        files.push_back(std::move(f));
    }
    return files;
}

}  // namespace cmfda
