#pragma once

#include <span>
#include <vector>

#include "cmfda/detection.hpp"
#include "cmfda/dataio.hpp"

namespace cmfda {

/// Site-level batch steps; every pixel is processed independently on up to
/// `threads` workers and results keep the input order.

/// result[pixel][window].
std::vector<std::vector<WindowModels>> fit_all(std::span<const PixelSeries> pixels,
                                               std::span<const WindowPair> windows, std::span<const Band> bands,
                                               const FitOptions& opts, int threads,
                                               std::vector<FitSkip>* skips = nullptr);

std::vector<PixelErrors> errors_all(std::span<const PixelSeries> pixels, std::span<const WindowPair> windows,
                                    std::span<const std::vector<WindowModels>> models, int threads);

/// NIR/NDVI error pairs at every date where both are present.
std::vector<CovarianceRecord> covariance_records(std::span<const PixelErrors> errors);

std::vector<DetectionResult> detect_all(const DetectionRule& rule, std::span<const PixelErrors> errors, int threads);

/// One model file per window, listing every fitted model.
std::vector<ModelFile> to_model_files(std::span<const PixelSeries> pixels, std::span<const WindowPair> windows,
                                      std::span<const std::vector<WindowModels>> models);

}  // namespace cmfda
