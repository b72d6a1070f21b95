#pragma once

namespace cmfda {

/// Coefficients of the enhanced vegetation index. `canopy` is the canopy
/// background adjustment, unrelated to detection thresholds.
struct EviParams {
    double canopy = 1.0;
    double c1 = 6.0;
    double c2 = 7.5;
    double gain = 2.5;
};

/// Reflectance above which blue is treated as a bright target and the
/// two-band EVI form is used.
inline constexpr double kEviBlueCutoff = 0.2;

/// (nir - red) / (nir + red). Throws DegenerateInput when red + nir == 0.
double ndvi(double red, double nir);

/// Three-band EVI, switching to the two-band form when blue >= 0.2.
/// Throws DegenerateInput on a zero denominator.
double evi(double red, double nir, double blue, const EviParams& params = {});

}  // namespace cmfda
