#pragma once

#include <string>
#include <vector>

#include "ocvtrack/diff.hpp"
#include "ocvtrack/foi.hpp"
#include "ocvtrack/qocv.hpp"

namespace ocvtrack::svg {

struct Series {
    std::string label;
    std::vector<double> x, y;
};

struct Marker {
    double x = 0.0, y = 0.0;
    std::string label;
};

struct Band {
    double lo = 0.0, hi = 0.0;
    std::string label;
};

struct Plot {
    std::string title, x_label, y_label;
    std::vector<Series> series;
    std::vector<Marker> markers;
    std::vector<Band> bands;  // shaded x intervals, e.g. FOI windows
};

// Static SVG, no timestamps or random ids: identical input, identical bytes.
std::string render(const Plot& plot);

Plot qocv_overlay(const std::vector<QocvCurve>& curves);
Plot diff_overlay(const std::vector<DiffCurve>& curves, const std::vector<FoiSpec>& catalog,
                  const std::vector<FoiObservation>& observations);

}  // namespace ocvtrack::svg
