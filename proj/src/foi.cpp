#include "ocvtrack/foi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ocvtrack/config.hpp"
#include "ocvtrack_catalog_data.hpp"

namespace ocvtrack {

std::string to_string(DegradationMode dm) {
    switch (dm) {
        case DegradationMode::LLI: return "LLI";
        case DegradationMode::LAM_NE: return "LAM_NE";
        case DegradationMode::LAM_PE: return "LAM_PE";
    }
    return "?";
}

DegradationMode degradation_mode_from_string(const std::string& text) {
    if (text == "LLI") return DegradationMode::LLI;
    if (text == "LAM_NE") return DegradationMode::LAM_NE;
    if (text == "LAM_PE") return DegradationMode::LAM_PE;
    throw ConfigError("unknown degradation mode '" + text + "'");
}

std::string to_string(ObservationStatus s) {
    switch (s) {
        case ObservationStatus::Found: return "found";
        case ObservationStatus::NoExtremumFound: return "NoExtremumFound";
        case ObservationStatus::WindowOutOfDomain: return "WindowOutOfDomain";
    }
    return "?";
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Dominant: return "dominant";
        case Verdict::Possible: return "possible";
        case Verdict::NotIndicated: return "not indicated";
    }
    return "?";
}

std::vector<FoiQuantity> FoiSpec::quantities() const {
    if (feature == FeatureKind::PeakDistance) return {FoiQuantity::Distance};
    return {FoiQuantity::Intensity, FoiQuantity::Position};
}

void FoiSpec::validate() const {
    const std::string id = "FOI " + std::to_string(foi_id);
    if (!(window.hi > window.lo)) throw ConfigError(id + ": empty window");
    if (feature == FeatureKind::PeakDistance) {
        if (!pair_window) throw ConfigError(id + ": PeakDistance requires pair_window");
        if (!(pair_window->hi > pair_window->lo)) throw ConfigError(id + ": empty pair_window");
    }
    const auto qs = quantities();
    for (const auto& h : dm_hypothesis)
        if (std::find(qs.begin(), qs.end(), h.quantity) == qs.end())
            throw ConfigError(id + ": hypothesis on a quantity the feature does not produce");
}

namespace {

Window window_from(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 2) throw ConfigError("window must have two entries");
    return {v[0], v[1]};
}

FeatureKind feature_from(const std::string& s) {
    if (s == "Peak" || s == "PeakIntensity" || s == "PeakPosition") return FeatureKind::Peak;
    if (s == "Valley" || s == "ValleyIntensity") return FeatureKind::Valley;
    if (s == "PeakDistance") return FeatureKind::PeakDistance;
    throw ConfigError("unknown FOI feature '" + s + "'");
}

std::string feature_name(FeatureKind f) {
    switch (f) {
        case FeatureKind::Peak: return "Peak";
        case FeatureKind::Valley: return "Valley";
        case FeatureKind::PeakDistance: return "PeakDistance";
    }
    return "?";
}

std::string quantity_name(FoiQuantity q) {
    switch (q) {
        case FoiQuantity::Intensity: return "intensity";
        case FoiQuantity::Position: return "position";
        case FoiQuantity::Distance: return "distance";
    }
    return "?";
}

}  // namespace

std::vector<FoiSpec> parse_catalog(const nlohmann::json& j) {
    const nlohmann::json& list = j.is_array() ? j : j.at("fois");
    std::vector<FoiSpec> out;
    for (const auto& e : list) {
        FoiSpec s;
        s.foi_id = e.at("foi_id").get<int>();
        s.chemistry = chemistry_from_string(e.at("chemistry").get<std::string>());
        s.curve_kind = diff_kind_from_string(e.at("curve").get<std::string>());
        s.feature = feature_from(e.at("feature").get<std::string>());
        s.window = window_from(e.at("window"));
        if (e.contains("pair_window")) s.pair_window = window_from(e.at("pair_window"));
        s.pair_accepts_edge = e.value("pair_accepts_edge", false);
        s.low_confidence = e.value("low_confidence", false);
        s.note = e.value("note", std::string());
        if (e.contains("hypotheses")) {
            for (const auto& h : e.at("hypotheses")) {
                DmHypothesis hyp;
                hyp.quantity = foi_quantity_from_string(h.at("quantity").get<std::string>());
                const std::string expect = h.at("expect").get<std::string>();
                if (expect == "increase")
                    hyp.expect = DriftSign::Increase;
                else if (expect == "decrease")
                    hyp.expect = DriftSign::Decrease;
                else
                    throw ConfigError("hypothesis expect must be 'increase' or 'decrease'");
                for (const auto& dm : h.at("dms")) hyp.dms.push_back(degradation_mode_from_string(dm.get<std::string>()));
                s.dm_hypothesis.push_back(std::move(hyp));
            }
        }
        s.validate();
        for (const auto& prev : out)
            if (prev.chemistry == s.chemistry && prev.foi_id == s.foi_id)
                throw ConfigError("duplicate FOI id " + std::to_string(s.foi_id) + " for " + to_string(s.chemistry));
        out.push_back(std::move(s));
    }
    return out;
}

nlohmann::json catalog_to_json(const std::vector<FoiSpec>& specs) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& s : specs) {
        nlohmann::json e = {{"foi_id", s.foi_id},
                            {"chemistry", to_string(s.chemistry)},
                            {"curve", to_string(s.curve_kind)},
                            {"feature", feature_name(s.feature)},
                            {"window", {s.window.lo, s.window.hi}}};
        if (s.pair_window) e["pair_window"] = {s.pair_window->lo, s.pair_window->hi};
        if (s.pair_accepts_edge) e["pair_accepts_edge"] = true;
        nlohmann::json hyps = nlohmann::json::array();
        for (const auto& h : s.dm_hypothesis) {
            nlohmann::json dms = nlohmann::json::array();
            for (const auto dm : h.dms) dms.push_back(to_string(dm));
            hyps.push_back({{"quantity", quantity_name(h.quantity)},
                            {"expect", h.expect == DriftSign::Increase ? "increase" : "decrease"},
                            {"dms", dms}});
        }
        e["hypotheses"] = hyps;
        e["low_confidence"] = s.low_confidence;
        if (!s.note.empty()) e["note"] = s.note;
        list.push_back(e);
    }
    return {{"schema", "ocvtrack.foi_catalog"}, {"version", 1}, {"fois", list}};
}

std::vector<FoiSpec> load_catalog(const std::filesystem::path& path) {
    return parse_catalog(load_structured_file(path));
}

const std::vector<FoiSpec>& builtin_catalog_all() {
    static const std::vector<FoiSpec> all = parse_catalog(nlohmann::json::parse(detail::builtin_catalog_json));
    return all;
}

std::vector<FoiSpec> catalog_for(const std::vector<FoiSpec>& all, Chemistry chemistry) {
    std::vector<FoiSpec> out;
    for (const auto& s : all)
        if (s.chemistry == chemistry) out.push_back(s);
    if (out.empty()) throw UnknownChemistry(to_string(chemistry));
    std::sort(out.begin(), out.end(), [](const FoiSpec& a, const FoiSpec& b) { return a.foi_id < b.foi_id; });
    return out;
}

std::vector<FoiSpec> builtin_catalog(Chemistry chemistry) { return catalog_for(builtin_catalog_all(), chemistry); }

double FoiObservation::value(FoiQuantity q) const {
    switch (q) {
        case FoiQuantity::Intensity: return intensity;
        case FoiQuantity::Position: return position;
        case FoiQuantity::Distance: return distance;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

namespace {

struct Extremum {
    ObservationStatus status = ObservationStatus::NoExtremumFound;
    double x = 0.0;
    double y = 0.0;
};

Extremum find_extremum(const DiffCurve& c, Window w, bool maximum, bool accept_domain_edge) {
    Extremum e;
    const std::size_t n = c.x.size();
    if (n == 0 || w.hi < c.x.front() || w.lo > c.x.back()) {
        e.status = ObservationStatus::WindowOutOfDomain;
        return e;
    }
    std::size_t first = n, last = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (c.x[k] < w.lo || c.x[k] > w.hi) continue;
        first = std::min(first, k);
        last = k;
    }
    if (first == n) {
        e.status = ObservationStatus::WindowOutOfDomain;
        return e;
    }
    const double sgn = maximum ? 1.0 : -1.0;
    std::size_t best = first;
    for (std::size_t k = first + 1; k <= last; ++k)
        if (sgn * c.y[k] > sgn * c.y[best]) best = k;

    const bool at_window_edge = best == first || best == last;
    if (at_window_edge) {
        const bool domain_end = best == 0 || best == n - 1;
        if (accept_domain_edge && domain_end) {
            e.status = ObservationStatus::Found;
            e.x = c.x[best];
            e.y = c.y[best];
        }
        return e;
    }
    const double ym = c.y[best - 1], y0 = c.y[best], yp = c.y[best + 1];
    if (!(sgn * y0 > sgn * ym)) return e;  // flat: no strict extremum
    const double denom = ym - 2.0 * y0 + yp;
    double delta = 0.0;
    if (denom != 0.0) delta = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
    const double dx = 0.5 * (c.x[best + 1] - c.x[best - 1]);
    e.status = ObservationStatus::Found;
    e.x = c.x[best] + delta * dx;
    e.y = y0 - 0.25 * (ym - yp) * delta;
    return e;
}

}  // namespace

FoiObservation locate(const FoiSpec& spec, const DiffCurve& curve) {
    if (spec.curve_kind != curve.kind) throw DomainError("FOI curve kind does not match the curve");
    FoiObservation obs;
    obs.foi_id = spec.foi_id;
    obs.period = curve.source.period;
    const bool maximum = spec.feature != FeatureKind::Valley;
    const Extremum a = find_extremum(curve, spec.window, maximum, false);
    if (a.status != ObservationStatus::Found) {
        obs.status = a.status;
        return obs;
    }
    if (spec.feature != FeatureKind::PeakDistance) {
        obs.status = ObservationStatus::Found;
        obs.intensity = a.y;
        obs.position = a.x;
        return obs;
    }
    const Extremum b = find_extremum(curve, *spec.pair_window, true, spec.pair_accepts_edge);
    obs.status = b.status;
    if (b.status == ObservationStatus::Found) obs.distance = std::fabs(b.x - a.x);
    return obs;
}

FoiTrack track(const FoiSpec& spec, FoiQuantity quantity, const std::vector<DiffCurve>& curves) {
    const auto qs = spec.quantities();
    if (std::find(qs.begin(), qs.end(), quantity) == qs.end())
        throw DomainError("FOI feature does not produce the requested quantity");
    std::vector<const DiffCurve*> sorted;
    for (const auto& c : curves) sorted.push_back(&c);
    std::sort(sorted.begin(), sorted.end(),
              [](const DiffCurve* a, const DiffCurve* b) { return a->source.period < b->source.period; });
    if (sorted.empty()) throw InsufficientObservations();

    const DiffCurve& first = *sorted.front();
    const double x_range = first.x.back() - first.x.front();
    double y_max = first.y.front();
    for (const double y : first.y) y_max = std::max(y_max, y);
    const double t0 = first.source.period.mid_year();

    FoiTrack out;
    out.foi_id = spec.foi_id;
    out.quantity = quantity;
    out.low_confidence = spec.low_confidence;
    std::vector<double> years, normalized, raw;
    for (const DiffCurve* c : sorted) {
        const FoiObservation obs = locate(spec, *c);
        if (!obs.found()) {
            out.missing.push_back(c->source.period);
            continue;
        }
        TrackPoint p;
        p.period = c->source.period;
        p.years = c->source.period.mid_year() - t0;
        p.raw = obs.value(quantity);
        switch (quantity) {
            case FoiQuantity::Intensity: p.normalized = p.raw / y_max * 100.0; break;
            case FoiQuantity::Position: p.normalized = (p.raw - first.x.front()) / x_range * 100.0; break;
            case FoiQuantity::Distance: p.normalized = p.raw / x_range * 100.0; break;
        }
        years.push_back(p.years);
        normalized.push_back(p.normalized);
        raw.push_back(p.raw);
        out.points.push_back(p);
    }
    if (out.points.size() < 2) throw InsufficientObservations();
    const LinearFit fit = least_squares(years, normalized);
    out.drift_pp_per_year = fit.slope;
    out.r_squared = fit.r_squared;
    out.raw_drift_per_year = least_squares(years, raw).slope;
    return out;
}

std::vector<FoiTrack> track_all(const FoiSpec& spec, const std::vector<DiffCurve>& curves) {
    std::vector<FoiTrack> out;
    for (const auto q : spec.quantities()) {
        try {
            out.push_back(track(spec, q, curves));
        } catch (const InsufficientObservations&) {
        }
    }
    return out;
}

const DmVerdict& DmReport::of(DegradationMode dm) const {
    for (const auto& m : modes)
        if (m.dm == dm) return m;
    throw DomainError("degradation mode missing from report");
}

DmReport attribute_dm(const std::vector<FoiTrack>& tracks, const std::vector<FoiSpec>& catalog,
                      double significance_floor) {
    const DegradationMode all[3] = {DegradationMode::LLI, DegradationMode::LAM_NE, DegradationMode::LAM_PE};
    std::set<int> support[3], contra[3];
    for (const auto& t : tracks) {
        const FoiSpec* spec = nullptr;
        for (const auto& s : catalog)
            if (s.foi_id == t.foi_id) spec = &s;
        if (spec == nullptr) continue;
        if (!(std::fabs(t.drift_pp_per_year) > significance_floor)) continue;
        const DriftSign observed = t.drift_pp_per_year > 0.0 ? DriftSign::Increase : DriftSign::Decrease;
        for (const auto& h : spec->dm_hypothesis) {
            if (h.quantity != t.quantity) continue;
            for (const auto dm : h.dms) {
                const int idx = static_cast<int>(dm);
                if (observed == h.expect)
                    support[idx].insert(t.foi_id);
                else
                    contra[idx].insert(t.foi_id);
            }
        }
    }
    std::size_t max_support = 0;
    int holders = 0;
    for (int k = 0; k < 3; ++k) max_support = std::max(max_support, support[k].size());
    for (int k = 0; k < 3; ++k) holders += support[k].size() == max_support ? 1 : 0;

    DmReport report;
    for (int k = 0; k < 3; ++k) {
        DmVerdict v;
        v.dm = all[k];
        v.supporting.assign(support[k].begin(), support[k].end());
        v.contradicting.assign(contra[k].begin(), contra[k].end());
        const std::size_t s = support[k].size();
        if (s == 0)
            v.verdict = Verdict::NotIndicated;
        else if (s == max_support && holders == 1 && s > contra[k].size())
            v.verdict = Verdict::Dominant;
        else
            v.verdict = Verdict::Possible;
        report.modes.push_back(v);
    }
    return report;
}

nlohmann::json to_json(const DmReport& report) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& m : report.modes)
        j[to_string(m.dm)] = {{"verdict", to_string(m.verdict)},
                              {"supporting", m.supporting},
                              {"contradicting", m.contradicting}};
    return j;
}

}  // namespace ocvtrack
