#include "collo/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "collo/error.hpp"

namespace collo {

namespace {

constexpr std::array<std::string_view, kGenreCount> kGenreNames = {
    "TP", "ST", "P_onP", "PQ", "P", "R", "S", "T", "Q", "TT_off", "head", "Tail", "QR", "RS", "other"};

std::size_t idx(Genre g) { return static_cast<std::size_t>(g); }

double clamp_z(double z) { return std::clamp(z, -3.0, 3.0); }

}  // namespace

std::string_view to_string(Label label) {
    return label == Label::eating ? "eating" : "non_eating";
}

Label parse_label(std::string_view text) {
    if (text == "eating" || text == "1") return Label::eating;
    if (text == "non_eating" || text == "0") return Label::non_eating;
    fail(ErrorCode::InvalidArgument, "unknown label '" + std::string(text) + "'");
}

std::string_view to_string(Genre genre) { return kGenreNames[idx(genre)]; }

Genre parse_genre(std::string_view text) {
    for (std::size_t i = 0; i < kGenreCount; ++i)
        if (kGenreNames[i] == text) return static_cast<Genre>(i);
    fail(ErrorCode::InvalidArgument, "unknown genre '" + std::string(text) + "'");
}

const std::array<Genre, kGenreCount>& all_genres() {
    static const auto genres = [] {
        std::array<Genre, kGenreCount> out{};
        for (std::size_t i = 0; i < kGenreCount; ++i) out[i] = static_cast<Genre>(i);
        return out;
    }();
    return genres;
}

const std::array<Genre, kGenreCount>& genres_in_time_order() {
    static const std::array<Genre, kGenreCount> order = {
        Genre::head, Genre::P_onP, Genre::P,  Genre::PQ,     Genre::Q,
        Genre::QR,   Genre::R,     Genre::RS, Genre::S,      Genre::ST,
        Genre::T,    Genre::TT_off, Genre::Tail, Genre::other, Genre::TP};
    return order;
}

void validate_annotation(const WaveAnnotation& annotation) {
    for (std::size_t b = 0; b < annotation.beats.size(); ++b) {
        std::vector<WaveInterval> spans;
        for (const auto& [genre, span] : annotation.beats[b]) {
            if (span.offset < span.onset)
                fail(ErrorCode::InvalidParams, "beat " + std::to_string(b) + ": reversed interval for " +
                                                   std::string(to_string(genre)));
            spans.push_back(span);
        }
        std::sort(spans.begin(), spans.end(),
                  [](const WaveInterval& a, const WaveInterval& c) { return a.onset < c.onset; });
        for (std::size_t i = 1; i < spans.size(); ++i)
            if (spans[i].onset < spans[i - 1].offset)
                fail(ErrorCode::InvalidParams, "beat " + std::to_string(b) + ": overlapping intervals");
    }
}

void EcgRecord::validate() const {
    if (!(sample_rate > 0.0)) fail(ErrorCode::InvalidArgument, "record " + id + ": sample_rate must be > 0");
    if (static_cast<double>(samples.size()) < sample_rate)
        fail(ErrorCode::TooFewSamples, "record " + id + ": less than one second of data");
}

std::string_view to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::mean: return "mean";
        case FeatureKind::std: return "std";
        case FeatureKind::zero_crossing_rate: return "zero_crossing_rate";
    }
    return "?";
}

FeatureKind parse_feature_kind(std::string_view text) {
    if (text == "mean") return FeatureKind::mean;
    if (text == "std") return FeatureKind::std;
    if (text == "zero_crossing_rate" || text == "zcr") return FeatureKind::zero_crossing_rate;
    fail(ErrorCode::InvalidArgument, "unknown feature kind '" + std::string(text) + "'");
}

SegmentSeries segment(const EcgRecord& record, std::size_t n) {
    if (n < 2) fail(ErrorCode::InvalidArgument, "segment count must be >= 2");
    const std::size_t window = record.samples.size() / n;
    if (window < 2)
        fail(ErrorCode::TooFewSamples, "record " + record.id + ": " + std::to_string(record.samples.size()) +
                                           " samples cannot form " + std::to_string(n) + " segments");
    SegmentSeries series;
    series.record_id = record.id;
    series.window = window;
    series.segments.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto first = record.samples.begin() + static_cast<std::ptrdiff_t>(i * window);
        series.segments.emplace_back(first, first + static_cast<std::ptrdiff_t>(window));
    }
    return series;
}

double extract_feature(std::span<const double> window, FeatureKind kind) {
    if (window.empty()) fail(ErrorCode::EmptySegment, "cannot extract a feature from an empty window");
    const double count = static_cast<double>(window.size());
    switch (kind) {
        case FeatureKind::mean:
            return std::accumulate(window.begin(), window.end(), 0.0) / count;
        case FeatureKind::std: {
            const double mu = std::accumulate(window.begin(), window.end(), 0.0) / count;
            double ss = 0.0;
            for (double v : window) ss += (v - mu) * (v - mu);
            return std::sqrt(ss / count);
        }
        case FeatureKind::zero_crossing_rate: {
            if (window.size() < 2) return 0.0;
            std::size_t changes = 0;
            for (std::size_t i = 1; i < window.size(); ++i)
                if ((window[i - 1] < 0.0) != (window[i] < 0.0)) ++changes;
            return static_cast<double>(changes) / static_cast<double>(window.size() - 1);
        }
    }
    return 0.0;
}

EcgRecord normalize(EcgRecord record) {
    if (record.samples.empty()) return record;
    const double count = static_cast<double>(record.samples.size());
    const double mu = std::accumulate(record.samples.begin(), record.samples.end(), 0.0) / count;
    double ss = 0.0;
    for (double v : record.samples) ss += (v - mu) * (v - mu);
    const double sd = std::sqrt(ss / count);
    for (double& v : record.samples) v = sd > 0.0 ? (v - mu) / sd : v - mu;
    return record;
}

std::array<double, kGenreCount> SyntheticParams::default_durations() {
    std::array<double, kGenreCount> d{};
    d[idx(Genre::head)] = 0.03;
    d[idx(Genre::P_onP)] = 0.03;
    d[idx(Genre::P)] = 0.04;
    d[idx(Genre::PQ)] = 0.06;
    d[idx(Genre::Q)] = 0.02;
    d[idx(Genre::QR)] = 0.02;
    d[idx(Genre::R)] = 0.02;
    d[idx(Genre::RS)] = 0.02;
    d[idx(Genre::S)] = 0.02;
    d[idx(Genre::ST)] = 0.10;
    d[idx(Genre::T)] = 0.08;
    d[idx(Genre::TT_off)] = 0.05;
    d[idx(Genre::Tail)] = 0.03;
    d[idx(Genre::other)] = 0.03;
    d[idx(Genre::TP)] = 0.0;
    return d;
}

double SyntheticParams::fixed_duration_s() const {
    double total = 0.0;
    for (std::size_t i = 0; i < kGenreCount; ++i)
        if (i != idx(Genre::TP)) total += durations_s[i];
    return total;
}

void SyntheticParams::validate() const {
    if (!(sample_rate > 0.0)) fail(ErrorCode::InvalidParams, "sample_rate must be > 0");
    if (!(duration_s > 0.0)) fail(ErrorCode::InvalidParams, "duration_s must be > 0");
    if (!(noise_std >= 0.0)) fail(ErrorCode::InvalidParams, "noise_std must be >= 0");
    if (!(rr_jitter >= 0.0) || !(beat_jitter >= 0.0) || beat_jitter >= 1.0 / 3.0)
        fail(ErrorCode::InvalidParams, "jitter must lie in [0, 1/3)");
    if (!(class_effect > -1.0)) fail(ErrorCode::InvalidParams, "class_effect must be > -1");
    for (std::size_t i = 0; i < kGenreCount; ++i)
        if (i != idx(Genre::TP) && !(durations_s[i] > 0.0))
            fail(ErrorCode::InvalidParams, "genre durations must be positive");
    // The shortest possible RR must still leave room for a positive TP.
    const double shortest_rr = rr_interval_s * (1.0 - 3.0 * rr_jitter);
    const double longest_fixed = fixed_duration_s() * (1.0 + 3.0 * beat_jitter);
    if (!(shortest_rr > longest_fixed))
        fail(ErrorCode::InvalidParams, "rr_interval_s does not fit the beat's waves");
    if (!(rr_interval_s * duration_s > 0.0) || sample_rate * duration_s < 1.0)
        fail(ErrorCode::InvalidParams, "record would be empty");
}

EcgRecord synthesize_ecg(const SyntheticParams& params, Label label, std::uint64_t seed) {
    params.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const double fs = params.sample_rate;
    const auto count = static_cast<std::int64_t>(std::llround(params.duration_s * fs));
    const double stretch = label == Label::eating ? 1.0 + params.class_effect : 1.0;
    const double record_rr = params.rr_interval_s * (1.0 + params.rr_jitter * clamp_z(normal(rng)));
    const double phase = uniform(rng) * record_rr;

    struct Center {
        double time;
        const WaveShape* shape;
    };
    const auto& order = genres_in_time_order();

    EcgRecord record;
    record.id = "synth_" + std::to_string(seed);
    record.sample_rate = fs;
    record.label = label;
    record.samples.assign(static_cast<std::size_t>(count), 0.0);
    WaveAnnotation annotation;

    // Beats are laid out in continuous time from one beat before t=0 so wave
    // tails of a partially visible first beat are present.
    double start = -phase;
    bool first = true;
    std::vector<Center> centers;
    while (start < params.duration_s) {
        std::array<double, kGenreCount> dur{};
        for (Genre g : order) {
            if (g == Genre::TP) continue;
            dur[idx(g)] = params.durations_s[idx(g)] * (1.0 + params.beat_jitter * clamp_z(normal(rng)));
        }
        dur[idx(Genre::TP)] = record_rr - params.fixed_duration_s();
        dur[idx(Genre::ST)] *= stretch;
        dur[idx(Genre::TP)] *= stretch;
        double beat_length = 0.0;
        for (double d : dur) beat_length += d;
        if (first) {
            start -= beat_length;
            first = false;
        }

        Beat beat;
        double t = start;
        bool inside = start >= 0.0;
        for (Genre g : order) {
            const double end = t + dur[idx(g)];
            // PQ runs from the P peak to the Q valley and ST from the S valley
            // to the T peak; R peaks mid-interval.
            switch (g) {
                case Genre::P: centers.push_back({end, &params.p}); break;
                case Genre::Q: centers.push_back({t, &params.q}); break;
                case Genre::R: centers.push_back({0.5 * (t + end), &params.r}); break;
                case Genre::S: centers.push_back({end, &params.s}); break;
                case Genre::T: centers.push_back({t, &params.t}); break;
                default: break;
            }
            beat[g] = WaveInterval{std::llround(t * fs), std::llround(end * fs)};
            t = end;
        }
        if (inside && std::llround(t * fs) <= count) annotation.beats.push_back(std::move(beat));
        start = t;
    }

    for (const Center& c : centers) {
        const double centre = c.time * fs;
        const double sigma = c.shape->width_s * fs;
        const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(centre - 8.0 * sigma)));
        const auto hi = std::min<std::int64_t>(count - 1, static_cast<std::int64_t>(std::floor(centre + 8.0 * sigma)));
        for (std::int64_t k = lo; k <= hi; ++k) {
            const double z = (static_cast<double>(k) - centre) / sigma;
            record.samples[static_cast<std::size_t>(k)] += c.shape->amplitude * std::exp(-0.5 * z * z);
        }
    }
    if (params.noise_std > 0.0)
        for (double& v : record.samples) v += params.noise_std * normal(rng);

    annotation.record_id = record.id;
    record.annotation = std::move(annotation);
    return record;
}

std::int64_t r_peak_of(const Beat& beat) {
    const auto it = beat.find(Genre::R);
    if (it == beat.end()) fail(ErrorCode::MissingGenre, "beat has no R interval");
    return (it->second.onset + it->second.offset) / 2;
}

std::vector<std::int64_t> detect_r_peaks(std::span<const double> samples, double sample_rate) {
    if (samples.size() < 3) return {};
    const double count = static_cast<double>(samples.size());
    const double mu = std::accumulate(samples.begin(), samples.end(), 0.0) / count;
    const double top = *std::max_element(samples.begin(), samples.end());
    if (!(top > mu)) return {};
    const double threshold = mu + 0.5 * (top - mu);

    std::vector<std::int64_t> candidates;
    for (std::size_t i = 1; i + 1 < samples.size(); ++i)
        if (samples[i] > threshold && samples[i] > samples[i - 1] && samples[i] >= samples[i + 1])
            candidates.push_back(static_cast<std::int64_t>(i));
    std::stable_sort(candidates.begin(), candidates.end(), [&](std::int64_t a, std::int64_t b) {
        return samples[static_cast<std::size_t>(a)] > samples[static_cast<std::size_t>(b)];
    });

    const auto refractory = static_cast<std::int64_t>(std::llround(0.25 * sample_rate));
    std::vector<std::int64_t> peaks;
    for (std::int64_t c : candidates) {
        const bool clear = std::none_of(peaks.begin(), peaks.end(),
                                        [&](std::int64_t p) { return std::llabs(p - c) < refractory; });
        if (clear) peaks.push_back(c);
    }
    std::sort(peaks.begin(), peaks.end());
    return peaks;
}

WaveAnnotation annotate_waves(const EcgRecord& record, const SyntheticParams& layout) {
    if (record.annotation) return *record.annotation;

    const auto peaks = detect_r_peaks(record.samples, record.sample_rate);
    if (peaks.empty()) fail(ErrorCode::NoBeatsDetected, "record " + record.id + ": no R peak found");

    // Nominal boundaries relative to the R centre, in seconds.
    const auto& order = genres_in_time_order();
    std::vector<double> edges{0.0};
    double r_centre = 0.0;
    auto nominal = layout.durations_s;
    nominal[idx(Genre::TP)] = layout.rr_interval_s - layout.fixed_duration_s();
    for (Genre g : order) {
        if (g == Genre::R) r_centre = edges.back() + 0.5 * nominal[idx(g)];
        edges.push_back(edges.back() + nominal[idx(g)]);
    }

    const double fs = record.sample_rate;
    const auto count = static_cast<std::int64_t>(record.samples.size());
    WaveAnnotation annotation;
    annotation.record_id = record.id;
    for (std::size_t k = 0; k < peaks.size(); ++k) {
        double rr = layout.rr_interval_s * fs;
        if (peaks.size() > 1) {
            const std::size_t a = k + 1 < peaks.size() ? k : k - 1;
            rr = static_cast<double>(peaks[a + 1] - peaks[a]);
        }
        const double scale = rr / (layout.rr_interval_s * fs);
        Beat beat;
        bool inside = true;
        for (std::size_t g = 0; g < order.size(); ++g) {
            const double on = static_cast<double>(peaks[k]) + (edges[g] - r_centre) * fs * scale;
            const double off = static_cast<double>(peaks[k]) + (edges[g + 1] - r_centre) * fs * scale;
            const WaveInterval span{std::llround(on), std::llround(off)};
            if (span.onset < 0 || span.offset > count) inside = false;
            beat[order[g]] = span;
        }
        if (inside) annotation.beats.push_back(std::move(beat));
    }
    if (annotation.beats.empty())
        fail(ErrorCode::NoBeatsDetected, "record " + record.id + ": no complete beat around detected peaks");
    return annotation;
}

}  // namespace collo
