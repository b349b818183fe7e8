#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace collo {

enum class Label : int { non_eating = 0, eating = 1 };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

// The 15 wave genres, in the order of the attribute vocabulary.
enum class Genre : int {
    TP, ST, P_onP, PQ, P, R, S, T, Q, TT_off, head, Tail, QR, RS, other
};
inline constexpr std::size_t kGenreCount = 15;

std::string_view to_string(Genre genre);
Genre parse_genre(std::string_view text);
const std::array<Genre, kGenreCount>& all_genres();

// Genres in the order they occur inside one beat.
const std::array<Genre, kGenreCount>& genres_in_time_order();

/// Half-open sample interval [onset, offset).
struct WaveInterval {
    std::int64_t onset = 0;
    std::int64_t offset = 0;

    std::int64_t length() const { return offset - onset; }
    bool operator==(const WaveInterval&) const = default;
};

using Beat = std::map<Genre, WaveInterval>;

struct WaveAnnotation {
    std::string record_id;  // empty when unknown
    std::vector<Beat> beats;

    bool operator==(const WaveAnnotation&) const = default;
};

/// Throws InvalidParams when a beat has overlapping or out-of-order intervals.
void validate_annotation(const WaveAnnotation& annotation);

struct EcgRecord {
    std::string id;
    double sample_rate = 0.0;
    std::vector<double> samples;
    Label label = Label::non_eating;
    std::optional<WaveAnnotation> annotation;

    void validate() const;
};

struct SegmentSeries {
    std::string record_id;
    std::vector<std::vector<double>> segments;
    std::size_t window = 0;  // samples per segment

    std::size_t n() const { return segments.size(); }
};

enum class FeatureKind { mean, std, zero_crossing_rate };

std::string_view to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view text);

/// Splits the record into n contiguous equal windows of floor(len/n)
/// samples; the remainder at the end is dropped.
SegmentSeries segment(const EcgRecord& record, std::size_t n);

double extract_feature(std::span<const double> window, FeatureKind kind);

/// Returns the record with samples z-scored (mean 0, population std 1).
/// A constant record is only mean-centred.
EcgRecord normalize(EcgRecord record);

struct WaveShape {
    double amplitude = 0.0;
    double width_s = 0.0;  // Gaussian standard deviation in seconds
};

struct SyntheticParams {
    double sample_rate = 250.0;
    double duration_s = 10.0;
    double rr_interval_s = 0.833;
    // Nominal duration of every genre except TP, which absorbs the rest of
    // the RR interval. Indexed by static_cast<int>(Genre).
    std::array<double, kGenreCount> durations_s = default_durations();
    WaveShape p{0.15, 0.020};
    WaveShape q{-0.15, 0.008};
    WaveShape r{1.00, 0.010};
    WaveShape s{-0.25, 0.008};
    WaveShape t{0.30, 0.035};
    // Eating records stretch ST and TP by (1 + class_effect).
    double class_effect = 0.15;
    double noise_std = 0.0;
    // Record-level RR variability (fractional std, realised through TP).
    double rr_jitter = 0.0;
    // Per-beat, per-genre multiplicative duration jitter (fractional std).
    double beat_jitter = 0.0;
    std::uint64_t rng_seed = 0;

    static std::array<double, kGenreCount> default_durations();
    double fixed_duration_s() const;  // sum over all genres but TP
    void validate() const;
};

/// Deterministic in (params, label, seed). The returned record carries the
/// exact per-beat genre intervals of every beat lying fully inside it.
EcgRecord synthesize_ecg(const SyntheticParams& params, Label label, std::uint64_t seed);

/// R-peak sample indices found by thresholded local-maximum search.
std::vector<std::int64_t> detect_r_peaks(std::span<const double> samples, double sample_rate);

/// Returns the record's own annotation if present, otherwise places genre
/// boundaries around detected R peaks by scaling `layout`'s nominal beat to
/// the local RR interval.
WaveAnnotation annotate_waves(const EcgRecord& record, const SyntheticParams& layout = {});

/// Sample index of the R-wave centre of a beat.
std::int64_t r_peak_of(const Beat& beat);

}  // namespace collo
