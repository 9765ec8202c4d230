#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reid/dataset.hpp"
#include "reid/error.hpp"
#include "reid/rng.hpp"

namespace reid {

/// Flow Energy Profile of a sequence: one motion-energy value per frame
/// transition. `regulated` is empty until regulate_fep has run.
struct FepSignal {
    std::vector<double> raw;
    std::vector<double> regulated;
};

/// One step of the walk: a regulated-FEP maximum and the adjacent minimum.
struct WalkingCycle {
    std::size_t max_index = 0;
    std::size_t min_index = 0;

    std::size_t first() const noexcept { return std::min(max_index, min_index); }
    std::size_t last() const noexcept { return std::max(max_index, min_index); }
    /// Number of frames in the inclusive span.
    std::size_t span_length() const noexcept { return last() - first() + 1; }

    friend bool operator==(const WalkingCycle&, const WalkingCycle&) = default;
};

// ---------------------------------------------------------------------------
// FEP

/// raw[t] = sum over rows >= height/2 of |luma(frame t+1) - luma(frame t)|,
/// luma = 0.299 R + 0.587 G + 0.114 B.
inline FepSignal compute_fep(const FrameSequence& seq) {
    validate_sequence(seq);
    const int w = seq.frames.front().width();
    const int h = seq.frames.front().height();
    const int row0 = h / 2;

    auto lower_luma = [&](const Frame& f) {
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(w) * (h - row0));
        const auto px = f.pixels();
        for (std::size_t i = static_cast<std::size_t>(row0) * w * 3; i < px.size(); i += 3) {
            out.push_back(luma_milli(px[i], px[i + 1], px[i + 2]));
        }
        return out;
    };

    FepSignal sig;
    sig.raw.reserve(seq.frames.size() - 1);
    std::vector<int> prev = lower_luma(seq.frames.front());
    for (std::size_t t = 1; t < seq.frames.size(); ++t) {
        std::vector<int> cur = lower_luma(seq.frames[t]);
        std::int64_t acc = 0;
        for (std::size_t i = 0; i < cur.size(); ++i) acc += std::abs(cur[i] - prev[i]);
        sig.raw.push_back(static_cast<double>(acc) / 1000.0);
        prev = std::move(cur);
    }
    return sig;
}

// ---------------------------------------------------------------------------
// DFT

/// Direct O(n^2) forward DFT, X[k] = sum_t x[t] exp(-2 pi i k t / n).
/// Twiddles are indexed by (k t mod n) so large products stay exact.
inline std::vector<std::complex<double>> dft(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> c(n), s(n);
    for (std::size_t m = 0; m < n; ++m) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
        c[m] = std::cos(angle);
        s[m] = std::sin(angle);
    }
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        double re = 0.0;
        double im = 0.0;
        std::size_t idx = 0;
        for (std::size_t t = 0; t < n; ++t) {
            re += x[t] * c[idx];
            im -= x[t] * s[idx];
            idx += k;
            if (idx >= n) idx -= n;
        }
        out[k] = {re, im};
    }
    return out;
}

/// Positive-frequency bins (1..n/2) ordered by descending magnitude; ties
/// keep the lower frequency first.
inline std::vector<std::size_t> dominant_bins(std::span<const std::complex<double>> spectrum) {
    const std::size_t n = spectrum.size();
    std::vector<std::size_t> bins;
    for (std::size_t k = 1; k <= n / 2; ++k) bins.push_back(k);
    std::stable_sort(bins.begin(), bins.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(spectrum[a]) > std::abs(spectrum[b]);
    });
    return bins;
}

/// Spectrum of `x` zero-padded to `len` samples (len >= x.size()):
/// X[k] = sum_t x[t] exp(-2 pi i k t / len).
inline std::vector<std::complex<double>> padded_dft(std::span<const double> x, std::size_t len) {
    std::vector<double> padded(x.begin(), x.end());
    padded.resize(len, 0.0);
    return dft(padded);
}

/// Settings for turning a raw FEP into a regulated one.
struct FepOptions {
    /// Number of dominant frequencies kept.
    std::size_t keep = 1;
    /// Frequency grid refinement. 1 keeps whole DFT bins of the signal
    /// length; F > 1 searches the zero-padded spectrum (F times finer) for
    /// the `keep` strongest peaks, so periods that do not divide the window
    /// are not snapped to the nearest whole bin.
    std::size_t oversample = 1;
};

/// Frequency refinement used by the detection pipeline.
inline constexpr std::size_t kPipelineOversample = 8;

inline constexpr FepOptions kPipelineFep{1, kPipelineOversample};

/// Smooths a raw FEP by keeping only its dominant frequencies.
///
/// With oversample = 1: subtract the mean, forward DFT, zero every bin except
/// the `keep` largest-magnitude positive-frequency bins and their conjugates,
/// inverse DFT, add the mean back. Keeping every bin reproduces the input.
///
/// With oversample = F > 1 the spectrum is evaluated on the F-times finer grid
/// of the zero-padded signal, the `keep` largest local magnitude peaks in
/// (0, 1/2] are selected, and each contributes the tone
/// (2/n) Re(X(f) exp(2 pi i f t)) over the original n samples. The window
/// mean of the tones is removed before the signal mean is added back.
inline std::vector<double> regulate_fep(std::span<const double> raw, std::size_t keep = 1,
                                        std::size_t oversample = 1) {
    const std::size_t n = raw.size();
    if (n < 4) throw SignalTooShort("FEP needs at least 4 samples, got " + std::to_string(n));
    if (keep < 1) throw InvalidArgument("keep must be >= 1");
    if (oversample < 1) throw InvalidArgument("oversample must be >= 1");

    const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(n);
    std::vector<double> centered(n);
    for (std::size_t t = 0; t < n; ++t) centered[t] = raw[t] - mean;

    const std::size_t len = n * oversample;
    const auto spectrum = padded_dft(centered, len);

    std::vector<std::size_t> bins;
    if (oversample == 1) {
        bins = dominant_bins(spectrum);
    } else {
        for (std::size_t k = 1; k <= len / 2; ++k) {
            const double m = std::abs(spectrum[k]);
            const bool left = m >= std::abs(spectrum[k - 1]);
            const bool right = (k + 1 > len / 2) || m >= std::abs(spectrum[k + 1]);
            if (left && right && m > 0.0) bins.push_back(k);
        }
        std::stable_sort(bins.begin(), bins.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(spectrum[a]) > std::abs(spectrum[b]);
        });
    }
    if (bins.size() > keep) bins.resize(keep);

    std::vector<double> c(len), s(len);
    for (std::size_t m = 0; m < len; ++m) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(len);
        c[m] = std::cos(angle);
        s[m] = std::sin(angle);
    }
    std::vector<double> out(n, 0.0);
    for (std::size_t k : bins) {
        // A bin and its conjugate contribute 2 Re(X_k e^{+i...}); Nyquist is its own conjugate.
        const double weight = (2 * k == len) ? 1.0 : 2.0;
        const double re = spectrum[k].real();
        const double im = spectrum[k].imag();
        std::size_t idx = 0;
        for (std::size_t t = 0; t < n; ++t) {
            out[t] += weight * (re * c[idx] - im * s[idx]);
            idx += k;
            if (idx >= len) idx -= len;
        }
    }
    for (double& v : out) v /= static_cast<double>(n);
    if (oversample > 1) {
        const double drift = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(n);
        for (double& v : out) v -= drift;
    }
    for (double& v : out) v += mean;
    return out;
}

inline std::vector<double> regulate_fep(std::span<const double> raw, const FepOptions& options) {
    return regulate_fep(raw, options.keep, options.oversample);
}

/// compute_fep followed by regulate_fep.
inline FepSignal analyze_fep(const FrameSequence& seq, const FepOptions& options = kPipelineFep) {
    FepSignal sig = compute_fep(seq);
    sig.regulated = regulate_fep(sig.raw, options);
    return sig;
}

// ---------------------------------------------------------------------------
// Extrema and cycles

struct Extremum {
    std::size_t index;
    bool is_max;

    friend bool operator==(const Extremum&, const Extremum&) = default;
};

/// Interior strict local extrema. A flat run counts as one extremum at its
/// midpoint when both outside neighbours are strictly lower (max) or higher (min).
inline std::vector<Extremum> find_extrema(std::span<const double> signal) {
    std::vector<Extremum> out;
    const std::size_t n = signal.size();
    std::size_t a = 0;
    while (a < n) {
        std::size_t b = a;
        while (b + 1 < n && signal[b + 1] == signal[a]) ++b;
        if (a > 0 && b + 1 < n) {
            const double v = signal[a];
            const std::size_t mid = a + (b - a) / 2;
            if (v > signal[a - 1] && v > signal[b + 1]) {
                out.push_back({mid, true});
            } else if (v < signal[a - 1] && v < signal[b + 1]) {
                out.push_back({mid, false});
            }
        }
        a = b + 1;
    }
    return out;
}

/// Every pair of temporally adjacent extrema (max then min, or min then max)
/// is one walking cycle.
inline std::vector<WalkingCycle> detect_cycles(std::span<const double> regulated) {
    if (regulated.empty()) throw InvalidArgument("regulated FEP is empty");
    const auto ext = find_extrema(regulated);
    std::vector<WalkingCycle> cycles;
    for (std::size_t i = 0; i + 1 < ext.size(); ++i) {
        const Extremum& a = ext[i];
        const Extremum& b = ext[i + 1];
        if (a.is_max == b.is_max) continue;
        const Extremum& mx = a.is_max ? a : b;
        const Extremum& mn = a.is_max ? b : a;
        cycles.push_back({mx.index, mn.index});
    }
    if (cycles.empty()) {
        throw NoCycleFound("regulated FEP has no adjacent maximum/minimum pair (" +
                           std::to_string(ext.size()) + " extrema)");
    }
    return cycles;
}

// ---------------------------------------------------------------------------
// Sampling

struct SamplingStrategy {
    enum class Kind { representative, random_whole, equal_segments, all_frames, random_halves };

    Kind kind = Kind::representative;
    std::size_t k = 4;

    static SamplingStrategy representative(std::size_t k = 4) { return {Kind::representative, k}; }
    static SamplingStrategy random_whole(std::size_t k = 4) { return {Kind::random_whole, k}; }
    static SamplingStrategy equal_segments(std::size_t k = 4) { return {Kind::equal_segments, k}; }
    static SamplingStrategy all_frames() { return {Kind::all_frames, 1}; }
    static SamplingStrategy random_halves(std::size_t k = 4) { return {Kind::random_halves, k}; }

    /// True for strategies that consume detected cycles.
    bool needs_cycles() const noexcept { return kind == Kind::representative; }

    friend bool operator==(const SamplingStrategy&, const SamplingStrategy&) = default;
};

inline std::string to_string(SamplingStrategy::Kind kind) {
    switch (kind) {
        case SamplingStrategy::Kind::representative: return "representative";
        case SamplingStrategy::Kind::random_whole: return "random-whole";
        case SamplingStrategy::Kind::equal_segments: return "equal-segments";
        case SamplingStrategy::Kind::all_frames: return "all";
        case SamplingStrategy::Kind::random_halves: return "random-halves";
    }
    return "?";
}

inline SamplingStrategy::Kind parse_strategy_kind(const std::string& name) {
    using K = SamplingStrategy::Kind;
    for (K k : {K::representative, K::random_whole, K::equal_segments, K::all_frames, K::random_halves}) {
        if (to_string(k) == name) return k;
    }
    throw InvalidArgument("unknown sampling strategy '" + name + "'");
}

using FrameGroups = std::vector<std::vector<std::size_t>>;

namespace detail {

inline std::vector<std::size_t> draw_sorted(RngHandle& rng, std::size_t begin, std::size_t count, std::size_t k) {
    auto picks = rng.sample_without_replacement(count, k);
    for (auto& p : picks) p += begin;
    std::sort(picks.begin(), picks.end());
    return picks;
}

inline void require_frames(std::size_t needed, std::size_t available, const std::string& what) {
    if (needed > available) {
        throw InsufficientFrames(what + ": needs " + std::to_string(needed) + " frames, only " +
                                 std::to_string(available) + " available");
    }
}

}  // namespace detail

/// K frame indices equally spaced from max_index to min_index (both ends
/// included for K >= 2; K = 1 gives max_index), returned sorted.
inline std::vector<std::size_t> representative_frames(const WalkingCycle& cycle, std::size_t k) {
    if (k < 1) throw InvalidArgument("K must be >= 1");
    detail::require_frames(k, cycle.span_length(), "representative sampling");
    std::vector<std::size_t> out;
    out.reserve(k);
    if (k == 1) {
        out.push_back(cycle.max_index);
        return out;
    }
    const double len = static_cast<double>(cycle.span_length() - 1);
    const bool forward = cycle.min_index >= cycle.max_index;
    for (std::size_t j = 0; j < k; ++j) {
        const auto step = static_cast<std::size_t>(std::lround(static_cast<double>(j) * len / static_cast<double>(k - 1)));
        out.push_back(forward ? cycle.max_index + step : cycle.max_index - step);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Frame-index groups for a sequence of `frame_count` frames.
///
/// representative: one group per cycle. random_whole and equal_segments draw
/// one group per detected cycle (at least one). all_frames yields a single
/// group. random_halves yields one group per half of the sequence, with
/// K - K/2 draws from the first half and K/2 from the second.
inline FrameGroups sample_frames(std::size_t frame_count, std::span<const WalkingCycle> cycles,
                                 const SamplingStrategy& strategy, RngHandle& rng) {
    using K = SamplingStrategy::Kind;
    if (strategy.kind != K::all_frames && strategy.k < 1) throw InvalidArgument("K must be >= 1");
    FrameGroups groups;
    const std::size_t repeats = std::max<std::size_t>(1, cycles.size());

    switch (strategy.kind) {
        case K::representative:
            if (cycles.empty()) throw NoCycleFound("representative sampling needs at least one cycle");
            for (const auto& c : cycles) {
                if (c.last() >= frame_count) throw InvalidArgument("cycle lies outside the sequence");
                groups.push_back(representative_frames(c, strategy.k));
            }
            break;
        case K::random_whole:
            detail::require_frames(strategy.k, frame_count, "random sampling");
            for (std::size_t r = 0; r < repeats; ++r) {
                groups.push_back(detail::draw_sorted(rng, 0, frame_count, strategy.k));
            }
            break;
        case K::equal_segments:
            detail::require_frames(strategy.k, frame_count, "segment sampling");
            for (std::size_t r = 0; r < repeats; ++r) {
                std::vector<std::size_t> g;
                for (std::size_t i = 0; i < strategy.k; ++i) {
                    const std::size_t b = i * frame_count / strategy.k;
                    const std::size_t e = (i + 1) * frame_count / strategy.k;
                    g.push_back(b + static_cast<std::size_t>(rng.uniform_index(e - b)));
                }
                groups.push_back(std::move(g));
            }
            break;
        case K::all_frames: {
            std::vector<std::size_t> g(frame_count);
            std::iota(g.begin(), g.end(), std::size_t{0});
            groups.push_back(std::move(g));
            break;
        }
        case K::random_halves: {
            const std::size_t mid = frame_count / 2;
            const std::size_t first_k = strategy.k - strategy.k / 2;
            const std::size_t second_k = strategy.k / 2;
            detail::require_frames(first_k, mid, "random-halves sampling (first half)");
            detail::require_frames(second_k, frame_count - mid, "random-halves sampling (second half)");
            groups.push_back(detail::draw_sorted(rng, 0, mid, first_k));
            if (second_k > 0) groups.push_back(detail::draw_sorted(rng, mid, frame_count - mid, second_k));
            break;
        }
    }
    return groups;
}

inline FrameGroups sample_frames(const FrameSequence& seq, std::span<const WalkingCycle> cycles,
                                 const SamplingStrategy& strategy, RngHandle& rng) {
    return sample_frames(seq.frames.size(), cycles, strategy, rng);
}

}  // namespace reid
