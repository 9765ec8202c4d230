#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "reid/cycle.hpp"
#include "reid/dataset.hpp"
#include "reid/error.hpp"
#include "reid/image.hpp"
#include "reid/image_io.hpp"
#include "reid/rng.hpp"

namespace reid {

/// Parameters of the synthetic two-camera walking dataset.
struct SynthSpec {
    std::size_t identities = 10;
    std::size_t frames = 64;
    /// Period of the lower-body motion energy, in frames (one step).
    std::size_t period = 24;
    int width = 48;
    int height = 96;
    /// Peak amplitude of per-channel uniform pixel noise, as a fraction of 255.
    double noise = 0.1;
    std::uint64_t seed = 1;
};

/// Appearance of one synthetic identity.
struct Signature {
    Rgb top;
    Rgb pants;
    Rgb accessory;
};

struct SynthData {
    Dataset dataset;
    std::map<std::pair<std::string, std::string>, Signature> signatures;  // (camera, person)
    /// Interior FEP extrema (transition indices) per (camera, person).
    std::map<std::pair<std::string, std::string>, std::vector<Extremum>> truth;
};

inline std::string synth_person_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "p%03zu", i + 1);
    return buf;
}

namespace detail {

inline Rgb hsv(double hue_deg, double sat, double val) {
    const double c = val * sat;
    const double h = hue_deg / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h) % 6) {
        case 0: r = c, g = x; break;
        case 1: r = x, g = c; break;
        case 2: g = c, b = x; break;
        case 3: g = x, b = c; break;
        case 4: r = x, b = c; break;
        default: r = c, b = x; break;
    }
    const double m = val - c;
    auto q = [&](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * (v + m))); };
    return {q(r), q(g), q(b)};
}

/// Eight hues spaced 45 degrees apart, offset half a step so each sits in
/// the middle of an extractor hue bin.
inline double palette_hue(std::size_t i) { return 22.5 + 45.0 * static_cast<double>(i % 8); }

inline constexpr std::size_t kPaletteSize = 8;

/// Fraction of full swing beyond which the accessory shows.
inline constexpr double kAccessoryThreshold = 0.85;
/// Clothing uses only the first few palette hues, so identities that share
/// clothes differ mainly in the accessory, which only stride extremes show.
inline constexpr std::size_t kClothingHues = 4;

inline constexpr std::array<Rgb, 2> kBackground = {{{200, 200, 200}, {190, 195, 205}}};
/// Camera colour transfer: per-camera illumination gain, then an additive tint.
inline constexpr std::array<double, 2> kCameraGain = {1.0, 0.88};
inline constexpr std::array<std::array<int, 3>, 2> kCameraTint = {{{0, 0, 0}, {8, 0, -8}}};
inline constexpr Rgb kSkin = {224, 172, 125};

inline Rgb jitter(const Rgb& c, RngHandle& rng, int amount) {
    Rgb out;
    for (int i = 0; i < 3; ++i) {
        out[i] = static_cast<std::uint8_t>(std::clamp<int>(c[i] + static_cast<int>(rng.uniform_int(-amount, amount)), 0, 255));
    }
    return out;
}

/// Leg offset for continuous time u. The motion rate (1 + cos(2 pi (u - c) / P)) / 2
/// integrates to F(u); the offset is a triangle wave in F that turns where the
/// rate is zero, so per-frame displacement follows the raised cosine.
inline double leg_offset(double u, double centre, double period, double amplitude) {
    const double x = u - centre;
    const double f = x / 2.0 + period / (4.0 * std::numbers::pi) * std::sin(2.0 * std::numbers::pi * x / period);
    const double z = f / (period / 2.0);  // 0 at overlap, +-0.5 at the extremes
    double w = std::fmod(z + 0.5, 2.0);
    if (w < 0) w += 2.0;
    // w in [0, 2): rises from -1 to 1 on [0, 1), falls back on [1, 2).
    const double tri = w < 1.0 ? 2.0 * w - 1.0 : 3.0 - 2.0 * w;
    return amplitude * tri;
}

/// Horizontal coverage of pixel column j by the span [a, b).
inline double coverage(int j, double a, double b) {
    return std::max(0.0, std::min(static_cast<double>(j + 1), b) - std::max(static_cast<double>(j), a));
}

}  // namespace detail

/// Two sequences per identity (cameras "cam1" and "cam2").
///
/// Identities get distinct (top, pants, accessory) palette triples. Each
/// frame shows a head, a torso in the identity's top colour, and two legs
/// in the pants colour on a camera-specific background. The legs
/// scissor horizontally so the lower-half luma change per frame is a raised
/// cosine of period `period`, with maxima at transitions phase + kP and
/// minima at phase + P/2 + kP. An accessory patch in the identity's
/// accessory colour is visible on the torso only near the stride extremes
/// (|offset| > 0.85 of full swing). Camera 2 applies a fixed global colour
/// shift (gain 0.88, then a warm tint). Every channel then receives
/// independent uniform noise of peak amplitude noise * 255.
inline SynthData generate_synthetic(const SynthSpec& spec) {
    if (spec.period < 4) throw InvalidArgument("synthetic period must be >= 4 frames");
    if (spec.frames < 2 * spec.period) throw InvalidArgument("synthetic sequences need at least two periods");
    if (spec.identities < 1) throw InvalidArgument("synthetic dataset needs at least one identity");
    if (spec.width < 16 || spec.height < 32) throw InvalidArgument("synthetic frames must be at least 16x32");
    if (spec.noise < 0.0) throw InvalidArgument("noise amplitude must be >= 0");

    RngHandle id_rng(derive_seed(spec.seed, 0));
    const double W = spec.width;
    const double H = spec.height;
    const double P = static_cast<double>(spec.period);

    const double leg_w = W / 6.0;
    const double swing = W / 8.0;
    const double gap = W / 12.0;
    const double left_rest = W / 2.0 - gap / 2.0 - leg_w - swing;
    const double right_rest = W / 2.0 + gap / 2.0 + swing;
    const int leg_top = static_cast<int>(0.52 * H);
    const int leg_bottom = static_cast<int>(0.96 * H);
    const int torso_top = static_cast<int>(0.15 * H);
    const int torso_bottom = spec.height / 2;
    const int head_top = static_cast<int>(0.03 * H);
    const int acc_top = static_cast<int>(0.24 * H);
    const int acc_bottom = static_cast<int>(0.42 * H);
    const int acc_left = static_cast<int>(0.52 * W);
    const int acc_right = static_cast<int>(0.75 * W);
    const double noise_amp = spec.noise * 255.0;

    // Distinct (top, pants, accessory) palette triples, dealt in rounds: each
    // round uses every clothing pair once, so the first 16 identities never
    // share clothes and later ones differ from earlier look-alikes by accessory.
    std::vector<std::array<std::size_t, 3>> combos;
    const std::size_t offset = id_rng.uniform_index(detail::kPaletteSize);
    for (std::size_t round = 0; round < detail::kPaletteSize; ++round) {
        std::vector<std::array<std::size_t, 3>> batch;
        for (std::size_t t = 0; t < detail::kClothingHues; ++t) {
            for (std::size_t p = 0; p < detail::kClothingHues; ++p) {
                batch.push_back({t, p, (t * detail::kClothingHues + p + round + offset) % detail::kPaletteSize});
            }
        }
        id_rng.shuffle(batch);
        combos.insert(combos.end(), batch.begin(), batch.end());
    }

    SynthData out;
    std::vector<FrameSequence> seqs;
    for (std::size_t id = 0; id < spec.identities; ++id) {
        const auto [ti, pi, ai] = combos[id % combos.size()];
        Signature sig;
        sig.top = detail::jitter(detail::hsv(detail::palette_hue(ti), 0.8, 0.85), id_rng, 8);
        sig.pants = detail::jitter(detail::hsv(detail::palette_hue(pi), 0.6, 0.7), id_rng, 8);
        sig.accessory = detail::jitter(detail::hsv(detail::palette_hue(ai), 0.95, 0.95), id_rng, 8);
        const std::string person = synth_person_id(id);

        for (int cam = 0; cam < 2; ++cam) {
            const std::string camera = "cam" + std::to_string(cam + 1);
            RngHandle rng(derive_seed(spec.seed, 1 + 2 * id + static_cast<std::uint64_t>(cam)));
            const auto phase = static_cast<std::size_t>(rng.uniform_index(spec.period));
            const double centre = static_cast<double>(phase) + 0.5;
            const Rgb bg = detail::kBackground[cam];
            const double gain = detail::kCameraGain[cam];
            const auto& tint = detail::kCameraTint[cam];

            FrameSequence seq;
            seq.person_id = person;
            seq.camera_id = camera;
            for (std::size_t t = 0; t < spec.frames; ++t) {
                const double offset = detail::leg_offset(static_cast<double>(t), centre, P, swing);
                const bool accessory = std::abs(offset) > detail::kAccessoryThreshold * swing;
                const double l0 = left_rest + offset;
                const double r0 = right_rest - offset;

                std::vector<std::uint8_t> px(static_cast<std::size_t>(spec.width) * spec.height * 3);
                for (int y = 0; y < spec.height; ++y) {
                    for (int x = 0; x < spec.width; ++x) {
                        std::array<double, 3> c = {double(bg[0]), double(bg[1]), double(bg[2])};
                        auto paint = [&](const Rgb& col, double cov) {
                            for (int k = 0; k < 3; ++k) c[k] = c[k] * (1.0 - cov) + col[k] * cov;
                        };
                        if (y >= head_top && y < torso_top - 1 && x >= spec.width * 2 / 5 && x < spec.width * 3 / 5) {
                            paint(detail::kSkin, 1.0);
                        }
                        if (y >= torso_top && y < torso_bottom && x >= spec.width / 4 && x < spec.width * 3 / 4) {
                            paint(sig.top, 1.0);
                            if (accessory && y >= acc_top && y < acc_bottom && x >= acc_left && x < acc_right) {
                                paint(sig.accessory, 1.0);
                            }
                        }
                        if (y >= leg_top && y < leg_bottom) {
                            const double cov = std::min(1.0, detail::coverage(x, l0, l0 + leg_w) +
                                                                 detail::coverage(x, r0, r0 + leg_w));
                            if (cov > 0.0) paint(sig.pants, cov);
                        }
                        const std::size_t o = (static_cast<std::size_t>(y) * spec.width + x) * 3;
                        for (int k = 0; k < 3; ++k) {
                            double v = gain * c[k] + tint[k];
                            if (noise_amp > 0.0) v += rng.uniform(-noise_amp, noise_amp);
                            px[o + k] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
                        }
                    }
                }
                seq.frames.emplace_back(spec.width, spec.height, std::move(px));
                seq.frame_numbers.push_back(static_cast<long>(t));
            }

            std::vector<Extremum> truth;
            const std::size_t transitions = spec.frames - 1;
            const auto in_interior = [&](long i) { return i >= 1 && i + 1 < static_cast<long>(transitions); };
            for (long k = -1; static_cast<long>(phase) + k * static_cast<long>(spec.period) < static_cast<long>(transitions); ++k) {
                const long mx = static_cast<long>(phase) + k * static_cast<long>(spec.period);
                const long mn = mx + static_cast<long>(spec.period / 2);
                if (in_interior(mx)) truth.push_back({static_cast<std::size_t>(mx), true});
                if (in_interior(mn)) truth.push_back({static_cast<std::size_t>(mn), false});
            }
            std::sort(truth.begin(), truth.end(), [](const Extremum& a, const Extremum& b) { return a.index < b.index; });
            out.truth[{camera, person}] = std::move(truth);
            out.signatures[{camera, person}] = sig;
            seqs.push_back(std::move(seq));
        }
    }
    out.dataset = Dataset(std::move(seqs));
    return out;
}

/// Writes `<root>/<camera>/<person>/<t>.png` plus `ground_truth.csv`
/// (`camera,person,transition_index,kind`).
inline void write_synthetic(const std::filesystem::path& root, const SynthData& data) {
    namespace fs = std::filesystem;
    for (const auto& seq : data.dataset.sequences()) {
        const fs::path dir = root / seq.camera_id / seq.person_id;
        fs::create_directories(dir);
        for (std::size_t i = 0; i < seq.frames.size(); ++i) {
            write_png(dir / (std::to_string(seq.frame_numbers[i]) + ".png"), seq.frames[i]);
        }
    }
    std::ofstream gt(root / "ground_truth.csv");
    gt << "camera,person,transition_index,kind\n";
    for (const auto& [key, extrema] : data.truth) {
        for (const auto& e : extrema) {
            gt << key.first << ',' << key.second << ',' << e.index << ',' << (e.is_max ? "max" : "min") << '\n';
        }
    }
}

}  // namespace reid
