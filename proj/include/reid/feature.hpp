#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "reid/cycle.hpp"
#include "reid/dataset.hpp"
#include "reid/error.hpp"
#include "reid/image.hpp"
#include "reid/rng.hpp"

namespace reid {

using FeatureVector = std::vector<float>;

/// Pooled descriptor of one frame group (a walking cycle or a tracklet half).
struct CycleDescriptor {
    FeatureVector values;
    std::string person_id;
    std::string camera_id;
    std::size_t ordinal = 0;

    friend bool operator==(const CycleDescriptor&, const CycleDescriptor&) = default;
};

enum class PoolingMode { max, average, first_frame };

inline std::string to_string(PoolingMode m) {
    switch (m) {
        case PoolingMode::max: return "max";
        case PoolingMode::average: return "avg";
        case PoolingMode::first_frame: return "first";
    }
    return "?";
}

inline PoolingMode parse_pooling(const std::string& name) {
    if (name == "max") return PoolingMode::max;
    if (name == "avg" || name == "average") return PoolingMode::average;
    if (name == "first") return PoolingMode::first_frame;
    throw InvalidArgument("unknown pooling mode '" + name + "'");
}

// ---------------------------------------------------------------------------
// Extractors

/// Per-frame feature extractor. Implementations must be deterministic and
/// safe to call concurrently.
class Extractor {
public:
    virtual ~Extractor() = default;
    virtual std::size_t dim() const = 0;
    virtual FeatureVector extract(const Frame& frame) const = 0;

    /// Features for frame `i` of `seq`. Extractors keyed by sequence
    /// position rather than pixel content override this.
    virtual FeatureVector extract_at(const FrameSequence& seq, std::size_t i) const {
        return extract(seq.frames.at(i));
    }
};

/// Built-in colour + texture descriptor.
///
/// The frame is rescaled to 64x128 (width x height) and cut into 6
/// horizontal stripes (row r belongs to stripe r*6/128). Each stripe gets a
/// 64-bin joint hue/saturation histogram (8 hue x 8 saturation, one vote per
/// pixel, normalised to sum 1) and a 16-bin unsigned gradient-orientation
/// histogram over [0, 180) degrees from 3x3 Sobel responses on luma,
/// magnitude weighted and normalised to sum 1. The concatenated 80 values are
/// L2-normalised per stripe; an all-zero stripe stays zero. dim = 480.
class HandcraftedExtractor final : public Extractor {
public:
    static constexpr int kWidth = 64;
    static constexpr int kHeight = 128;
    static constexpr int kStripes = 6;
    static constexpr int kHueBins = 8;
    static constexpr int kSatBins = 8;
    static constexpr int kColorBins = kHueBins * kSatBins;
    static constexpr int kOrientBins = 16;
    static constexpr int kStripeDim = kColorBins + kOrientBins;
    static constexpr std::size_t kDim = static_cast<std::size_t>(kStripes) * kStripeDim;

    /// Unnormalised per-stripe histograms: pixel counts and summed gradient magnitudes.
    struct Histograms {
        std::array<std::array<double, kColorBins>, kStripes> color{};
        std::array<std::array<double, kOrientBins>, kStripes> orientation{};
    };

    std::size_t dim() const override { return kDim; }

    static int stripe_of_row(int row) noexcept { return row * kStripes / kHeight; }

    static int color_bin(Rgb px) noexcept {
        const int r = px[0], g = px[1], b = px[2];
        const int mx = std::max({r, g, b});
        const int mn = std::min({r, g, b});
        double hue = 0.0;
        double sat = 0.0;
        if (mx > 0) sat = static_cast<double>(mx - mn) / mx;
        if (mx != mn) {
            const double d = mx - mn;
            if (mx == r) {
                hue = 60.0 * std::fmod((g - b) / d, 6.0);
            } else if (mx == g) {
                hue = 60.0 * ((b - r) / d + 2.0);
            } else {
                hue = 60.0 * ((r - g) / d + 4.0);
            }
            if (hue < 0.0) hue += 360.0;
        }
        const int hb = std::min(kHueBins - 1, static_cast<int>(hue / (360.0 / kHueBins)));
        const int sb = std::min(kSatBins - 1, static_cast<int>(sat * kSatBins));
        return hb * kSatBins + sb;
    }

    static Histograms histograms(const Frame& input) {
        const Frame f = rescale_frame(input, kWidth, kHeight);
        Histograms hist;

        std::vector<double> lum(static_cast<std::size_t>(kWidth) * kHeight);
        for (int y = 0; y < kHeight; ++y) {
            for (int x = 0; x < kWidth; ++x) {
                const Rgb px = f.rgb(x, y);
                lum[static_cast<std::size_t>(y) * kWidth + x] = luma(px[0], px[1], px[2]);
                hist.color[stripe_of_row(y)][color_bin(px)] += 1.0;
            }
        }

        auto L = [&](int x, int y) {
            x = std::clamp(x, 0, kWidth - 1);
            y = std::clamp(y, 0, kHeight - 1);
            return lum[static_cast<std::size_t>(y) * kWidth + x];
        };
        for (int y = 0; y < kHeight; ++y) {
            for (int x = 0; x < kWidth; ++x) {
                const double gx = (L(x + 1, y - 1) + 2 * L(x + 1, y) + L(x + 1, y + 1)) -
                                  (L(x - 1, y - 1) + 2 * L(x - 1, y) + L(x - 1, y + 1));
                const double gy = (L(x - 1, y + 1) + 2 * L(x, y + 1) + L(x + 1, y + 1)) -
                                  (L(x - 1, y - 1) + 2 * L(x, y - 1) + L(x + 1, y - 1));
                const double mag = std::hypot(gx, gy);
                if (mag == 0.0) continue;
                double theta = std::atan2(gy, gx);
                if (theta < 0.0) theta += std::numbers::pi;
                if (theta >= std::numbers::pi) theta -= std::numbers::pi;
                const int bin = std::min(kOrientBins - 1, static_cast<int>(theta / (std::numbers::pi / kOrientBins)));
                hist.orientation[stripe_of_row(y)][bin] += mag;
            }
        }
        return hist;
    }

    FeatureVector extract(const Frame& frame) const override {
        const Histograms h = histograms(frame);
        FeatureVector out(kDim, 0.0f);
        for (int s = 0; s < kStripes; ++s) {
            std::array<double, kStripeDim> v{};
            double color_total = 0.0;
            double orient_total = 0.0;
            for (double c : h.color[s]) color_total += c;
            for (double o : h.orientation[s]) orient_total += o;
            for (int i = 0; i < kColorBins; ++i) v[i] = color_total > 0 ? h.color[s][i] / color_total : 0.0;
            for (int i = 0; i < kOrientBins; ++i) {
                v[kColorBins + i] = orient_total > 0 ? h.orientation[s][i] / orient_total : 0.0;
            }
            double norm = 0.0;
            for (double x : v) norm += x * x;
            norm = std::sqrt(norm);
            if (norm == 0.0) continue;
            for (int i = 0; i < kStripeDim; ++i) {
                out[static_cast<std::size_t>(s) * kStripeDim + i] = static_cast<float>(v[i] / norm);
            }
        }
        return out;
    }
};

/// Key of one frame in an external feature file.
struct FrameKey {
    std::string person_id;
    std::string camera_id;
    long frame_index = 0;

    friend auto operator<=>(const FrameKey&, const FrameKey&) = default;
};

using FeatureMap = std::map<FrameKey, FeatureVector>;

/// Looks up precomputed per-frame features by (person, camera, frame number).
class ExternalExtractor final : public Extractor {
public:
    ExternalExtractor(FeatureMap features, std::size_t dim) : features_(std::move(features)), dim_(dim) {}

    std::size_t dim() const override { return dim_; }

    FeatureVector extract(const Frame&) const override {
        throw InvalidArgument("external features are keyed by sequence position, not pixel content");
    }

    FeatureVector extract_at(const FrameSequence& seq, std::size_t i) const override {
        const long number = seq.frame_numbers.empty() ? static_cast<long>(i) : seq.frame_numbers.at(i);
        const auto it = features_.find({seq.person_id, seq.camera_id, number});
        if (it == features_.end()) {
            throw NotFound("no external feature for " + seq.person_id + "," + seq.camera_id + "," +
                           std::to_string(number));
        }
        return it->second;
    }

private:
    FeatureMap features_;
    std::size_t dim_;
};

// ---------------------------------------------------------------------------
// Pooling

inline FeatureVector pool(std::span<const FeatureVector> features, PoolingMode mode) {
    if (features.empty()) throw EmptyPool("cannot pool an empty feature list");
    const std::size_t d = features.front().size();
    for (const auto& f : features) {
        if (f.size() != d) {
            throw DimMismatch("pooled features have dims " + std::to_string(d) + " and " + std::to_string(f.size()));
        }
    }
    switch (mode) {
        case PoolingMode::max: {
            FeatureVector out = features.front();
            for (const auto& f : features.subspan(1)) {
                for (std::size_t k = 0; k < d; ++k) out[k] = std::max(out[k], f[k]);
            }
            return out;
        }
        case PoolingMode::average: {
            std::vector<double> acc(d, 0.0);
            for (const auto& f : features) {
                for (std::size_t k = 0; k < d; ++k) acc[k] += f[k];
            }
            FeatureVector out(d);
            for (std::size_t k = 0; k < d; ++k) {
                out[k] = static_cast<float>(acc[k] / static_cast<double>(features.size()));
            }
            return out;
        }
        case PoolingMode::first_frame:
            return features.front();
    }
    return {};
}

// ---------------------------------------------------------------------------
// FVEC files: "FVEC1\0", u32 count, u32 dim, count*dim f32, all little-endian.
// Sidecar `<path>.idx` holds one `person_id,camera_id,frame_index` line per row.

namespace detail {

inline constexpr char kFvecMagic[6] = {'F', 'V', 'E', 'C', '1', '\0'};

inline void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::filesystem::path fvec_index_path(const std::filesystem::path& fvec) {
    return std::filesystem::path(fvec.string() + ".idx");
}

/// Writes vectors and their keys. All vectors must share one dim.
inline void write_fvec(const std::filesystem::path& path, std::span<const FeatureVector> vectors,
                       std::span<const FrameKey> keys) {
    if (vectors.size() != keys.size()) throw InvalidArgument("FVEC rows and keys differ in count");
    const std::size_t dim = vectors.empty() ? 0 : vectors.front().size();
    std::string buf(detail::kFvecMagic, sizeof detail::kFvecMagic);
    detail::put_u32(buf, static_cast<std::uint32_t>(vectors.size()));
    detail::put_u32(buf, static_cast<std::uint32_t>(dim));
    buf.reserve(buf.size() + vectors.size() * dim * 4);
    for (const auto& v : vectors) {
        if (v.size() != dim) throw DimMismatch("FVEC rows must share one dim");
        for (float x : v) detail::put_u32(buf, std::bit_cast<std::uint32_t>(x));
    }
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("IoError", "cannot write " + path.string());
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    std::ofstream idx(fvec_index_path(path));
    if (!idx) throw Error("IoError", "cannot write " + fvec_index_path(path).string());
    for (const auto& k : keys) idx << k.person_id << ',' << k.camera_id << ',' << k.frame_index << '\n';
}

struct FvecData {
    std::uint32_t dim = 0;
    std::vector<FeatureVector> vectors;
    std::vector<FrameKey> keys;
};

/// Reads an FVEC payload and its sidecar index. Missing or mismatched index
/// files and any truncation are FormatError; a dim other than
/// `expected_dim` (when nonzero) is DimMismatch.
inline FvecData read_fvec(const std::filesystem::path& path, std::size_t expected_dim = 0) {
    const auto bytes = detail::read_file_bytes(path);
    const std::string name = path.string();
    if (bytes.size() < 14 || std::memcmp(bytes.data(), detail::kFvecMagic, 6) != 0) {
        throw FormatError(name + ": missing FVEC1 header");
    }
    FvecData data;
    const std::uint32_t count = detail::get_u32(bytes.data() + 6);
    data.dim = detail::get_u32(bytes.data() + 10);
    const std::uint64_t payload = static_cast<std::uint64_t>(count) * data.dim * 4;
    if (bytes.size() - 14 != payload) {
        throw FormatError(name + ": payload is " + std::to_string(bytes.size() - 14) + " bytes, header implies " +
                          std::to_string(payload));
    }
    if (expected_dim != 0 && data.dim != expected_dim) {
        throw DimMismatch(name + ": dim " + std::to_string(data.dim) + ", expected " + std::to_string(expected_dim));
    }
    data.vectors.resize(count);
    const unsigned char* p = bytes.data() + 14;
    for (auto& v : data.vectors) {
        v.resize(data.dim);
        for (auto& x : v) {
            x = std::bit_cast<float>(detail::get_u32(p));
            p += 4;
        }
    }

    std::ifstream idx(fvec_index_path(path));
    if (!idx) throw FormatError(name + ": missing index file " + fvec_index_path(path).string());
    std::string line;
    while (std::getline(idx, line)) {
        line = detail::trim(line);
        if (line.empty()) continue;
        std::stringstream ss(line);
        FrameKey key;
        std::string number;
        if (!std::getline(ss, key.person_id, ',') || !std::getline(ss, key.camera_id, ',') ||
            !std::getline(ss, number)) {
            throw FormatError(name + ": bad index line '" + line + "'");
        }
        try {
            key.frame_index = std::stol(number);
        } catch (const std::exception&) {
            throw FormatError(name + ": bad frame index '" + number + "'");
        }
        data.keys.push_back(std::move(key));
    }
    if (data.keys.size() != count) {
        throw FormatError(name + ": index lists " + std::to_string(data.keys.size()) + " rows, payload has " +
                          std::to_string(count));
    }
    return data;
}

/// Per-frame features keyed as the sidecar index lists them.
inline FeatureMap load_external_features(const std::filesystem::path& path, std::size_t expected_dim = 0) {
    FvecData data = read_fvec(path, expected_dim);
    FeatureMap out;
    for (std::size_t i = 0; i < data.vectors.size(); ++i) {
        if (!out.emplace(std::move(data.keys[i]), std::move(data.vectors[i])).second) {
            throw FormatError(path.string() + ": duplicate key on row " + std::to_string(i));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sequence description

/// Frame groups for `seq` under `strategy`. Strategies that only need the
/// cycle count fall back to a single group when no cycle is found;
/// representative sampling propagates NoCycleFound.
inline FrameGroups sequence_groups(const FrameSequence& seq, const SamplingStrategy& strategy, RngHandle& rng,
                                   const FepOptions& fep = kPipelineFep) {
    using K = SamplingStrategy::Kind;
    std::vector<WalkingCycle> cycles;
    if (strategy.kind == K::representative) {
        cycles = detect_cycles(analyze_fep(seq, fep).regulated);
    } else if (strategy.kind == K::random_whole || strategy.kind == K::equal_segments) {
        try {
            cycles = detect_cycles(analyze_fep(seq, fep).regulated);
        } catch (const NoCycleFound&) {
        } catch (const SignalTooShort&) {
        }
    }
    return sample_frames(seq, cycles, strategy, rng);
}

/// Pools precomputed per-frame features group by group.
inline std::vector<CycleDescriptor> describe_groups(const FrameSequence& seq, const FrameGroups& groups,
                                                    std::span<const FeatureVector> frame_features, PoolingMode mode) {
    std::vector<CycleDescriptor> out;
    out.reserve(groups.size());
    std::vector<FeatureVector> members;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        members.clear();
        for (std::size_t i : groups[g]) members.push_back(frame_features[i]);
        out.push_back({pool(members, mode), seq.person_id, seq.camera_id, g});
    }
    return out;
}

/// compute_fep -> regulate_fep -> detect_cycles -> sample_frames -> extract -> pool.
/// Only sampled frames are extracted.
inline std::vector<CycleDescriptor> describe_sequence(const FrameSequence& seq, const SamplingStrategy& strategy,
                                                      const Extractor& extractor, PoolingMode mode, RngHandle& rng,
                                                      const FepOptions& fep = kPipelineFep) {
    const FrameGroups groups = sequence_groups(seq, strategy, rng, fep);
    std::vector<FeatureVector> frame_features(seq.frames.size());
    std::vector<bool> done(seq.frames.size(), false);
    for (const auto& g : groups) {
        for (std::size_t i : g) {
            if (done[i]) continue;
            frame_features[i] = extractor.extract_at(seq, i);
            if (frame_features[i].size() != extractor.dim()) {
                throw DimMismatch("extractor returned " + std::to_string(frame_features[i].size()) +
                                  " values, declared " + std::to_string(extractor.dim()));
            }
            done[i] = true;
        }
    }
    return describe_groups(seq, groups, frame_features, mode);
}

}  // namespace reid
