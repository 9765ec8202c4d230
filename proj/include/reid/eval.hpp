#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "reid/cycle.hpp"
#include "reid/dataset.hpp"
#include "reid/error.hpp"
#include "reid/feature.hpp"
#include "reid/metric.hpp"
#include "reid/rng.hpp"

namespace reid {

// ---------------------------------------------------------------------------
// Splits

struct SplitPlan {
    std::uint64_t trial_seed = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;

    friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

/// One train/test split per trial. Trial t shuffles the identities with
/// seed derive_seed(seed, t) and puts the first ceil(n/2) in training.
/// Both halves are returned in natural order.
inline std::vector<SplitPlan> make_splits(std::vector<std::string> ids, std::size_t trials, std::uint64_t seed) {
    std::sort(ids.begin(), ids.end(), natural_less);
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() < 2) throw TooFewIdentities("need at least 2 identities to split, have " + std::to_string(ids.size()));
    std::vector<SplitPlan> plans;
    for (std::size_t t = 0; t < trials; ++t) {
        SplitPlan plan;
        plan.trial_seed = derive_seed(seed, t);
        RngHandle rng(plan.trial_seed);
        std::vector<std::string> order = ids;
        rng.shuffle(order);
        const std::size_t n_train = (order.size() + 1) / 2;
        plan.train_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        plan.test_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
        std::sort(plan.train_ids.begin(), plan.train_ids.end(), natural_less);
        std::sort(plan.test_ids.begin(), plan.test_ids.end(), natural_less);
        plans.push_back(std::move(plan));
    }
    return plans;
}

// ---------------------------------------------------------------------------
// Ranking and CMC

/// Descriptor sets keyed by identity.
using IdentitySets = std::map<std::string, std::vector<VectorXd>, NaturalLess>;

struct RankedQuery {
    std::string query_id;
    std::vector<std::string> gallery_ids;  // ascending distance
    std::vector<double> distances;
};

/// Ranks every gallery identity for each query identity by set distance.
/// Ties go to the smaller identity label (natural order).
template <class Dist>
std::vector<RankedQuery> rank_queries(const IdentitySets& queries, const IdentitySets& gallery, SetMeasure measure,
                                      Dist&& dist) {
    for (const auto& [id, _] : queries) {
        if (!gallery.count(id)) throw MissingGalleryEntry("query identity " + id + " has no gallery entry");
    }
    std::vector<RankedQuery> out;
    out.reserve(queries.size());
    for (const auto& [qid, qset] : queries) {
        std::vector<std::pair<double, std::string>> scored;
        scored.reserve(gallery.size());
        for (const auto& [gid, gset] : gallery) {
            scored.emplace_back(set_distance<VectorXd>(measure, qset, gset, dist), gid);
        }
        std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return natural_less(a.second, b.second);
        });
        RankedQuery rq;
        rq.query_id = qid;
        for (auto& [d, gid] : scored) {
            rq.distances.push_back(d);
            rq.gallery_ids.push_back(std::move(gid));
        }
        out.push_back(std::move(rq));
    }
    return out;
}

/// Cumulative match rates, rates[r - 1] for rank r = 1..G.
struct CmcCurve {
    std::vector<double> rates;

    std::size_t gallery_size() const noexcept { return rates.size(); }
    /// Rate at rank r (1-based); ranks past the gallery size return the last rate.
    double at(std::size_t rank) const {
        if (rates.empty() || rank == 0) return 0.0;
        return rates[std::min(rank, rates.size()) - 1];
    }
};

/// CMC from zero-based ranks of the true match among `gallery_size` entries.
inline CmcCurve cmc_from_ranks(std::span<const std::size_t> true_ranks, std::size_t gallery_size) {
    CmcCurve cmc;
    cmc.rates.assign(gallery_size, 0.0);
    if (true_ranks.empty()) return cmc;
    std::vector<std::size_t> hits(gallery_size, 0);
    for (std::size_t r : true_ranks) {
        if (r >= gallery_size) throw InvalidArgument("true-match rank outside the gallery");
        ++hits[r];
    }
    std::size_t cumulative = 0;
    for (std::size_t r = 0; r < gallery_size; ++r) {
        cumulative += hits[r];
        cmc.rates[r] = static_cast<double>(cumulative) / static_cast<double>(true_ranks.size());
    }
    return cmc;
}

/// CMC where each query's true identity is its own query_id.
inline CmcCurve compute_cmc(std::span<const RankedQuery> ranked) {
    if (ranked.empty()) return {};
    const std::size_t g = ranked.front().gallery_ids.size();
    std::vector<std::size_t> ranks;
    ranks.reserve(ranked.size());
    for (const auto& rq : ranked) {
        if (rq.gallery_ids.size() != g) throw InvalidArgument("ranked lists differ in length");
        const auto it = std::find(rq.gallery_ids.begin(), rq.gallery_ids.end(), rq.query_id);
        if (it == rq.gallery_ids.end()) throw MissingGalleryEntry("true identity " + rq.query_id + " not ranked");
        ranks.push_back(static_cast<std::size_t>(it - rq.gallery_ids.begin()));
    }
    return cmc_from_ranks(ranks, g);
}

/// CMC with an explicit query -> identity truth map.
inline CmcCurve compute_cmc(std::span<const RankedQuery> ranked, const std::map<std::string, std::string>& truth) {
    std::vector<RankedQuery> relabelled(ranked.begin(), ranked.end());
    for (auto& rq : relabelled) {
        const auto it = truth.find(rq.query_id);
        if (it == truth.end()) throw InvalidArgument("no truth for query " + rq.query_id);
        rq.query_id = it->second;
    }
    return compute_cmc(relabelled);
}

// ---------------------------------------------------------------------------
// Evaluation protocol

enum class MetricKind { euclidean, kissme };

inline std::string to_string(MetricKind m) { return m == MetricKind::euclidean ? "euclidean" : "kissme"; }

inline MetricKind parse_metric(const std::string& name) {
    if (name == "euclidean") return MetricKind::euclidean;
    if (name == "kissme") return MetricKind::kissme;
    throw InvalidArgument("unknown metric '" + name + "'");
}

struct EvalConfig {
    SamplingStrategy strategy = SamplingStrategy::representative(4);
    PoolingMode pooling = PoolingMode::max;
    std::size_t pca_dim = 100;
    MetricKind metric = MetricKind::kissme;
    SetMeasure measure = SetMeasure::avg;
    std::size_t trials = 10;
    std::uint64_t seed = 0;
    FepOptions fep = kPipelineFep;
    /// Dissimilar pairs sampled per similar pair when fitting KISSME.
    std::size_t dissimilar_ratio = 10;
    std::string extractor_name = "handcrafted";
};

/// Stable one-line description of a configuration.
inline std::string fingerprint(const EvalConfig& c) {
    std::ostringstream os;
    os << "strategy=" << to_string(c.strategy.kind) << " frames=" << c.strategy.k << " pooling=" << to_string(c.pooling)
       << " pca_dim=" << c.pca_dim << " metric=" << to_string(c.metric) << " measure=" << to_string(c.measure)
       << " trials=" << c.trials << " seed=" << c.seed << " fep_keep=" << c.fep.keep
       << " fep_oversample=" << c.fep.oversample << " dissimilar_ratio=" << c.dissimilar_ratio
       << " extractor=" << c.extractor_name;
    return os.str();
}

/// Resolved configuration as `key = value` lines, readable back as a config file.
inline std::string config_lock(const EvalConfig& c) {
    std::ostringstream os;
    os << "strategy = " << to_string(c.strategy.kind) << "\n"
       << "frames = " << c.strategy.k << "\n"
       << "pooling = " << to_string(c.pooling) << "\n"
       << "pca-dim = " << c.pca_dim << "\n"
       << "metric = " << to_string(c.metric) << "\n"
       << "measure = " << to_string(c.measure) << "\n"
       << "trials = " << c.trials << "\n"
       << "seed = " << c.seed << "\n"
       << "extractor = " << c.extractor_name << "\n"
       << "fep-keep = " << c.fep.keep << "\n"
       << "fep-oversample = " << c.fep.oversample << "\n"
       << "dissimilar-ratio = " << c.dissimilar_ratio << "\n";
    return os.str();
}

/// A sequence whose cycle detection failed and was sampled with random_halves.
struct Fallback {
    std::size_t trial;
    std::string camera_id;
    std::string person_id;
    std::string reason;
};

/// What one trial fed into model fitting, for leakage checks.
struct TrialTrace {
    std::size_t trial = 0;
    SplitPlan split;
    std::set<std::string> fit_identities;  // identities whose descriptors reached PCA/KISSME
    std::set<std::string> query_identities;
    std::set<std::string> gallery_identities;
    std::size_t pca_dim = 0;
    std::size_t similar_pairs = 0;
    std::size_t dissimilar_pairs = 0;
};

struct EvalHooks {
    std::function<void(const TrialTrace&)> on_trial;
};

struct TrialReport {
    EvalConfig config;
    std::string query_camera;
    std::string gallery_camera;
    std::vector<CmcCurve> per_trial;
    CmcCurve average;
    std::vector<std::size_t> pca_dims;  // effective PCA dimension per trial
    std::vector<Fallback> fallbacks;

    double rank(std::size_t r) const { return average.at(r); }
};

/// Per-frame features for every sequence, computed on first use.
class FrameFeatureCache {
public:
    FrameFeatureCache(const Dataset& dataset, const Extractor& extractor)
        : dataset_(&dataset), extractor_(&extractor), cache_(dataset.sequences().size()) {}

    const Extractor& extractor() const noexcept { return *extractor_; }

    const std::vector<FeatureVector>& features(std::size_t seq_index) {
        auto& slot = cache_.at(seq_index);
        if (!slot) {
            const FrameSequence& seq = dataset_->sequences()[seq_index];
            std::vector<FeatureVector> f;
            f.reserve(seq.frames.size());
            for (std::size_t i = 0; i < seq.frames.size(); ++i) {
                f.push_back(extractor_->extract_at(seq, i));
                if (f.back().size() != extractor_->dim()) {
                    throw DimMismatch("extractor returned " + std::to_string(f.back().size()) + " values, declared " +
                                      std::to_string(extractor_->dim()));
                }
            }
            slot = std::move(f);
        }
        return *slot;
    }

private:
    const Dataset* dataset_;
    const Extractor* extractor_;
    std::vector<std::optional<std::vector<FeatureVector>>> cache_;
};

namespace detail {

inline VectorXd to_vector(const FeatureVector& f) {
    VectorXd v(static_cast<Eigen::Index>(f.size()));
    for (std::size_t i = 0; i < f.size(); ++i) v(static_cast<Eigen::Index>(i)) = f[i];
    return v;
}

/// Cross-camera pairs: every same-identity pair, plus `ratio` times as many
/// different-identity pairs drawn without replacement (all of them when
/// fewer exist).
inline void build_pairs(const std::vector<std::string>& row_person, const std::vector<bool>& row_is_query,
                        std::size_t ratio, RngHandle& rng, PairSet& pairs) {
    std::vector<std::size_t> q_rows;
    std::vector<std::size_t> g_rows;
    for (std::size_t i = 0; i < row_person.size(); ++i) (row_is_query[i] ? q_rows : g_rows).push_back(i);

    std::size_t dissimilar_total = 0;
    for (std::size_t a : q_rows) {
        for (std::size_t b : g_rows) {
            if (row_person[a] == row_person[b]) {
                pairs.similar.emplace_back(a, b);
            } else {
                ++dissimilar_total;
            }
        }
    }
    const std::size_t wanted = pairs.similar.size() * ratio;
    if (wanted >= dissimilar_total || 2 * wanted > dissimilar_total) {
        std::vector<std::pair<std::size_t, std::size_t>> all;
        all.reserve(dissimilar_total);
        for (std::size_t a : q_rows) {
            for (std::size_t b : g_rows) {
                if (row_person[a] != row_person[b]) all.emplace_back(a, b);
            }
        }
        if (wanted < all.size()) {
            const auto picks = rng.sample_without_replacement(all.size(), wanted);
            for (std::size_t p : picks) pairs.dissimilar.push_back(all[p]);
        } else {
            pairs.dissimilar = std::move(all);
        }
        return;
    }
    std::set<std::pair<std::size_t, std::size_t>> chosen;
    while (pairs.dissimilar.size() < wanted) {
        const std::size_t a = q_rows[rng.uniform_index(q_rows.size())];
        const std::size_t b = g_rows[rng.uniform_index(g_rows.size())];
        if (row_person[a] == row_person[b] || !chosen.emplace(a, b).second) continue;
        pairs.dissimilar.emplace_back(a, b);
    }
}

}  // namespace detail

/// Descriptors of sequence `s`, sampled with an RNG derived from `seed` and
/// the sequence index. When cycle detection fails the sequence is sampled
/// with random_halves(K) and the failure is appended to `fallbacks`.
inline std::vector<CycleDescriptor> describe_indexed(const Dataset& dataset, std::size_t s, const EvalConfig& config,
                                                     std::uint64_t seed, FrameFeatureCache& cache,
                                                     std::vector<Fallback>* fallbacks, std::size_t trial = 0) {
    const FrameSequence& seq = dataset.sequences().at(s);
    RngHandle rng(derive_seed(seed, 1000003 + s));
    FrameGroups groups;
    auto fall_back = [&](const Error& e) {
        if (fallbacks) fallbacks->push_back({trial, seq.camera_id, seq.person_id, e.name() + ": " + e.what()});
        return sample_frames(seq, {}, SamplingStrategy::random_halves(config.strategy.k), rng);
    };
    try {
        groups = sequence_groups(seq, config.strategy, rng, config.fep);
    } catch (const NoCycleFound& e) {
        groups = fall_back(e);
    } catch (const SignalTooShort& e) {
        groups = fall_back(e);
    }
    return describe_groups(seq, groups, cache.features(s), config.pooling);
}

/// Training descriptors, one row each, tagged with identity and camera side.
struct TrainingSet {
    MatrixXd rows;
    std::vector<std::string> person;
    std::vector<bool> is_query;
};

inline TrainingSet collect_training(const Dataset& dataset, const std::set<std::string>& ids, const EvalConfig& config,
                                    std::uint64_t seed, const std::string& query_camera,
                                    const std::string& gallery_camera, FrameFeatureCache& cache,
                                    std::vector<Fallback>* fallbacks, std::size_t trial = 0) {
    std::vector<FeatureVector> rows;
    TrainingSet out;
    const auto& seqs = dataset.sequences();
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        const auto& seq = seqs[s];
        const bool is_q = seq.camera_id == query_camera;
        if (!ids.count(seq.person_id) || (!is_q && seq.camera_id != gallery_camera)) continue;
        for (auto& d : describe_indexed(dataset, s, config, seed, cache, fallbacks, trial)) {
            rows.push_back(std::move(d.values));
            out.person.push_back(seq.person_id);
            out.is_query.push_back(is_q);
        }
    }
    if (rows.size() < 2) throw InsufficientPairs("training split produced fewer than 2 descriptors");
    out.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            out.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return out;
}

/// PCA on the training rows, then KISSME on projected cross-camera pairs
/// (identity matrix for the euclidean metric).
inline MetricModel fit_metric_model(const TrainingSet& train, const EvalConfig& config, std::uint64_t seed,
                                    TrialTrace* trace = nullptr) {
    MetricModel model;
    model.pca = fit_pca(train.rows, config.pca_dim);
    model.maha = MahalanobisModel::identity(model.pca.output_dim());
    if (trace) trace->pca_dim = model.pca.output_dim();
    if (config.metric == MetricKind::kissme) {
        PairSet pairs;
        pairs.points = project_rows(model.pca, train.rows);
        RngHandle pair_rng(derive_seed(seed, 7));
        detail::build_pairs(train.person, train.is_query, config.dissimilar_ratio, pair_rng, pairs);
        if (trace) {
            trace->similar_pairs = pairs.similar.size();
            trace->dissimilar_pairs = pairs.dissimilar.size();
        }
        model.maha = fit_kissme(pairs);
    }
    return model;
}

/// The first two cameras in natural order: (query, gallery).
inline std::pair<std::string, std::string> camera_pair(const Dataset& dataset) {
    const auto& cams = dataset.cameras();
    if (cams.size() < 2) {
        throw InvalidArgument("evaluation needs two cameras, dataset has " + std::to_string(cams.size()));
    }
    return {*cams.begin(), *std::next(cams.begin())};
}

/// Full protocol: for each trial, split identities in half; describe the
/// training sequences of both cameras; fit PCA and (for kissme) the
/// Mahalanobis matrix on training descriptors only; describe, project and
/// rank the test identities (first camera queries, second camera gallery);
/// compute the CMC. Curves are averaged over trials.
///
/// A sequence whose cycles cannot be detected is sampled with
/// random_halves(K) instead and listed in `fallbacks`.
inline TrialReport run_evaluation(const Dataset& dataset, const EvalConfig& config, FrameFeatureCache& cache,
                                  const EvalHooks& hooks = {}) {
    if (config.trials < 1) throw InvalidArgument("trials must be >= 1");
    TrialReport report;
    report.config = config;
    std::tie(report.query_camera, report.gallery_camera) = camera_pair(dataset);
    const auto ids = dataset.identities_in_both(report.query_camera, report.gallery_camera);
    const auto splits = make_splits(ids, config.trials, config.seed);
    const auto& seqs = dataset.sequences();

    for (std::size_t trial = 0; trial < splits.size(); ++trial) {
        const SplitPlan& split = splits[trial];
        const std::set<std::string> train(split.train_ids.begin(), split.train_ids.end());
        const std::set<std::string> test(split.test_ids.begin(), split.test_ids.end());
        TrialTrace trace;
        trace.trial = trial;
        trace.split = split;

        const TrainingSet training = collect_training(dataset, train, config, split.trial_seed, report.query_camera,
                                                      report.gallery_camera, cache, &report.fallbacks, trial);
        trace.fit_identities.insert(training.person.begin(), training.person.end());
        const MetricModel model = fit_metric_model(training, config, split.trial_seed, &trace);
        report.pca_dims.push_back(model.pca.output_dim());

        IdentitySets queries;
        IdentitySets gallery;
        for (std::size_t s = 0; s < seqs.size(); ++s) {
            const auto& seq = seqs[s];
            if (!test.count(seq.person_id)) continue;
            IdentitySets* target = nullptr;
            if (seq.camera_id == report.query_camera) target = &queries;
            if (seq.camera_id == report.gallery_camera) target = &gallery;
            if (!target) continue;
            for (auto& d : describe_indexed(dataset, s, config, split.trial_seed, cache, &report.fallbacks, trial)) {
                (*target)[seq.person_id].push_back(project(model.pca, detail::to_vector(d.values)));
            }
        }
        for (const auto& [id, _] : queries) trace.query_identities.insert(id);
        for (const auto& [id, _] : gallery) trace.gallery_identities.insert(id);

        std::vector<RankedQuery> ranked;
        if (config.metric == MetricKind::kissme) {
            ranked = rank_queries(queries, gallery, config.measure,
                                  [&](const VectorXd& a, const VectorXd& b) { return maha_dist(model.maha, a, b); });
        } else {
            ranked = rank_queries(queries, gallery, config.measure, euclidean_dist);
        }
        report.per_trial.push_back(compute_cmc(ranked));
        if (hooks.on_trial) hooks.on_trial(trace);
    }

    const std::size_t g = report.per_trial.front().gallery_size();
    report.average.rates.assign(g, 0.0);
    for (const auto& c : report.per_trial) {
        if (c.gallery_size() != g) throw InvalidArgument("trials produced galleries of different sizes");
        for (std::size_t r = 0; r < g; ++r) report.average.rates[r] += c.rates[r];
    }
    for (double& v : report.average.rates) v /= static_cast<double>(report.per_trial.size());
    return report;
}

inline TrialReport run_evaluation(const Dataset& dataset, const EvalConfig& config, const Extractor& extractor,
                                  const EvalHooks& hooks = {}) {
    FrameFeatureCache cache(dataset, extractor);
    return run_evaluation(dataset, config, cache, hooks);
}

// ---------------------------------------------------------------------------
// Report emission

inline constexpr std::size_t kSummaryRanks[] = {1, 5, 20};

namespace detail {

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace detail

/// `trial,rank,rate` rows for every trial (1-based) followed by the
/// averaged curve under trial "mean". Rates use 6 decimals.
inline std::string cmc_csv(const TrialReport& report) {
    std::string out = "trial,rank,rate\n";
    for (std::size_t t = 0; t < report.per_trial.size(); ++t) {
        const auto& rates = report.per_trial[t].rates;
        for (std::size_t r = 0; r < rates.size(); ++r) {
            out += std::to_string(t + 1) + "," + std::to_string(r + 1) + "," + detail::fmt("%.6f", rates[r]) + "\n";
        }
    }
    for (std::size_t r = 0; r < report.average.rates.size(); ++r) {
        out += "mean," + std::to_string(r + 1) + "," + detail::fmt("%.6f", report.average.rates[r]) + "\n";
    }
    return out;
}

inline std::string report_text(const TrialReport& report) {
    std::ostringstream os;
    os << "configuration: " << fingerprint(report.config) << "\n";
    os << "query camera: " << report.query_camera << ", gallery camera: " << report.gallery_camera
       << ", gallery size: " << report.average.gallery_size() << "\n\n";
    os << "trial    R-1     R-5     R-20    pca_dim\n";
    for (std::size_t t = 0; t < report.per_trial.size(); ++t) {
        char line[128];
        std::snprintf(line, sizeof line, "%-8zu %6.1f  %6.1f  %6.1f  %zu\n", t + 1, 100.0 * report.per_trial[t].at(1),
                      100.0 * report.per_trial[t].at(5), 100.0 * report.per_trial[t].at(20), report.pca_dims[t]);
        os << line;
    }
    char line[128];
    std::snprintf(line, sizeof line, "%-8s %6.1f  %6.1f  %6.1f\n", "mean", 100.0 * report.average.at(1),
                  100.0 * report.average.at(5), 100.0 * report.average.at(20));
    os << line;
    os << "\ncycle-detection fallbacks (random-halves): " << report.fallbacks.size() << "\n";
    for (const auto& f : report.fallbacks) {
        os << "  trial " << f.trial + 1 << " " << f.camera_id << "/" << f.person_id << ": " << f.reason << "\n";
    }
    return os.str();
}

/// Line plot of one or more CMC curves as a standalone SVG document.
inline std::string cmc_svg(const std::vector<std::pair<std::string, CmcCurve>>& curves,
                           const std::string& title = "CMC") {
    const double w = 640, h = 420, left = 60, right = 20, top = 40, bottom = 50;
    const double pw = w - left - right;
    const double ph = h - top - bottom;
    std::size_t g = 1;
    for (const auto& [_, c] : curves) g = std::max(g, c.gallery_size());
    auto px = [&](double rank) { return left + (g > 1 ? (rank - 1) / static_cast<double>(g - 1) : 0.0) * pw; };
    auto py = [&](double rate) { return top + (1.0 - rate) * ph; };
    static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
       << " " << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
       << title << "</text>\n";
    os << "<g stroke=\"#ccc\" stroke-width=\"1\">\n";
    for (int i = 0; i <= 10; ++i) {
        const double y = py(i / 10.0);
        os << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + pw << "\" y2=\"" << y << "\"/>\n";
    }
    os << "</g>\n";
    os << "<g font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">\n";
    for (int i = 0; i <= 10; i += 2) {
        os << "<text x=\"" << left - 6 << "\" y=\"" << py(i / 10.0) + 4 << "\">" << i * 10 << "</text>\n";
    }
    os << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">\n";
    const std::size_t step = std::max<std::size_t>(1, g / 10);
    for (std::size_t r = 1; r <= g; r += step) {
        os << "<text x=\"" << px(static_cast<double>(r)) << "\" y=\"" << top + ph + 16 << "\">" << r << "</text>\n";
    }
    os << "</g>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">rank</text>\n";
    os << "<text transform=\"translate(16," << top + ph / 2
       << ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">matching rate (%)</text>\n";
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& [label, c] = curves[i];
        const char* color = kColors[i % std::size(kColors)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t r = 0; r < c.rates.size(); ++r) {
            os << detail::fmt("%.2f", px(static_cast<double>(r + 1))) << "," << detail::fmt("%.2f", py(c.rates[r])) << " ";
        }
        os << "\"/>\n";
        os << "<text x=\"" << left + pw - 8 << "\" y=\"" << top + ph - 12 - 16.0 * static_cast<double>(curves.size() - 1 - i)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">" << label
           << " (R-1 " << detail::fmt("%.1f", 100.0 * c.at(1)) << "%)</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
    std::string value;
    TrialReport report;
};

/// Copies of `base` with one axis changed. Axes: frames, pooling, pca-dim,
/// measure, strategy, metric.
inline EvalConfig with_axis(EvalConfig base, const std::string& axis, const std::string& value) {
    if (axis == "frames") {
        base.strategy.k = static_cast<std::size_t>(std::stoul(value));
    } else if (axis == "pooling") {
        base.pooling = parse_pooling(value);
    } else if (axis == "pca-dim") {
        base.pca_dim = static_cast<std::size_t>(std::stoul(value));
    } else if (axis == "measure") {
        base.measure = parse_measure(value);
    } else if (axis == "strategy") {
        base.strategy.kind = parse_strategy_kind(value);
    } else if (axis == "metric") {
        base.metric = parse_metric(value);
    } else {
        throw InvalidArgument("unknown sweep axis '" + axis + "'");
    }
    return base;
}

inline std::vector<SweepRow> run_sweep(const Dataset& dataset, const EvalConfig& base, const std::string& axis,
                                       const std::vector<std::string>& values, FrameFeatureCache& cache) {
    std::vector<SweepRow> rows;
    for (const auto& v : values) rows.push_back({v, run_evaluation(dataset, with_axis(base, axis, v), cache)});
    return rows;
}

/// `<axis>,R-1,R-5,R-20` with averaged rates in percent.
inline std::string sweep_csv(const std::string& axis, const std::vector<SweepRow>& rows) {
    std::string out = axis + ",R-1,R-5,R-20\n";
    for (const auto& row : rows) {
        out += row.value + "," + detail::fmt("%.2f", 100.0 * row.report.rank(1)) + "," +
               detail::fmt("%.2f", 100.0 * row.report.rank(5)) + "," + detail::fmt("%.2f", 100.0 * row.report.rank(20)) +
               "\n";
    }
    return out;
}

inline std::string sweep_text(const std::string& axis, const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    char line[128];
    std::snprintf(line, sizeof line, "%-16s %7s %7s %7s\n", axis.c_str(), "R-1", "R-5", "R-20");
    os << line;
    for (const auto& row : rows) {
        std::snprintf(line, sizeof line, "%-16s %7.1f %7.1f %7.1f\n", row.value.c_str(), 100.0 * row.report.rank(1),
                      100.0 * row.report.rank(5), 100.0 * row.report.rank(20));
        os << line;
    }
    return os.str();
}

}  // namespace reid
