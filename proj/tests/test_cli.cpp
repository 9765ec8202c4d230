#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "reid/cli.hpp"
#include "reid/synth.hpp"
#include "support.hpp"

using namespace reid;
using reid::test::TempDir;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "reid_cli");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) { return cli::detail::read_text(p); }

SynthSpec small_spec() {
    SynthSpec spec;
    spec.identities = 6;
    spec.seed = 11;
    return spec;
}

// One synthetic dataset on disk shared by the tests in this file.
const std::filesystem::path& dataset_root() {
    static TempDir dir("cli_data");
    static const bool written = [] {
        const auto r = run_cli({"synth", "--identities", "6", "--seed", "11", "--out", (dir / "ds").string()});
        EXPECT_EQ(r.code, 0) << r.err;
        return true;
    }();
    (void)written;
    static const std::filesystem::path root = dir / "ds";
    return root;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run_cli({}).code, 2);
    EXPECT_EQ(run_cli({"eval", "--no-such-flag"}).code, 2);
    EXPECT_EQ(run_cli({"eval", "--pooling", "median"}).code, 2);
    EXPECT_EQ(run_cli({"eval", "--strategy", "every-other"}).code, 2);
    EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
    TempDir dir("cli_usage");
    const auto cfg = dir / "bad.conf";
    cli::detail::write_text(cfg, "colour = blue\n");
    const auto r = run_cli({"eval", "--config", cfg.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST(Cli, PipelineErrorsExitOneAndNameTheError) {
    TempDir dir("cli_err");
    auto r = run_cli({"eval", "--data", (dir / "missing").string(), "--out", (dir / "o").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("NotFound"), std::string::npos) << r.err;

    cli::detail::write_text(dir / "junk.fvec", "not an fvec file");
    cli::detail::write_text(dir / "junk.fvec.idx", "");
    r = run_cli({"eval", "--data", dataset_root().string(), "--features-file", (dir / "junk.fvec").string(), "--out",
                 (dir / "o").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("FormatError"), std::string::npos) << r.err;
}

TEST(Cli, BinaryExitCodes) {
    const std::string bin = REID_CLI_PATH;
    EXPECT_EQ(WEXITSTATUS(std::system((bin + " eval --bogus >/dev/null 2>&1").c_str())), 2);
    EXPECT_EQ(WEXITSTATUS(std::system((bin + " eval --data /nonexistent/reid >/dev/null 2>&1").c_str())), 1);
    EXPECT_EQ(WEXITSTATUS(std::system((bin + " --help >/dev/null 2>&1").c_str())), 0);
}

TEST(Cli, SynthRoundTripsThroughLoader) {
    const Dataset ds = load_dataset(dataset_root());
    const SynthData want = generate_synthetic(small_spec());
    ASSERT_EQ(ds.sequences().size(), want.dataset.sequences().size());
    for (std::size_t i = 0; i < ds.sequences().size(); ++i) {
        const auto& a = ds.sequences()[i];
        const auto& b = want.dataset.sequences()[i];
        EXPECT_EQ(a.camera_id, b.camera_id);
        EXPECT_EQ(a.person_id, b.person_id);
        EXPECT_EQ(a.frames, b.frames);  // PNG is lossless
    }
}

TEST(Cli, FepExtremaMatchGroundTruth) {
    TempDir dir("cli_fep");
    const std::string person = synth_person_id(0);
    const auto r = run_cli({"fep", "--data", dataset_root().string(), "--seq", "cam1/" + person, "--out", dir.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(slurp(dir / "regulated.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "frame_index,value");
    std::vector<double> reg;
    while (std::getline(in, line)) reg.push_back(std::stod(line.substr(line.find(',') + 1)));
    EXPECT_EQ(reg.size(), 63u);
    const auto found = find_extrema(reg);
    const SynthData synth = generate_synthetic(small_spec());
    const auto& truth = synth.truth.at({"cam1", person});
    ASSERT_FALSE(truth.empty());
    for (const auto& t : truth) {
        const bool hit = std::any_of(found.begin(), found.end(), [&](const Extremum& e) {
            return e.is_max == t.is_max && (e.index > t.index ? e.index - t.index : t.index - e.index) <= 1;
        });
        EXPECT_TRUE(hit) << t.index;
    }
}

TEST(Cli, ConfigFileIsOverriddenByFlags) {
    TempDir dir("cli_cfg");
    const auto cfg = dir / "run.conf";
    cli::detail::write_text(cfg, "# evaluation\ntrials = 1\nmetric = euclidean\nseed = 5\npca_dim = 20\n");
    const auto r = run_cli({"eval", "--config", cfg.string(), "--data", dataset_root().string(), "--seed", "7", "--out",
                            dir.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string lock = slurp(dir / "config.lock");
    EXPECT_NE(lock.find("seed = 7\n"), std::string::npos) << lock;
    EXPECT_NE(lock.find("trials = 1\n"), std::string::npos);
    EXPECT_NE(lock.find("metric = euclidean\n"), std::string::npos);
    EXPECT_NE(lock.find("pca-dim = 20\n"), std::string::npos);
    for (const char* f : {"report.txt", "cmc.csv", "cmc.svg"}) EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;

    // The lock file is itself a valid config.
    TempDir again("cli_cfg2");
    const auto r2 = run_cli({"eval", "--config", (dir / "config.lock").string(), "--data", dataset_root().string(),
                             "--out", again.path().string()});
    ASSERT_EQ(r2.code, 0) << r2.err;
    EXPECT_EQ(slurp(again / "cmc.csv"), slurp(dir / "cmc.csv"));
}

TEST(Cli, EvalIsByteReproducible) {
    TempDir a("cli_rep_a"), b("cli_rep_b");
    for (auto* d : {&a, &b}) {
        const auto r = run_cli({"eval", "--data", dataset_root().string(), "--trials", "2", "--seed", "3", "--out",
                                d->path().string()});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    EXPECT_EQ(slurp(a / "cmc.csv"), slurp(b / "cmc.csv"));
    EXPECT_EQ(slurp(a / "report.txt"), slurp(b / "report.txt"));
}

TEST(Cli, SweepWritesOneRowPerValue) {
    TempDir dir("cli_sweep");
    const auto r = run_cli({"sweep", "--data", dataset_root().string(), "--trials", "1", "--axis", "frames", "--values",
                            "1,2,4,6,10", "--out", dir.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir / "sweep.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
    EXPECT_EQ(csv.rfind("frames,R-1,R-5,R-20\n", 0), 0u);
    EXPECT_EQ(run_cli({"sweep", "--data", dataset_root().string(), "--axis", "colour", "--values", "1"}).code, 2);
}

TEST(Cli, StagewisePipeline) {
    TempDir dir("cli_stages");
    const std::string data = dataset_root().string();
    auto r = run_cli({"cycles", "--data", data, "--out", (dir / "groups.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string groups = slurp(dir / "groups.csv");
    EXPECT_EQ(groups.rfind("person,camera,cycle,frames\n", 0), 0u);

    r = run_cli({"features", "--data", data, "--out", (dir / "frames.fvec").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const FvecData frames = read_fvec(dir / "frames.fvec");
    EXPECT_EQ(frames.dim, HandcraftedExtractor{}.dim());
    EXPECT_EQ(frames.vectors.size(), 2u * 6u * 64u);

    r = run_cli({"pool", "--features-file", (dir / "frames.fvec").string(), "--groups", (dir / "groups.csv").string(),
                 "--pooling", "max", "--out", (dir / "pooled.fvec").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const FvecData pooled = read_fvec(dir / "pooled.fvec", frames.dim);
    EXPECT_EQ(pooled.vectors.size(), static_cast<std::size_t>(std::count(groups.begin(), groups.end(), '\n')) - 1);

    r = run_cli({"train", "--data", data, "--pca-dim", "10", "--out", (dir / "model.rdm").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const MetricModel model = read_model(dir / "model.rdm");
    EXPECT_EQ(model.pca.output_dim(), 10u);
    EXPECT_EQ(model.maha.M.rows(), 10);

    // Evaluating from precomputed features matches the built-in extractor.
    TempDir e1("cli_ext1"), e2("cli_ext2");
    r = run_cli({"eval", "--data", data, "--trials", "2", "--out", e1.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run_cli({"eval", "--data", data, "--trials", "2", "--features-file", (dir / "frames.fvec").string(), "--out",
                 e2.path().string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(e1 / "cmc.csv"), slurp(e2 / "cmc.csv"));
}
