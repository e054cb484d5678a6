#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
};

CliRun run(const std::string& args) {
    const std::string cmd = std::string(RAMM_CLI_PATH) + " " + args + " 2>&1";
    CliRun r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf{};
    while (std::size_t n = fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) n += !line.empty();
    return n;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("ramm_cli_") + info->name() + "_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    /// A small synthetic corpus in `sub`; returns the run.
    CliRun synth(const std::string& sub, int seed, const std::string& extra = "") {
        return run("synth --clusters 4 --per-cluster 10 --text-dim 4 --image-dim 4 --narrative-dim 8 --seed " +
                   std::to_string(seed) + " --out " + path(sub) + " " + extra);
    }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SynthCountsAndIsByteIdentical) {
    ASSERT_EQ(run("synth --clusters 8 --per-cluster 50 --seed 7 --out " + path("a")).code, 0);
    ASSERT_EQ(run("synth --clusters 8 --per-cluster 50 --seed 7 --out " + path("b")).code, 0);
    const std::string corpus = slurp(dir_ / "a" / "corpus.jsonl");
    EXPECT_EQ(count_lines(corpus), 400u);
    EXPECT_EQ(corpus, slurp(dir_ / "b" / "corpus.jsonl"));
    EXPECT_EQ(slurp(dir_ / "a" / "narratives.jsonl"), slurp(dir_ / "b" / "narratives.jsonl"));

    const json manifest = json::parse(slurp(dir_ / "a" / "manifest.json"));
    EXPECT_EQ(manifest.at("command"), "synth");
    EXPECT_EQ(manifest.at("config").at("seed"), 7);
    EXPECT_TRUE(manifest.at("timings_ms").contains("total"));
}

TEST_F(CliTest, UnwritableDirectoryReportsPath) {
    std::ofstream(path("blocker")) << "x";
    const CliRun r = run("synth --seed 1 --out " + path("blocker") + "/sub");
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.out.find(path("blocker")), std::string::npos) << r.out;
}

TEST_F(CliTest, UnknownFlagFails) {
    EXPECT_NE(run("synth --out " + path("x") + " --no-such-flag 3").code, 0);
    EXPECT_NE(run("frobnicate").code, 0);
}

TEST_F(CliTest, GradcheckPasses) {
    const CliRun r = run("gradcheck --tol 1e-4 --seed 11");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("cibl.f_sigma"), std::string::npos);
    EXPECT_NE(r.out.find("passed"), std::string::npos);
}

TEST_F(CliTest, TrainEvalAndRetrieve) {
    ASSERT_EQ(synth("data", 3).code, 0);
    const std::string data = "--corpus " + path("data/corpus.jsonl") + " --embeddings " + path("data/narratives.jsonl");
    const CliRun t1 = run("train " + data + " --steps 20 --batch-size 4 --warmup 5 --lr 3e-3 --seed 2 --out " + path("t1"));
    ASSERT_EQ(t1.code, 0) << t1.out;
    const CliRun t2 = run("train " + data + " --steps 20 --batch-size 4 --warmup 5 --lr 3e-3 --seed 2 --out " + path("t2"));
    ASSERT_EQ(t2.code, 0) << t2.out;
    EXPECT_EQ(slurp(dir_ / "t1" / "checkpoint.bin"), slurp(dir_ / "t2" / "checkpoint.bin"));
    const std::string log = slurp(dir_ / "t1" / "steps.jsonl");
    EXPECT_EQ(log, slurp(dir_ / "t2" / "steps.jsonl"));
    EXPECT_EQ(count_lines(log), 20u);
    const json first = json::parse(log.substr(0, log.find('\n')));
    for (const char* k : {"step", "lr", "alpha", "align", "recon", "compress", "total"}) EXPECT_TRUE(first.contains(k));

    // The manifest alone reproduces the run.
    const CliRun t3 = run("train " + data + " --config " + path("t1/manifest.json") + " --out " + path("t3"));
    ASSERT_EQ(t3.code, 0) << t3.out;
    EXPECT_EQ(slurp(dir_ / "t1" / "checkpoint.bin"), slurp(dir_ / "t3" / "checkpoint.bin"));

    const CliRun e = run("eval --checkpoint " + path("t1/checkpoint.bin") + " --corpus " + path("data/corpus.jsonl") +
                      " --split test --out " + path("e"));
    ASSERT_EQ(e.code, 0) << e.out;
    const json report = json::parse(slurp(dir_ / "e" / "report.json"));
    EXPECT_EQ(report.at("counts").at("tp").get<int>() + report.at("counts").at("fp").get<int>() +
                  report.at("counts").at("tn").get<int>() + report.at("counts").at("fn").get<int>(),
              12);
    EXPECT_EQ(count_lines(slurp(dir_ / "e" / "metrics.csv")), 2u);

    const CliRun q = run("retrieve " + data + " --query c000-i0000 --k-in 3 --k-out 2");
    ASSERT_EQ(q.code, 0) << q.out;
    const json res = json::parse(q.out);
    EXPECT_EQ(res.at("query_id"), "c000-i0000");
    EXPECT_LE(res.at("in_domain").size(), 3u);
    EXPECT_LE(res.at("out_domain").size(), 2u);

    EXPECT_NE(run("eval --checkpoint " + path("missing.bin") + " --corpus " + path("data/corpus.jsonl")).code, 0);
}

TEST_F(CliTest, ConfigFileIsOverriddenByFlags) {
    ASSERT_EQ(synth("data", 4).code, 0);
    std::ofstream(path("cfg.json")) << R"({"k_in": 1, "tau": 0.3, "max_steps": 3, "batch_size": 4})";
    const std::string data = "--corpus " + path("data/corpus.jsonl") + " --embeddings " + path("data/narratives.jsonl");
    ASSERT_EQ(run("train " + data + " --config " + path("cfg.json") + " --k-in 2 --out " + path("t")).code, 0);
    const json cfg = json::parse(slurp(dir_ / "t" / "manifest.json")).at("config");
    EXPECT_EQ(cfg.at("k_in"), 2);
    EXPECT_EQ(cfg.at("tau"), 0.3);
    EXPECT_EQ(cfg.at("k_out"), 2);

    std::ofstream(path("bad.json")) << R"({"k_inn": 1})";
    EXPECT_NE(run("train " + data + " --config " + path("bad.json") + " --out " + path("u")).code, 0);
}

TEST_F(CliTest, SweepEmitsOneRowPerValue) {
    ASSERT_EQ(synth("data", 5).code, 0);
    const std::string data = "--corpus " + path("data/corpus.jsonl") + " --embeddings " + path("data/narratives.jsonl");
    const CliRun r = run("sweep " + data + " --param k_in --values 1,2,3,4,5 --steps 4 --warmup 1 --out " + path("s"));
    ASSERT_EQ(r.code, 0) << r.out;
    const std::string csv = slurp(dir_ / "s" / "sweep.csv");
    EXPECT_EQ(count_lines(csv), 6u);  // header + 5
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "param,value,accuracy,f1,auc,tp,fp,tn,fn");
    EXPECT_NE(run("sweep " + data + " --param nope --values 1").code, 0);
}

TEST_F(CliTest, AblateAllVariants) {
    ASSERT_EQ(synth("data", 6).code, 0);
    const std::string data = "--corpus " + path("data/corpus.jsonl") + " --embeddings " + path("data/narratives.jsonl");
    const CliRun r = run("ablate " + data + " --steps 4 --warmup 1 --out " + path("a"));
    ASSERT_EQ(r.code, 0) << r.out;
    const std::string csv = slurp(dir_ / "a" / "ablation.csv");
    EXPECT_EQ(count_lines(csv), 7u);
    EXPECT_NE(csv.find("-ANA (CLIP. select)"), std::string::npos);
}

TEST_F(CliTest, OfflineNarrateEmbedsCorpusText) {
    std::ofstream(path("c.jsonl"))
        << R"({"id":"a","domain":"x","text_features":[1,0],"image_features":[0,1],"label":1,"split":"train","narrative_text":"the moon is cheese"})"
        << "\n"
        << R"({"id":"b","domain":"y","text_features":[0,1],"image_features":[1,0],"label":0,"split":"test","narrative_text":"rain falls today"})"
        << "\n";
    const CliRun r = run("narrate --offline --corpus " + path("c.jsonl") + " --dim 16 --out " + path("n"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(count_lines(slurp(dir_ / "n" / "narratives.jsonl")), 2u);
    EXPECT_NE(slurp(dir_ / "n" / "narratives_text.jsonl").find("the moon is cheese"), std::string::npos);
}

// Null model: an untrained checkpoint's test AUC stays near chance.
TEST_F(CliTest, UntrainedCheckpointAucBand) {
    for (int seed = 0; seed < 10; ++seed) {
        const std::string sub = "d" + std::to_string(seed);
        ASSERT_EQ(run("synth --clusters 8 --per-cluster 50 --seed " + std::to_string(seed) + " --out " + path(sub)).code, 0);
        const std::string data = "--corpus " + path(sub + "/corpus.jsonl") + " --embeddings " +
                                 path(sub + "/narratives.jsonl");
        ASSERT_EQ(run("train " + data + " --steps 0 --seed " + std::to_string(seed) + " --out " + path(sub + "/m")).code, 0);
        const CliRun e = run("eval --split test --checkpoint " + path(sub + "/m/checkpoint.bin") + " --corpus " +
                          path(sub + "/corpus.jsonl"));
        ASSERT_EQ(e.code, 0) << e.out;
        const double auc = json::parse(e.out).at("auc").get<double>();
        EXPECT_GE(auc, 0.35) << "seed " << seed;
        EXPECT_LE(auc, 0.65) << "seed " << seed;
    }
}
