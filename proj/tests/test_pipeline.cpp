#include "bespoke/pipeline.hpp"
#include "bespoke/util.hpp"
#include "support.hpp"

#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string output;
};

Run run(const std::string& args) {
    std::string cmd = std::string(BESPOKE_CLI) + " " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::array<char, 4096> buf{};
    while (auto n = fread(buf.data(), 1, buf.size(), p))
        r.output.append(buf.data(), n);
    int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("bespoke_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string fixture(const std::string& file) { return testing::fixture_path("iris", file); }

} // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(run("--no-such-flag").code == 2);
    CHECK(run("quantize --model " + fixture("svm_r.json")).code == 2);
    CHECK(run("dse --fitness kursawe --netlist x --exact y --train a --test b --out-dir o").code == 2);
    CHECK(run("--version").code == 0);
}

TEST_CASE("a missing dataset is a stage-tagged failure") {
    auto dir = scratch("missing");
    auto r = run("pipeline --model " + fixture("svm_r.json") + " --train /nonexistent/train.csv --test " +
                 fixture("test.csv") + " --out-dir " + dir.string());
    CHECK(r.code == 3);
    CHECK(r.output.find("[data]") != std::string::npos);
    auto bad = run("pipeline --model /nonexistent/model.json --train " + fixture("train.csv") + " --test " +
                   fixture("test.csv") + " --out-dir " + dir.string());
    CHECK(bad.code == 3);
}

TEST_CASE("subcommands chain through files") {
    auto dir = scratch("chain");
    auto p = [&](const char* f) { return (dir / f).string(); };
    const std::string train = fixture("train.csv"), test = fixture("test.csv");
    REQUIRE(run("quantize --model " + fixture("mlp_c.json") + " --data " + test + " --out " + p("q.json")).code == 0);
    REQUIRE(run("synth --quantized " + p("q.json") + " --out " + p("exact.json")).code == 0);
    REQUIRE(run("coeff-approx --quantized " + p("q.json") + " --e 4 --out " + p("a.json") + " --out-report " +
                p("a.csv"))
                .code == 0);
    REQUIRE(run("synth --quantized " + p("a.json") + " --out " + p("cax.json")).code == 0);
    REQUIRE(run("profile --netlist " + p("exact.json") + " --data " + train + " --out " + p("act.txt")).code == 0);
    REQUIRE(run("prune --netlist " + p("cax.json") + " --train " + train + " --test " + test +
                " --tau-grid 0.9,0.95 --out " + p("sweep.csv"))
                .code == 0);
    REQUIRE(run("prune --netlist " + p("cax.json") + " --train " + train + " --test " + test +
                " --tau 0.9 --phi-c 4 --out-netlist " + p("pruned.json"))
                .code == 0);
    REQUIRE(run("sta --netlist " + p("pruned.json") + " --vdd 0.8 --out " + p("sta.csv")).code == 0);
    REQUIRE(run("vos-sim --netlist " + p("exact.json") + " --data " + test + " --stimuli-count 500 --out " +
                p("vos.csv"))
                .code == 0);
    REQUIRE(run("power --netlist " + p("exact.json") + " --data " + train + " --vdd 1.0,0.8 --out " + p("pw.csv"))
                .code == 0);
    auto dse = run("dse --netlist " + p("cax.json") + " --exact " + p("exact.json") + " --train " + train +
                   " --test " + test + " --tau-grid 0.9,0.99 --epochs 1 --population 4 --stimuli-count 500" +
                   " --out-dir " + p("dse"));
    CHECK(dse.code == 0);
    for (const char* f : {"a.csv", "sweep.csv", "sta.csv", "vos.csv", "pw.csv", "dse/pareto.csv"}) {
        auto text = bespoke::read_text_file(p(f));
        CAPTURE(f);
        CHECK(text.rfind("manifest_hash,", 0) == 0);
    }
    // a netlist from a different revision cannot take a stale profile; malformed input is a stage error
    bespoke::write_text_file(p("broken.json"), "{\"format\": \"nope\"}");
    auto bad = run("sta --netlist " + p("broken.json"));
    CHECK(bad.code == 3);
    CHECK(bad.output.find("[sta]") != std::string::npos);
}

TEST_CASE("the same manifest twice gives byte-identical reports") {
    auto a = scratch("det_a"), b = scratch("det_b");
    auto cmd = [&](const fs::path& out) {
        return "pipeline --model " + fixture("svm_r.json") + " --train " + fixture("train.csv") + " --test " +
               fixture("test.csv") + " --tau-grid 0.9,0.99 --epochs 2 --population 6 --stimuli-count 1000" +
               " --out-dir " + out.string();
    };
    REQUIRE(run("--threads 3 " + cmd(a)).code == 0);
    REQUIRE(run("--threads 1 " + cmd(b)).code == 0);
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        auto name = entry.path().filename().string();
        if (name == "manifest.json")
            continue;
        CAPTURE(name);
        CHECK(bespoke::read_text_file(entry.path().string()) == bespoke::read_text_file((b / name).string()));
        ++compared;
    }
    CHECK(compared >= 8);
    auto report = run("report --run-dir " + a.string());
    CHECK(report.code == 0);
    CHECK(report.output.find("exact") != std::string::npos);
}

TEST_CASE("manifest round-trip and hash") {
    bespoke::RunManifest m;
    m.model_path = fixture("svm_r.json");
    m.train_path = fixture("train.csv");
    m.test_path = fixture("test.csv");
    m.output_dir = "/tmp/x";
    auto back = bespoke::manifest_from_json(m.to_json());
    CHECK(back.to_json() == m.to_json());
    auto h = m.hash();
    m.output_dir = "/tmp/y";
    m.threads = 7;
    CHECK(m.hash() == h);
    m.seed = 99;
    CHECK(m.hash() != h);
    m.fitness = "kursawe";
    CHECK_THROWS_AS(m.validate(), bespoke::Error);
}
