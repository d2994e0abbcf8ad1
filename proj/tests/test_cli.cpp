#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// Exercises the installed binary end to end through std::system.

#include "qmap/image.hpp"
#include "support/testutil.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

using testutil::TempDir;

namespace {

std::string qmap_bin() {
    const char* p = std::getenv("QMAP_BIN");
    REQUIRE_MESSAGE(p != nullptr, "QMAP_BIN must point at the qmap binary");
    return p;
}

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run(const std::string& args) {
    TempDir cap("cliout");
    std::string out_file = (cap / "stdout.txt").string();
    std::string cmdline = qmap_bin() + " " + args + " > " + out_file + " 2>&1";
    int rc = std::system(cmdline.c_str());
    std::ifstream f(out_file);
    std::stringstream ss;
    ss << f.rdbuf();
    return {WEXITSTATUS(rc), ss.str()};
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("map on identical images prints average 1.000000 and a reloadable png") {
    TempDir tmp("cli");
    qmap::img::Image im(32, 32, 3);
    qmap::Rng rng(1);
    for (double& v : im.data) v = rng.uniform();
    std::string img_path = (tmp / "im.png").string();
    qmap::img::save_image(im, img_path);

    std::string out = (tmp / "out").string();
    RunResult r = run("map --dist " + img_path + " --ref " + img_path + " --method fsim_gm --out " + out);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("average 1.000000") != std::string::npos);

    qmap::img::Image map = qmap::img::load_image(out + "/map_fsim_gm.png");
    CHECK(map.height == 32);
    for (double v : map.data) CHECK(v == 1.0);

    CHECK(slurp(out + "/summary.jsonl").find("\"cmd\":\"map\"") != std::string::npos);
    CHECK(!slurp(out + "/resolved.cfg").empty());
}

TEST_CASE("map with a missing file fails with the path in the message") {
    TempDir tmp("cli");
    RunResult r = run("map --dist /nonexistent/q.png --ref /nonexistent/q.png --out " +
                      (tmp / "o").string());
    CHECK(r.exit_code != 0);
    CHECK(r.out.find("/nonexistent/q.png") != std::string::npos);
}

TEST_CASE("dry-run prints the plan and writes nothing") {
    TempDir tmp("cli");
    std::string out = (tmp / "dry").string();
    RunResult r = run("synth --bases 2 --out " + out + " --dry-run");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("dry-run") != std::string::npos);
    CHECK(!std::filesystem::exists(out));
}

TEST_CASE("config file values are applied and flags override them") {
    TempDir tmp("cli");
    qmap::img::Image im(32, 32, 3);
    qmap::Rng rng(2);
    for (double& v : im.data) v = rng.uniform();
    std::string img_path = (tmp / "im.png").string();
    qmap::img::save_image(im, img_path);

    std::string cfg_path = (tmp / "run.cfg").string();
    {
        std::ofstream cfg(cfg_path);
        cfg << "method=mdsi_gc\n";
        cfg << "dist=" << img_path << "\n";
        cfg << "ref=" << img_path << "\n";
    }
    std::string out1 = (tmp / "o1").string();
    RunResult r1 = run("map --config " + cfg_path + " --out " + out1);
    CHECK(r1.exit_code == 0);
    CHECK(std::filesystem::exists(out1 + "/map_mdsi_gc.png"));

    std::string out2 = (tmp / "o2").string();
    RunResult r2 = run("map --config " + cfg_path + " --method ssim --out " + out2);
    CHECK(r2.exit_code == 0);
    CHECK(std::filesystem::exists(out2 + "/map_ssim.png"));
}

TEST_CASE("synth is idempotent: identical bytes for identical config+seed") {
    TempDir tmp("cli");
    std::string base = "synth --bases 2 --levels 2 --types white_noise --seed 5 --out ";
    RunResult r1 = run(base + (tmp / "a").string());
    RunResult r2 = run(base + (tmp / "b").string());
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);

    CHECK(slurp((tmp / "a" / "manifest.csv").string()) ==
          slurp((tmp / "b" / "manifest.csv").string()));
    CHECK(slurp((tmp / "a" / "summary.jsonl").string()) ==
          slurp((tmp / "b" / "summary.jsonl").string()));
    CHECK(slurp((tmp / "a" / "resolved.cfg").string()) ==
          slurp((tmp / "b" / "resolved.cfg").string()));
    CHECK(slurp((tmp / "a" / "dist" / "b00_white_noise_l1.png").string()) ==
          slurp((tmp / "b" / "dist" / "b00_white_noise_l1.png").string()));
}

TEST_CASE("labels command writes a store with a matching fingerprint") {
    TempDir tmp("cli");
    std::string data_dir = (tmp / "data").string();
    REQUIRE(run("synth --bases 2 --levels 2 --types white_noise --seed 5 --out " + data_dir)
                .exit_code == 0);
    std::string store = (tmp / "store").string();
    RunResult r = run("labels --manifest " + data_dir + "/manifest.csv --method fsim_gm --out " + store);
    CHECK(r.exit_code == 0);
    CHECK(std::filesystem::exists(store + "/fsim_gm/index.csv"));
    CHECK(std::filesystem::exists(store + "/fsim_gm/b00_white_noise_l1.png"));
}
