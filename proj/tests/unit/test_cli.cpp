#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <sys/wait.h>

#include "field_fixture.hpp"
#include "helpers.hpp"
#include "sonofield/audio_mask.hpp"
#include "sonofield/ffat.hpp"

using namespace sonofield;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
};

Run cli(const std::string& args, const std::filesystem::path& dir) {
    const auto out = dir / "stdout.txt";
    const std::string cmd = std::string(SONOFIELD_CLI) + " " + args + " > " + out.string() + " 2> " +
                            (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    std::ifstream f(out);
    std::stringstream ss;
    ss << f.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 1") {
    const auto dir = scratch_dir("cli1");
    CHECK(cli("", dir).code == 1);
    CHECK(cli("frobnicate", dir).code == 1);
    CHECK(cli("solve --scene pulsating_sphere --v 0.5", dir).code == 1);  // --freq missing
    CHECK(cli("mesh-info --scene teapot", dir).code == 1);
    CHECK(cli("train --dataset " + dir.string() + " --steps 0 --out m.sntf", dir).code == 1);
    CHECK(cli("--help", dir).code == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("data errors exit 2") {
    const auto dir = scratch_dir("cli2");
    CHECK(cli("mesh-info --mesh " + (dir / "missing.txt").string(), dir).code == 2);
    CHECK(cli("metrics --ref " + (dir / "a").string() + " --test " + (dir / "b").string(), dir).code == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("mesh-info and solve") {
    const auto dir = scratch_dir("cli3");
    Run r = cli("--json mesh-info --scene pulsating_sphere --v 0.5", dir);
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["triangles"].get<int>() > 0);

    const auto field = (dir / "f.bin").string();
    r = cli("--json solve --scene pulsating_sphere --v 0.5 --freq 200 --samples 300 --seed 2 --out " + field, dir);
    REQUIRE(r.code == 0);
    j = json::parse(r.out);
    CHECK(j["converged"] == true);
    r = cli("--json eval --field " + field + " --point 0,0,0.6 --point 0.6,0,0", dir);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("abs") != std::string::npos);
    r = cli("eval --field " + field + " --point 0,0", dir);
    CHECK(r.code == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("ffat and metrics") {
    const auto dir = scratch_dir("cli4");
    const auto a = (dir / "a.ffat").string();
    REQUIRE(cli("ffat --analytic --scene pulsating_sphere --v 0.5 --freq 300 --out " + a + " --pgm " +
                    (dir / "a.pgm").string(),
                dir)
                .code == 0);
    CHECK(load_ffat(a).width == 64);
    CHECK(std::filesystem::exists(dir / "a.pgm"));
    Run r = cli("metrics --ref " + a + " --test " + a, dir);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("snr: Inf") != std::string::npos);
    CHECK(r.out.find("ssim: 1.0") != std::string::npos);
    r = cli("--json metrics --ref " + a + " --test " + a, dir);
    CHECK(json::parse(r.out)["snr"] == "Inf");
    std::filesystem::remove_all(dir);
}

TEST_CASE("dataset, train, predict") {
    const auto dir = scratch_dir("cli5");
    const auto ds = (dir / "ds").string(), model = (dir / "m.sntf").string();
    REQUIRE(cli("--quiet dataset --scene pulsating_sphere --param subdivisions=2 --configs 2 --points 50 --samples 150 "
                "--seed 1 --out " + ds,
                dir)
                .code == 0);
    CHECK(std::filesystem::exists(dir / "ds" / "manifest.json"));
    REQUIRE(cli("--quiet train --dataset " + ds + " --steps 20 --batch 32 --grids 4,8 --width 16 --layers 1 --out " +
                    model,
                dir)
                .code == 0);
    Run r = cli("--json predict --model " + model + " --v 0.5 --theta 0.1 --phi 1.0 --r 0.35 --freq 100", dir);
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["p"].size() == 1);
    r = cli("predict --model " + model + " --v 0.5 --theta 9 --phi 1.0 --r 0.35 --freq 100", dir);
    CHECK(r.code == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("mask renders audio") {
    const auto dir = scratch_dir("cli6");
    fixture_field(1, 2).save(dir / "m.sntf");
    Audio a{22050, std::vector<float>(22050, 0.0f)};
    for (std::size_t i = 0; i < a.samples.size(); ++i) a.samples[i] = 0.3f * static_cast<float>(std::sin(0.05 * i));
    write_wav(a, dir / "in.wav");
    std::ofstream(dir / "t.csv") << "v,theta,phi,r\n0.1,0,1,1.2\n0.9,1,2,1.8\n";
    const Run r = cli("mask --model " + (dir / "m.sntf").string() + " --audio " + (dir / "in.wav").string() +
                          " --trajectory " + (dir / "t.csv").string() + " --out " + (dir / "out.wav").string(),
                      dir);
    REQUIRE(r.code == 0);
    CHECK(read_wav(dir / "out.wav").samples.size() == a.samples.size());
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
