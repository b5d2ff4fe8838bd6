#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "shellmatch/pipeline.hpp"
#include "test_util.hpp"

using namespace shellmatch;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / name;
    fs::create_directories(p);
    return p.string();
}

void write_circle_csv(const std::string& path, const Vec<2>& c, double r, int n) {
    write_shape<2>(make_circle(c, r, n), path);
}

} // namespace

TEST_CASE("Table-1 style configs parse and echo losslessly") {
    const std::string dir = temp_dir("sm_cfg");
    write_circle_csv(dir + "/a.csv", Vec<2>{{0.45, 0.5}}, 0.2, 64);
    write_circle_csv(dir + "/b.csv", Vec<2>{{0.55, 0.5}}, 0.2, 64);

    // jump-example-style parameters
    const std::string jump = "[shapes]\nshape1 = " + dir + "/a.csv\nshape2 = " + dir +
                             "/b.csv\ndimension = 2\n[params]\nc_match = 0.512\nc_vol = 0.8\nc_mem = 1.0\n"
                             "c_bend = 1.0\nq = 3\ntheta = 1\nmode = symmetric\n[descent]\nlevel_min = 4\n"
                             "level_max = 9\n";
    const auto cfg = parse_config_text(jump, "jump");
    CHECK(cfg.params.c_match == 0.512);
    CHECK(cfg.params.c_vol == 0.8);
    CHECK(cfg.params.c_bend == 1.0);
    CHECK(cfg.params.q == 3.0);
    CHECK(cfg.params.theta == 1);
    CHECK(cfg.descent.level_min == 4);
    CHECK(cfg.descent.level_max == 9);

    // starfish-example-style parameters
    const std::string starfish = "[shapes]\nshape1 = " + dir + "/a.csv\nshape2 = " + dir +
                                 "/b.csv\ndimension = 2\n[params]\nc_match = 4.096\nc_vol = 0.8\nc_mem = 1.0\n"
                                 "c_bend = 0.2\nq = 4\ntheta = 1\n[descent]\nlevel_min = 4\nlevel_max = 8\n";
    const auto cfg2 = parse_config_text(starfish, "starfish");
    CHECK(cfg2.params.c_match == 4.096);
    CHECK(cfg2.params.c_bend == 0.2);
    CHECK(cfg2.params.q == 4.0);

    // echo reparses to an identical echo (lossless)
    for (const auto& c : {cfg, cfg2}) {
        const std::string echo = config_echo(c);
        const auto again = parse_config_text(echo, "echo");
        CHECK(config_echo(again) == echo);
    }
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS((void)parse_config("/nonexistent/config.cfg"), ParseError);
    CHECK_THROWS_AS((void)parse_config_text("[shapes]\nshape1 = a\nshape2 = b\ndimension = 4\n", "x"), ParseError);
    CHECK_THROWS_AS((void)parse_config_text("[shapes]\nbogus_key = 1\n", "x"), ParseError);
    CHECK_THROWS_AS((void)parse_config_text("[nosuch]\na = 1\n", "x"), ParseError);
    CHECK_THROWS_AS((void)parse_config_text("key_outside = 1\n", "x"), ParseError);
}

TEST_CASE("missing shape file: error before any output is written") {
    const std::string dir = temp_dir("sm_missing");
    RunConfig cfg;
    cfg.shape1 = dir + "/does_not_exist.csv";
    cfg.shape2 = dir + "/also_missing.csv";
    cfg.output_dir = dir + "/out";
    std::ostringstream log;
    CHECK_THROWS_AS((void)run_config(cfg, log), ParseError);
    CHECK(!fs::exists(cfg.output_dir));
}

TEST_CASE("export_deformed: identity, affine exactness, re-ingest") {
    const auto circle = make_circle(Vec<2>{{0.5, 0.5}}, 0.2, 128);
    const auto sdf = fast_march_sdf(circle, std::ldexp(1.0, -6));
    const auto grid =
        std::make_shared<AdaptiveGrid<2>>(AdaptiveGrid<2>::build(4, 4, sdf, sdf, 0.05));
    const std::string dir = temp_dir("sm_export");

    Deformation<2> id(grid);
    export_deformed<2>(circle, id, dir + "/id.csv");
    const auto back = ingest_shape<2>(dir + "/id.csv");
    REQUIRE(back.vertices.size() == circle.vertices.size());
    for (std::size_t i = 0; i < back.vertices.size(); ++i)
        CHECK(norm(back.vertices[i] - circle.vertices[i]) < 1e-12);

    Deformation<2> aff(grid);
    const Mat<2> a{{1.05, 0.02, -0.01, 0.97}};
    const Vec<2> b{{0.01, 0.02}};
    for (int v = 0; v < grid->num_vertices(); ++v) aff.values[v] = a * grid->vertex_pos[v] + b;
    aff.apply_constraints();
    export_deformed<2>(circle, aff, dir + "/aff.csv");
    const auto moved = ingest_shape<2>(dir + "/aff.csv");
    for (std::size_t i = 0; i < moved.vertices.size(); ++i)
        CHECK(norm(moved.vertices[i] - (a * circle.vertices[i] + b)) < 1e-12);
    CHECK(fs::exists(dir + "/aff.csv.vtk"));
}

TEST_CASE("end-to-end run writes a coherent manifest and reproduces from its echo") {
    const std::string dir = temp_dir("sm_e2e");
    write_circle_csv(dir + "/a.csv", Vec<2>{{0.48, 0.5}}, 0.17, 512);
    write_circle_csv(dir + "/b.csv", Vec<2>{{0.52, 0.5}}, 0.21, 512);

    RunConfig cfg;
    cfg.shape1 = dir + "/a.csv";
    cfg.shape2 = dir + "/b.csv";
    cfg.output_dir = dir + "/out";
    cfg.descent.level_min = 3;
    cfg.descent.level_max = 4;
    cfg.descent.max_iters_per_level = 8;
    cfg.params.q = 3;
    cfg.job_match = true;
    cfg.job_match_swapped = true;
    cfg.job_symmetry = true;
    cfg.job_band_check = true;

    setenv("SHELLMATCH_THREADS", "2", 1);
    std::ostringstream log;
    const int code = run_config(cfg, log);
    CHECK(code == 0);

    for (const char* f : {"manifest.json", "phi.shlm", "psi.shlm", "symmetry.json", "band_check.json",
                          "grid_deformed.vtk", "deformed_shape1.csv", "shape1.vtk"})
        CHECK(fs::exists(fs::path(cfg.output_dir) / f));

    std::ifstream mf(fs::path(cfg.output_dir) / "manifest.json");
    const auto manifest = nlohmann::json::parse(mf);
    CHECK(manifest["tool"] == "shellmatch");
    CHECK(manifest["dimension"] == 2);
    const double total1 = manifest["jobs"]["match"]["records"].back()["energy"]["total"];

    // rerun from the echoed config: bitwise-identical final energy
    const auto cfg2 = parse_config_text(manifest["config_echo"], "echo");
    RunConfig cfg3 = cfg2;
    cfg3.output_dir = dir + "/out2";
    std::ostringstream log2;
    CHECK(run_config(cfg3, log2) == 0);
    std::ifstream mf2(fs::path(cfg3.output_dir) / "manifest.json");
    const auto manifest2 = nlohmann::json::parse(mf2);
    const double total2 = manifest2["jobs"]["match"]["records"].back()["energy"]["total"];
    CHECK(total1 == total2);
    unsetenv("SHELLMATCH_THREADS");
}

TEST_CASE("verify suites report success") {
    std::ostringstream log;
    CHECK(run_verify(log) == 0);
    CHECK(log.str().find("[FAIL]") == std::string::npos);
    CHECK(log.str().find("[PASS]") != std::string::npos);
}
