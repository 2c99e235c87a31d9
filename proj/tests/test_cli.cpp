#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "abkd/csvio.hpp"

#ifndef ABKD_CLI_PATH
#error "ABKD_CLI_PATH must point at the abkd binary"
#endif

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string output; // stdout + stderr
};

CmdResult run_cli(const std::string& args) {
    const std::string cmd = std::string(ABKD_CLI_PATH) + " " + args + " 2>&1";
    CmdResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    while (std::fgets(buf, sizeof(buf), pipe)) result.output += buf;
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("abkd_cli_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

constexpr const char* kTinyRun =
    " --classes 3 --features 4 --train-samples 90 --test-samples 45 --epochs 3 "
    "--teacher-layers 4,8,3 --student-layers 4,6,3 ";

} // namespace

TEST_CASE("eval-divergence prints the divergence value") {
    const auto r = run_cli("eval-divergence --p 0.9,0.1 --q 0.5,0.5 --alpha 1 --beta 0");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("0.368064") != std::string::npos);

    const auto jsd = run_cli("eval-divergence --p 0.9,0.1 --q 0.5,0.5 --family jsd");
    CHECK(jsd.exit_code == 0);
    CHECK(jsd.output.find("0.101749") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run_cli("no-such-verb").exit_code == 2);
    CHECK(run_cli("eval-divergence --p 0.5,0.5").exit_code == 2);           // missing --q
    CHECK(run_cli("eval-divergence --p 0.5,0.5 --q 0.5,0.5 --bogus 1").exit_code == 2);
    // parameter errors map to usage as well
    const auto r = run_cli("eval-divergence --p 0.5,0.5 --q 0.5,0.5 --family alpha --alpha 1");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("category=invalid-parameter") != std::string::npos);
}

TEST_CASE("numeric overflow exits 3") {
    const auto r = run_cli("eval-divergence --p 1,0 --q 0.5,0.5 --alpha -30 --beta 2");
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("category=numeric-overflow") != std::string::npos);
}

TEST_CASE("verify-theory writes theory.csv and exits 0 on success") {
    TempDir tmp("theory");
    const auto r = run_cli("verify-theory --case t3-case1 --n 2000 --seed 7 --out " + tmp.str() +
                           "/t");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("violations=0") != std::string::npos);

    const auto table = abkd::read_csv(tmp.str() + "/t/theory.csv");
    REQUIRE(table.header.size() == 5);
    CHECK(table.header[0] == "case");
    CHECK(table.header[1] == "n");
    CHECK(table.header[2] == "violations");
    CHECK(table.header[3] == "wall_time_ms");
    CHECK(table.header[4] == "witness_json");
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0][0] == "t32-case1");
    CHECK(table.rows[0][1] == "2000");
    CHECK(table.rows[0][2] == "0");
    CHECK(table.rows[0][4] == "");
}

TEST_CASE("run directories are never reused") {
    TempDir tmp("dirs");
    const std::string base = tmp.str() + "/out";
    CHECK(run_cli("eval-divergence --p 0.5,0.5 --q 0.4,0.6 --out " + base).exit_code == 0);
    CHECK(run_cli("eval-divergence --p 0.5,0.5 --q 0.4,0.6 --out " + base).exit_code == 0);
    CHECK(run_cli("eval-divergence --p 0.5,0.5 --q 0.4,0.6 --out " + base).exit_code == 0);
    CHECK(fs::exists(base + "/divergence.csv"));
    CHECK(fs::exists(base + "-1/divergence.csv"));
    CHECK(fs::exists(base + "-2/divergence.csv"));
}

TEST_CASE("distill writes run.csv, checkpoints and a summary") {
    TempDir tmp("distill");
    const auto r = run_cli(std::string("distill") + kTinyRun + "--alpha 0.5 --beta 0.5 --out " +
                           tmp.str() + "/run");
    CHECK(r.exit_code == 0);

    const auto table = abkd::read_csv(tmp.str() + "/run/run.csv");
    REQUIRE(table.header ==
            std::vector<std::string>({"epoch", "loss", "ce", "kd", "acc", "entropy"}));
    CHECK(table.rows.size() == 3);
    for (std::size_t r2 = 0; r2 < table.rows.size(); ++r2) {
        for (std::size_t c = 0; c < 6; ++c) {
            abkd::parse_csv_double(table.rows[r2][c], "run.csv", r2 + 2, table.header[c]);
        }
    }
    CHECK(fs::exists(tmp.path / "run/teacher.json"));
    CHECK(fs::exists(tmp.path / "run/student.json"));
    CHECK(fs::exists(tmp.path / "run/summary.json"));
}

TEST_CASE("config file values apply and flags win") {
    TempDir tmp("config");
    {
        std::ofstream cfg(tmp.path / "run.cfg");
        cfg << "# tiny run\n";
        cfg << "alpha = 0.25\n";
        cfg << "beta = 0.75\n";
        cfg << "epochs = 3\n";
        cfg << "classes = 3\nfeatures = 4\ntrain_samples = 90\ntest_samples = 45\n";
        cfg << "teacher_layers = 4,8,3\nstudent_layers = 4,6,3\n";
    }
    const auto r1 = run_cli("distill --config " + (tmp.path / "run.cfg").string() + " --out " +
                            tmp.str() + "/a");
    CHECK(r1.exit_code == 0);
    const auto s1 = read_file(tmp.path / "a/summary.json");
    CHECK(s1.find("\"alpha\": 0.25") != std::string::npos);

    const auto r2 = run_cli("distill --config " + (tmp.path / "run.cfg").string() +
                            " --alpha 0.75 --out " + tmp.str() + "/b");
    CHECK(r2.exit_code == 0);
    const auto s2 = read_file(tmp.path / "b/summary.json");
    CHECK(s2.find("\"alpha\": 0.75") != std::string::npos);

    const auto bad = run_cli("distill --config " + tmp.str() + "/missing.cfg");
    CHECK(bad.exit_code == 2);
}

TEST_CASE("sweep then report") {
    TempDir tmp("sweep");
    const auto r = run_cli(std::string("sweep") + kTinyRun +
                           "--alphas 0,1 --betas 0,1 --seeds 2 --out " + tmp.str() + "/s");
    CHECK(r.exit_code == 0);

    const auto table = abkd::read_csv(tmp.str() + "/s/sweep.csv");
    REQUIRE(table.header ==
            std::vector<std::string>({"alpha", "beta", "seed", "final_acc", "final_entropy"}));
    CHECK(table.rows.size() == 8); // 4 grid points x 2 seeds
    CHECK(fs::exists(tmp.path / "s/heatmap_accuracy.svg"));

    SUBCASE("report renders plots and is idempotent") {
        const auto rep1 = run_cli("report " + tmp.str() + "/s");
        CHECK(rep1.exit_code == 0);
        CHECK(fs::exists(tmp.path / "s/summary.txt"));
        CHECK(fs::exists(tmp.path / "s/accuracy_vs_alpha.svg"));
        CHECK(fs::exists(tmp.path / "s/entropy_vs_beta.svg"));

        const auto heat1 = read_file(tmp.path / "s/heatmap_accuracy.svg");
        const auto line1 = read_file(tmp.path / "s/accuracy_vs_alpha.svg");
        const auto sum1 = read_file(tmp.path / "s/summary.txt");
        const auto rep2 = run_cli("report " + tmp.str() + "/s");
        CHECK(rep2.exit_code == 0);
        CHECK(read_file(tmp.path / "s/heatmap_accuracy.svg") == heat1);
        CHECK(read_file(tmp.path / "s/accuracy_vs_alpha.svg") == line1);
        CHECK(read_file(tmp.path / "s/summary.txt") == sum1);
    }

    SUBCASE("the heatmap cells are the per-point means of the csv") {
        const auto heat = read_file(tmp.path / "s/heatmap_accuracy.svg");
        // mean of the two seed accuracies for the (0, 0) grid point
        double sum = 0.0;
        int n = 0;
        for (const auto& row : table.rows) {
            if (row[0] == "0" && row[1] == "0") {
                sum += std::stod(row[3]);
                ++n;
            }
        }
        REQUIRE(n == 2);
        char expect[32];
        std::snprintf(expect, sizeof(expect), "%.4g", sum / n);
        CHECK(heat.find(expect) != std::string::npos);
    }
}

TEST_CASE("report failure modes") {
    TempDir tmp("report");
    // no CSVs at all
    const auto empty = run_cli("report " + tmp.str());
    CHECK(empty.exit_code == 2);
    CHECK(empty.output.find("category=data-format") != std::string::npos);

    // malformed CSV names the offending row
    {
        std::ofstream csv(tmp.path / "sweep.csv");
        csv << "alpha,beta,seed,final_acc,final_entropy\n";
        csv << "0,0,1,0.9,0.3\n";
        csv << "0,0,1,not-a-number,0.3\n";
    }
    const auto bad = run_cli("report " + tmp.str());
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("row 3") != std::string::npos);

    // single-run directory: summary only, no heatmap
    TempDir tmp2("report2");
    {
        std::ofstream csv(tmp2.path / "run.csv");
        csv << "epoch,loss,ce,kd,acc,entropy\n";
        csv << "1,0.5,0.4,0.1,0.8,0.4\n";
        csv << "2,0.4,0.3,0.1,0.85,0.35\n";
    }
    const auto single = run_cli("report " + tmp2.str());
    CHECK(single.exit_code == 0);
    CHECK(fs::exists(tmp2.path / "summary.txt"));
    CHECK(fs::exists(tmp2.path / "training_curve.svg"));
    CHECK_FALSE(fs::exists(tmp2.path / "heatmap_accuracy.svg"));
}
