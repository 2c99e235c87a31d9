#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "abkd/csvio.hpp"
#include "abkd/error.hpp"
#include "abkd/svg.hpp"

namespace abkd {

// Render plots and a plain-text summary from the CSVs stored in a run
// directory. Strictly a projection of the stored data; nothing is recomputed.
struct ReportOutcome {
    std::vector<std::string> files_written;
    std::string summary;
};

namespace detail {

struct SweepRow {
    double alpha, beta, acc, entropy;
    std::string seed;
};

inline std::vector<SweepRow> load_sweep_rows(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto ca = t.column("alpha", path);
    const auto cb = t.column("beta", path);
    const auto cs = t.column("seed", path);
    const auto cacc = t.column("final_acc", path);
    const auto cent = t.column("final_entropy", path);
    std::vector<SweepRow> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        SweepRow row;
        row.alpha = parse_csv_double(t.rows[r][ca], path, r + 2, "alpha");
        row.beta = parse_csv_double(t.rows[r][cb], path, r + 2, "beta");
        row.seed = t.rows[r][cs];
        row.acc = parse_csv_double(t.rows[r][cacc], path, r + 2, "final_acc");
        row.entropy = parse_csv_double(t.rows[r][cent], path, r + 2, "final_entropy");
        rows.push_back(row);
    }
    if (rows.empty()) throw DataError(path + ": no data rows");
    return rows;
}

struct Agg {
    double sum_acc = 0.0, sum_ent = 0.0;
    std::size_t n = 0;
};

} // namespace detail

inline ReportOutcome render_report(const std::string& run_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(run_dir)) throw DataError("not a directory: " + run_dir);
    const std::string sweep_path = (fs::path(run_dir) / "sweep.csv").string();
    const std::string run_path = (fs::path(run_dir) / "run.csv").string();
    const bool has_sweep = fs::exists(sweep_path);
    const bool has_run = fs::exists(run_path);
    if (!has_sweep && !has_run) {
        throw DataError(run_dir + ": no sweep.csv or run.csv to report on");
    }

    ReportOutcome outcome;
    std::ostringstream summary;

    if (has_sweep) {
        const auto rows = detail::load_sweep_rows(sweep_path);

        // Mean per grid point, NaN rows (failed runs) excluded.
        std::map<std::pair<double, double>, detail::Agg> by_point;
        std::map<double, detail::Agg> by_alpha, by_beta;
        for (const auto& r : rows) {
            if (!std::isfinite(r.acc)) continue;
            auto& a = by_point[{r.alpha, r.beta}];
            a.sum_acc += r.acc;
            a.sum_ent += r.entropy;
            ++a.n;
            auto& aa = by_alpha[r.alpha];
            aa.sum_acc += r.acc;
            aa.sum_ent += r.entropy;
            ++aa.n;
            auto& ab = by_beta[r.beta];
            ab.sum_acc += r.acc;
            ab.sum_ent += r.entropy;
            ++ab.n;
        }
        if (by_point.empty()) throw DataError(sweep_path + ": every row is NaN");

        summary << "sweep points: " << by_point.size() << " (" << rows.size() << " runs)\n";
        summary << "alpha    beta     mean_acc   mean_entropy\n";
        for (const auto& [key, agg] : by_point) {
            summary << format_double(key.first) << "  " << format_double(key.second) << "  "
                    << format_double(agg.sum_acc / agg.n) << "  "
                    << format_double(agg.sum_ent / agg.n) << "\n";
        }
        const auto best = std::max_element(by_point.begin(), by_point.end(),
                                           [](const auto& a, const auto& b) {
                                               return a.second.sum_acc / a.second.n <
                                                      b.second.sum_acc / b.second.n;
                                           });
        summary << "best point: alpha=" << format_double(best->first.first)
                << " beta=" << format_double(best->first.second)
                << " mean_acc=" << format_double(best->second.sum_acc / best->second.n) << "\n";

        if (by_point.size() > 1) {
            std::vector<HeatmapCell> cells;
            for (const auto& [key, agg] : by_point) {
                cells.push_back({key.first, key.second, agg.sum_acc / agg.n});
            }
            const std::string path = (fs::path(run_dir) / "heatmap_accuracy.svg").string();
            write_text_file(path,
                            render_heatmap(cells, "mean student accuracy", "alpha", "beta"));
            outcome.files_written.push_back(path);

            auto line_of = [](const std::map<double, detail::Agg>& m, bool entropy) {
                LineSeries s;
                for (const auto& [x, agg] : m) {
                    s.points.push_back({x, (entropy ? agg.sum_ent : agg.sum_acc) / agg.n});
                }
                return s;
            };
            const struct {
                const char* file;
                const char* title;
                const char* xlabel;
                const char* ylabel;
                LineSeries series;
            } plots[] = {
                {"accuracy_vs_alpha.svg", "accuracy vs alpha", "alpha", "accuracy",
                 line_of(by_alpha, false)},
                {"accuracy_vs_beta.svg", "accuracy vs beta", "beta", "accuracy",
                 line_of(by_beta, false)},
                {"entropy_vs_alpha.svg", "entropy vs alpha", "alpha", "entropy",
                 line_of(by_alpha, true)},
                {"entropy_vs_beta.svg", "entropy vs beta", "beta", "entropy",
                 line_of(by_beta, true)},
            };
            for (const auto& p : plots) {
                const std::string path = (fs::path(run_dir) / p.file).string();
                write_text_file(path, render_line_plot({p.series}, p.title, p.xlabel, p.ylabel));
                outcome.files_written.push_back(path);
            }
        }
    }

    if (has_run) {
        const CsvTable t = read_csv(run_path);
        const auto ce = t.column("epoch", run_path);
        const auto cl = t.column("loss", run_path);
        const auto cacc = t.column("acc", run_path);
        const auto cent = t.column("entropy", run_path);
        if (t.rows.empty()) throw DataError(run_path + ": no data rows");
        summary << "run epochs: " << t.rows.size() << "\n";
        const auto& last = t.rows.back();
        summary << "final: epoch=" << last[ce] << " loss=" << last[cl] << " acc=" << last[cacc]
                << " entropy=" << last[cent] << "\n";

        LineSeries loss_s{"loss", {}}, acc_s{"accuracy", {}};
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const double ep = parse_csv_double(t.rows[r][ce], run_path, r + 2, "epoch");
            loss_s.points.push_back({ep, parse_csv_double(t.rows[r][cl], run_path, r + 2, "loss")});
            acc_s.points.push_back({ep, parse_csv_double(t.rows[r][cacc], run_path, r + 2, "acc")});
        }
        const std::string path = (fs::path(run_dir) / "training_curve.svg").string();
        write_text_file(path, render_line_plot({loss_s, acc_s}, "training curve", "epoch", ""));
        outcome.files_written.push_back(path);
    }

    outcome.summary = summary.str();
    const std::string sum_path = (fs::path(run_dir) / "summary.txt").string();
    write_text_file(sum_path, outcome.summary);
    outcome.files_written.push_back(sum_path);
    return outcome;
}

} // namespace abkd
