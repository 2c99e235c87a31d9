// Command-line front end: divergence evaluation, gradient checks, theorem
// verification, distillation runs, hyperparameter sweeps, and report plots.
//
// Exit codes: 0 success, 2 usage/configuration error, 3 numeric failure,
// 4 theorem violation found.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "abkd/csvio.hpp"
#include "abkd/distill.hpp"
#include "abkd/divergence.hpp"
#include "abkd/dynamics.hpp"
#include "abkd/gradient.hpp"
#include "abkd/nn.hpp"
#include "abkd/prob.hpp"
#include "abkd/report.hpp"
#include "abkd/rng.hpp"
#include "abkd/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitViolation = 4;

std::vector<double> parse_double_list(const std::string& csv, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw abkd::ParameterError("bad value '" + item + "' in " + flag);
        }
    }
    if (out.empty()) throw abkd::ParameterError(flag + " must not be empty");
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& csv, const std::string& flag) {
    std::vector<std::size_t> out;
    for (double v : parse_double_list(csv, flag)) {
        if (v < 0 || v != std::floor(v)) {
            throw abkd::ParameterError(flag + " entries must be non-negative integers");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

// Create the run directory; an existing directory is never reused, a -1/-2/...
// suffix is appended instead.
fs::path make_run_dir(const std::string& base) {
    fs::path dir(base);
    if (!fs::exists(dir)) {
        fs::create_directories(dir);
        return dir;
    }
    for (int i = 1;; ++i) {
        fs::path candidate(base + "-" + std::to_string(i));
        if (!fs::exists(candidate)) {
            fs::create_directories(candidate);
            return candidate;
        }
    }
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// Plain-text key=value config file; '#' starts a comment. CLI flags win over
// file values, which is arranged by loading the file into the defaults before
// CLI11 parses.
std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw abkd::ConfigError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw abkd::ConfigError(path + " line " + std::to_string(line_no) +
                                    ": expected key=value");
        }
        kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
    }
    return kv;
}

struct RunSettings {
    // divergence / training hyperparameters
    std::string family = "ab";
    double alpha = 0.5;
    double beta = 0.5;
    double wsd_wf = 0.5;
    double wsd_wr = 0.5;
    double lambda = 1.0;
    bool no_ce = false;
    double eta = 0.05;
    double temperature = 1.0;
    std::size_t epochs = 50;
    std::size_t batch = 64;
    std::uint64_t seed = 0;
    double momentum = 0.0;
    double weight_decay = 0.0;
    std::string teacher_layers = "20,64,64,10";
    std::string student_layers = "20,16,10";
    std::string activation = "relu";
    // dataset
    std::size_t classes = 10;
    std::size_t features = 20;
    std::size_t train_samples = 2000;
    std::size_t test_samples = 1000;
    double spread = 1.0;
    std::uint64_t data_seed = 1;

    void apply_file(const std::map<std::string, std::string>& kv) {
        auto get = [&](const char* k) -> const std::string* {
            auto it = kv.find(k);
            return it == kv.end() ? nullptr : &it->second;
        };
        if (auto* v = get("family")) family = *v;
        if (auto* v = get("alpha")) alpha = std::stod(*v);
        if (auto* v = get("beta")) beta = std::stod(*v);
        if (auto* v = get("wsd_forward_weight")) wsd_wf = std::stod(*v);
        if (auto* v = get("wsd_reverse_weight")) wsd_wr = std::stod(*v);
        if (auto* v = get("lambda")) lambda = std::stod(*v);
        if (auto* v = get("use_ce")) no_ce = (*v == "0" || *v == "false");
        if (auto* v = get("eta")) eta = std::stod(*v);
        if (auto* v = get("temperature")) temperature = std::stod(*v);
        if (auto* v = get("epochs")) epochs = std::stoul(*v);
        if (auto* v = get("batch")) batch = std::stoul(*v);
        if (auto* v = get("seed")) seed = std::stoull(*v);
        if (auto* v = get("momentum")) momentum = std::stod(*v);
        if (auto* v = get("weight_decay")) weight_decay = std::stod(*v);
        if (auto* v = get("teacher_layers")) teacher_layers = *v;
        if (auto* v = get("student_layers")) student_layers = *v;
        if (auto* v = get("activation")) activation = *v;
        if (auto* v = get("classes")) classes = std::stoul(*v);
        if (auto* v = get("features")) features = std::stoul(*v);
        if (auto* v = get("train_samples")) train_samples = std::stoul(*v);
        if (auto* v = get("test_samples")) test_samples = std::stoul(*v);
        if (auto* v = get("spread")) spread = std::stod(*v);
        if (auto* v = get("data_seed")) data_seed = std::stoull(*v);
    }

    abkd::DatasetSpec dataset_spec() const {
        abkd::DatasetSpec d;
        d.n_classes = classes;
        d.n_features = features;
        d.n_train = train_samples;
        d.n_test = test_samples;
        d.cluster_spread = spread;
        d.seed = data_seed;
        return d;
    }

    abkd::TrainConfig train_config() const {
        abkd::TrainConfig cfg;
        cfg.alpha = alpha;
        cfg.beta = beta;
        cfg.lambda = lambda;
        cfg.use_ce = !no_ce;
        cfg.eta = eta;
        cfg.temperature = temperature;
        cfg.epochs = epochs;
        cfg.batch_size = batch;
        cfg.seed = seed;
        cfg.momentum = momentum;
        cfg.weight_decay = weight_decay;
        const auto act = abkd::activation_from_string(activation);
        cfg.teacher_spec = abkd::MlpSpec{parse_size_list(teacher_layers, "--teacher-layers"), act, 0};
        cfg.student_spec = abkd::MlpSpec{parse_size_list(student_layers, "--student-layers"), act, 0};
        cfg.divergence.family = abkd::family_from_string(family);
        cfg.divergence.alpha = alpha;
        cfg.divergence.beta = beta;
        cfg.divergence.wsd_forward_weight = wsd_wf;
        cfg.divergence.wsd_reverse_weight = wsd_wr;
        if (cfg.teacher_spec.layer_sizes.front() != features ||
            cfg.teacher_spec.layer_sizes.back() != classes ||
            cfg.student_spec.layer_sizes.front() != features ||
            cfg.student_spec.layer_sizes.back() != classes) {
            throw abkd::ConfigError(
                "network layer sizes must run from n_features to n_classes");
        }
        if (cfg.student_spec.layer_sizes.size() >= cfg.teacher_spec.layer_sizes.size()) {
            std::cerr << "note: student is not smaller than teacher (allowed, logged)\n";
        }
        return cfg;
    }
};

void add_run_settings_options(CLI::App* cmd, RunSettings& s, bool with_dataset = true) {
    cmd->add_option("--family", s.family, "divergence family (ab,fkld,rkld,alpha,beta,hellinger,sqeuclid,wsd,jsd)");
    cmd->add_option("--alpha", s.alpha, "alpha parameter");
    cmd->add_option("--beta", s.beta, "beta parameter");
    cmd->add_option("--wsd-forward-weight", s.wsd_wf, "WSD forward KL weight");
    cmd->add_option("--wsd-reverse-weight", s.wsd_wr, "WSD reverse KL weight");
    cmd->add_option("--lambda", s.lambda, "KD loss weight");
    cmd->add_flag("--no-ce", s.no_ce, "drop the cross-entropy term");
    cmd->add_option("--eta", s.eta, "SGD learning rate");
    cmd->add_option("--temperature", s.temperature, "softmax temperature");
    cmd->add_option("--epochs", s.epochs, "training epochs");
    cmd->add_option("--batch", s.batch, "batch size");
    cmd->add_option("--seed", s.seed, "run seed");
    cmd->add_option("--momentum", s.momentum, "SGD momentum (default off)");
    cmd->add_option("--weight-decay", s.weight_decay, "L2 weight decay (default off)");
    cmd->add_option("--teacher-layers", s.teacher_layers, "teacher layer sizes");
    cmd->add_option("--student-layers", s.student_layers, "student layer sizes");
    cmd->add_option("--activation", s.activation, "relu or tanh");
    if (with_dataset) {
        cmd->add_option("--classes", s.classes, "number of classes");
        cmd->add_option("--features", s.features, "feature dimension");
        cmd->add_option("--train-samples", s.train_samples, "training set size");
        cmd->add_option("--test-samples", s.test_samples, "test set size");
        cmd->add_option("--spread", s.spread, "cluster noise stddev");
        cmd->add_option("--data-seed", s.data_seed, "dataset seed");
    }
}

std::vector<std::vector<std::string>> run_csv_rows(const abkd::RunReport& report) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : report.epochs) {
        rows.push_back({std::to_string(e.epoch), abkd::format_double(e.loss),
                        abkd::format_double(e.ce), abkd::format_double(e.kd),
                        abkd::format_double(e.test_accuracy),
                        abkd::format_double(e.mean_entropy)});
    }
    return rows;
}

json witness_json(const abkd::TheoremWitness& w) {
    json j;
    j["p"] = w.p;
    j["q"] = w.q;
    j["y1"] = w.y1;
    j["y2"] = w.y2;
    j["alpha1"] = w.alpha1;
    j["alpha2"] = w.alpha2;
    j["beta"] = w.beta;
    j["delta_lhs"] = w.delta_lhs;
    j["delta_rhs"] = w.delta_rhs;
    j["instance"] = w.instance;
    return j;
}

// ---------------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------------

int cmd_eval_divergence(const std::string& p_csv, const std::string& q_csv,
                        const std::string& family, double alpha, double beta, double wf, double wr,
                        const std::string& out_dir) {
    const auto p = abkd::normalize(parse_double_list(p_csv, "--p"));
    const auto q = abkd::normalize(parse_double_list(q_csv, "--q"));
    abkd::DivergenceSpec spec;
    spec.family = abkd::family_from_string(family);
    spec.alpha = alpha;
    spec.beta = beta;
    spec.wsd_forward_weight = wf;
    spec.wsd_reverse_weight = wr;
    const double value = abkd::evaluate(spec, p, q);
    std::cout << fmt6(value) << "\n";
    if (!out_dir.empty()) {
        const fs::path dir = make_run_dir(out_dir);
        abkd::write_csv((dir / "divergence.csv").string(), {"family", "alpha", "beta", "value"},
                        {{abkd::to_string(spec.family), abkd::format_double(alpha),
                          abkd::format_double(beta), abkd::format_double(value)}});
        std::cout << "wrote " << (dir / "divergence.csv").string() << "\n";
    }
    return kExitOk;
}

int cmd_grad_check(std::size_t n, double h, const std::string& classes_csv, std::uint64_t seed,
                   const std::string& out_dir) {
    const auto class_counts = parse_size_list(classes_csv, "--classes");
    struct FamilyPlan {
        abkd::Family family;
        bool sample_ab; // draw alpha in [0.1,1.5], beta in [0,1.5]
    };
    const FamilyPlan plans[] = {
        {abkd::Family::AlphaBeta, true},    {abkd::Family::FKLD, false},
        {abkd::Family::RKLD, false},        {abkd::Family::AlphaDiv, false},
        {abkd::Family::BetaDiv, true},      {abkd::Family::Hellinger, false},
        {abkd::Family::SquaredEuclidean, false}, {abkd::Family::WSD, false},
        {abkd::Family::JSD, false},
    };

    std::vector<std::vector<std::string>> rows;
    double global_worst = 0.0;
    abkd::Rng rng(seed);
    for (const auto& plan : plans) {
        for (std::size_t c : class_counts) {
            double worst = 0.0;
            double worst_alpha = 0.0, worst_beta = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                abkd::DivergenceSpec spec;
                spec.family = plan.family;
                if (plan.sample_ab) {
                    spec.alpha = rng.uniform(0.1, 1.5);
                    spec.beta = rng.uniform(0.0, 1.5);
                } else if (plan.family == abkd::Family::AlphaDiv) {
                    spec.alpha = rng.uniform(0.15, 0.85);
                } else if (plan.family == abkd::Family::WSD) {
                    spec.wsd_forward_weight = rng.uniform(0.1, 1.0);
                    spec.wsd_reverse_weight = rng.uniform(0.1, 1.0);
                }
                const auto p = abkd::Simplex::from_raw(rng.dirichlet(c));
                std::vector<double> raw(c);
                for (auto& v : raw) v = rng.uniform(-3.0, 3.0);
                const abkd::Logits f(raw);
                const auto q = abkd::softmax(f);
                const auto closed = abkd::grad_logits(spec, p, q);
                const auto fd = abkd::fd_grad_logits(p, f, spec, h);
                for (std::size_t k = 0; k < c; ++k) {
                    const double rel =
                        std::fabs(closed[k] - fd[k]) / (1.0 + std::fabs(fd[k]));
                    if (rel > worst) {
                        worst = rel;
                        worst_alpha = spec.alpha;
                        worst_beta = spec.beta;
                    }
                }
            }
            global_worst = std::max(global_worst, worst);
            rows.push_back({abkd::to_string(plan.family), abkd::format_double(worst_alpha),
                            abkd::format_double(worst_beta), std::to_string(c),
                            abkd::format_double(worst)});
            std::cout << abkd::to_string(plan.family) << " C=" << c
                      << " max_rel_err=" << abkd::format_double(worst) << "\n";
        }
    }
    if (!out_dir.empty()) {
        const fs::path dir = make_run_dir(out_dir);
        abkd::write_csv((dir / "gradcheck.csv").string(),
                        {"family", "alpha", "beta", "C", "max_rel_err"}, rows);
        std::cout << "wrote " << (dir / "gradcheck.csv").string() << "\n";
    }
    std::cout << "overall max_rel_err=" << abkd::format_double(global_worst) << "\n";
    return global_worst <= 1e-6 ? kExitOk : kExitNumeric;
}

int cmd_verify_theory(const std::string& case_name, std::size_t n, std::uint64_t seed,
                      std::size_t classes, double eta, const std::string& out_dir) {
    std::vector<abkd::TheoremCase> cases;
    if (case_name == "all") {
        cases = abkd::all_theorem_cases();
    } else {
        cases.push_back(abkd::theorem_case_from_string(case_name));
    }
    abkd::SamplerConfig cfg;
    cfg.n_classes = classes;
    cfg.eta = eta;
    const unsigned workers = abkd::effective_worker_count(0);

    std::vector<std::vector<std::string>> rows;
    bool any_violation = false;
    for (const auto id : cases) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto report = abkd::verify_theorem(id, cfg, n, seed, workers);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        std::string witness;
        if (report.witness) witness = witness_json(*report.witness).dump();
        rows.push_back({abkd::to_string(id), std::to_string(report.instances_tested),
                        std::to_string(report.violations), abkd::format_double(ms), witness});
        std::cout << abkd::to_string(id) << " n=" << report.instances_tested
                  << " violations=" << report.violations << "\n";
        if (report.violations > 0) any_violation = true;
    }
    if (!out_dir.empty()) {
        const fs::path dir = make_run_dir(out_dir);
        abkd::write_csv((dir / "theory.csv").string(),
                        {"case", "n", "violations", "wall_time_ms", "witness_json"}, rows);
        std::cout << "wrote " << (dir / "theory.csv").string() << "\n";
    }
    return any_violation ? kExitViolation : kExitOk;
}

int cmd_distill(const RunSettings& settings, const std::string& out_dir) {
    const auto [train, test] = abkd::make_blobs(settings.dataset_spec());
    const auto cfg = settings.train_config();
    const fs::path dir = make_run_dir(out_dir);

    const auto teacher = abkd::train_teacher(train, test, cfg.teacher_spec, cfg);
    const auto [t_acc, t_ent] = abkd::evaluate(teacher.params, test, cfg.temperature);
    std::cout << "teacher accuracy=" << fmt6(t_acc) << "\n";

    const auto outcome = abkd::distill_student_full(teacher.params, train, test, cfg);
    const auto& report = outcome.report;
    std::cout << "student accuracy=" << fmt6(report.final_accuracy)
              << " entropy=" << fmt6(report.final_entropy) << "\n";

    abkd::write_csv((dir / "run.csv").string(), {"epoch", "loss", "ce", "kd", "acc", "entropy"},
                    run_csv_rows(report));
    abkd::save_checkpoint(teacher.params, (dir / "teacher.json").string());
    abkd::save_checkpoint(outcome.params, (dir / "student.json").string());

    json summary;
    summary["config_hash"] = report.config_hash;
    summary["teacher_accuracy"] = t_acc;
    summary["final_accuracy"] = report.final_accuracy;
    summary["final_entropy"] = report.final_entropy;
    summary["wall_time_ms"] = report.wall_time_ms;
    summary["family"] = abkd::to_string(cfg.divergence.family);
    summary["alpha"] = cfg.alpha;
    summary["beta"] = cfg.beta;
    summary["lambda"] = cfg.lambda;
    summary["use_ce"] = cfg.use_ce;
    std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
    std::cout << "wrote " << (dir / "run.csv").string() << "\n";
    return kExitOk;
}

int cmd_sweep(const RunSettings& settings, const std::string& alphas_csv,
              const std::string& betas_csv, std::size_t seeds, const std::string& out_dir) {
    const auto alphas = parse_double_list(alphas_csv, "--alphas");
    const auto betas = parse_double_list(betas_csv, "--betas");
    std::vector<std::pair<double, double>> grid;
    for (double a : alphas) {
        for (double b : betas) grid.push_back({a, b});
    }
    const auto [train, test] = abkd::make_blobs(settings.dataset_spec());
    const auto cfg = settings.train_config();
    const fs::path dir = make_run_dir(out_dir);

    const auto result = abkd::sweep(grid, cfg, seeds, train, test);

    std::vector<std::vector<std::string>> rows;
    for (const auto& pt : result.points) {
        rows.push_back({abkd::format_double(pt.alpha), abkd::format_double(pt.beta),
                        std::to_string(pt.seed), abkd::format_double(pt.final_accuracy),
                        abkd::format_double(pt.final_entropy)});
    }
    abkd::write_csv((dir / "sweep.csv").string(),
                    {"alpha", "beta", "seed", "final_acc", "final_entropy"}, rows);

    std::vector<abkd::HeatmapCell> cells;
    for (const auto& s : result.summary) cells.push_back({s.alpha, s.beta, s.mean_accuracy});
    if (cells.size() > 1) {
        abkd::write_text_file((dir / "heatmap_accuracy.svg").string(),
                              abkd::render_heatmap(cells, "mean student accuracy", "alpha", "beta"));
    }

    json summary = json::array();
    std::size_t failures = 0;
    for (const auto& s : result.summary) {
        summary.push_back({{"alpha", s.alpha},
                           {"beta", s.beta},
                           {"mean_accuracy", s.mean_accuracy},
                           {"stddev_accuracy", s.stddev_accuracy},
                           {"mean_entropy", s.mean_entropy},
                           {"stddev_entropy", s.stddev_entropy},
                           {"runs_ok", s.n_ok}});
        std::cout << "alpha=" << abkd::format_double(s.alpha)
                  << " beta=" << abkd::format_double(s.beta)
                  << " mean_acc=" << fmt6(s.mean_accuracy) << " mean_entropy="
                  << fmt6(s.mean_entropy) << "\n";
    }
    for (const auto& pt : result.points) {
        if (!pt.error.empty()) {
            ++failures;
            std::cerr << "run alpha=" << pt.alpha << " beta=" << pt.beta << " seed=" << pt.seed
                      << " failed: " << pt.error << "\n";
        }
    }
    std::ofstream(dir / "sweep_summary.json") << summary.dump(2) << "\n";
    std::cout << "wrote " << (dir / "sweep.csv").string();
    if (failures > 0) std::cout << " (" << failures << " failed run(s) recorded as nan)";
    std::cout << "\n";
    return kExitOk;
}

int cmd_report(const std::string& run_dir) {
    const auto outcome = abkd::render_report(run_dir);
    std::cout << outcome.summary;
    for (const auto& f : outcome.files_written) std::cout << "wrote " << f << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"alpha-beta divergence laboratory"};
    app.require_subcommand(1);

    // eval-divergence
    std::string ed_p, ed_q, ed_family = "ab", ed_out;
    double ed_alpha = 1.0, ed_beta = 0.0, ed_wf = 0.5, ed_wr = 0.5;
    auto* ed = app.add_subcommand("eval-divergence", "evaluate one divergence value");
    ed->add_option("--p", ed_p, "teacher distribution, comma separated")->required();
    ed->add_option("--q", ed_q, "student distribution, comma separated")->required();
    ed->add_option("--family", ed_family, "divergence family");
    ed->add_option("--alpha", ed_alpha, "alpha");
    ed->add_option("--beta", ed_beta, "beta");
    ed->add_option("--wsd-forward-weight", ed_wf, "WSD forward weight");
    ed->add_option("--wsd-reverse-weight", ed_wr, "WSD reverse weight");
    ed->add_option("--out", ed_out, "output directory for divergence.csv");

    // grad-check
    std::size_t gc_n = 1000;
    double gc_h = 1e-5;
    std::string gc_classes = "2,5,50", gc_out;
    std::uint64_t gc_seed = 0;
    auto* gc = app.add_subcommand("grad-check", "closed-form vs finite-difference gradients");
    gc->add_option("--n", gc_n, "instances per family and class count");
    gc->add_option("--fd-step", gc_h, "finite-difference step");
    gc->add_option("--classes", gc_classes, "class counts, comma separated");
    gc->add_option("--seed", gc_seed, "rng seed");
    gc->add_option("--out", gc_out, "output directory for gradcheck.csv");

    // verify-theory
    std::string vt_case = "all", vt_out;
    std::size_t vt_n = 10000, vt_classes = 5;
    std::uint64_t vt_seed = 7;
    double vt_eta = 0.1;
    auto* vt = app.add_subcommand("verify-theory", "randomized theorem verification");
    vt->add_option("--case", vt_case, "theorem case id (t32-case1..4, t43-case1..3, tf-case1..4, all)");
    vt->add_option("--n", vt_n, "instances per case");
    vt->add_option("--seed", vt_seed, "rng seed");
    vt->add_option("--classes", vt_classes, "simplex dimension");
    vt->add_option("--eta", vt_eta, "step size");
    vt->add_option("--out", vt_out, "output directory for theory.csv");

    // distill
    RunSettings ds;
    std::string ds_out = "runs/distill", ds_config;
    auto* dist = app.add_subcommand("distill", "train a teacher and distill one student");
    dist->add_option("--config", ds_config, "key=value config file (flags win)");
    add_run_settings_options(dist, ds);
    dist->add_option("--out", ds_out, "output directory");

    // sweep
    RunSettings sw;
    std::string sw_out = "runs/sweep", sw_config;
    std::string sw_alphas = "0,0.25,0.5,0.75,1";
    std::string sw_betas = "0,0.25,0.5,0.75,1";
    std::size_t sw_seeds = 5;
    auto* swc = app.add_subcommand("sweep", "grid sweep over (alpha, beta)");
    swc->add_option("--config", sw_config, "key=value config file (flags win)");
    add_run_settings_options(swc, sw);
    swc->add_option("--alphas", sw_alphas, "alpha grid, comma separated");
    swc->add_option("--betas", sw_betas, "beta grid, comma separated");
    swc->add_option("--seeds", sw_seeds, "seeds per grid point");
    swc->add_option("--out", sw_out, "output directory");

    // report
    std::string rp_dir;
    auto* rp = app.add_subcommand("report", "render plots and summary from a run directory");
    rp->add_option("run_dir", rp_dir, "directory with sweep.csv and/or run.csv")->required();

    // Pre-scan for --config so file values act as defaults and flags win.
    try {
        for (int i = 1; i + 1 < argc; ++i) {
            if (std::string(argv[i]) == "--config") {
                const auto kv = load_config_file(argv[i + 1]);
                ds.apply_file(kv);
                sw.apply_file(kv);
            }
        }
    } catch (const abkd::Error& e) {
        std::cerr << "error: category=" << to_string(e.category()) << ": " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (ed->parsed()) {
            return cmd_eval_divergence(ed_p, ed_q, ed_family, ed_alpha, ed_beta, ed_wf, ed_wr,
                                       ed_out);
        }
        if (gc->parsed()) return cmd_grad_check(gc_n, gc_h, gc_classes, gc_seed, gc_out);
        if (vt->parsed()) {
            return cmd_verify_theory(vt_case, vt_n, vt_seed, vt_classes, vt_eta, vt_out);
        }
        if (dist->parsed()) return cmd_distill(ds, ds_out);
        if (swc->parsed()) return cmd_sweep(sw, sw_alphas, sw_betas, sw_seeds, sw_out);
        if (rp->parsed()) return cmd_report(rp_dir);
    } catch (const abkd::Error& e) {
        std::cerr << "error: category=" << to_string(e.category()) << ": " << e.what() << "\n";
        switch (e.category()) {
            case abkd::ErrorCategory::NumericOverflow:
            case abkd::ErrorCategory::TrainingFailure:
                return kExitNumeric;
            default:
                return kExitUsage;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: category=internal: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}
