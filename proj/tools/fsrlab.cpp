#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "fsrlab/bench.hpp"
#include "fsrlab/config.hpp"
#include "fsrlab/svg.hpp"

namespace fs = std::filesystem;
using namespace fsrlab;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string default_out_root() {
    if (const char* env = std::getenv("FSRLAB_OUT")) return env;
    return "runs";
}

void write_manifest(const fs::path& dir, const Json& config, std::uint64_t seed,
                    const std::string& arm, const MetricsLog& log, const std::string& status) {
    std::ofstream out(dir / "manifest.txt");
    out << "# fsrlab run manifest\n";
    out << "version = " << kVersion << "\n";
    out << "arm = " << arm << "\n";
    out << "seed = " << seed << "\n";
    out << "config_hash = " << std::hex << config_hash(config) << std::dec << "\n";
    out << "status = " << status << "\n";
    for (std::size_t t = 0; t < log.task_fingerprints.size(); ++t)
        out << "task" << (t + 1) << ".fingerprint = " << std::hex << log.task_fingerprints[t]
            << std::dec << "\n";
    for (std::size_t t = 0; t < log.task_seconds.size(); ++t)
        out << "task" << (t + 1) << ".seconds = " << log.task_seconds[t] << "\n";
    for (const auto& line : flatten_config(config)) out << line << "\n";
}

struct Job {
    Arm arm;
    std::uint64_t seed = 0;
};

std::mutex print_mutex;

void say(const std::string& msg) {
    std::lock_guard<std::mutex> lock(print_mutex);
    std::cout << msg << std::endl;
}

int run_one(const Job& job, const fs::path& out_root, bool compute_rho, bool emit_figures) {
    const fs::path dir = out_root / job.arm.name / ("seed" + std::to_string(job.seed));
    fs::create_directories(dir);
    MetricsLog partial;
    try {
        auto on_task = [&](int t, const MetricsLog& log, const Mlp& model,
                           const PreparedStream& ps) {
            partial = log;
            write_metrics_csvs(dir.string(), log); // flush progress after every task
            if (emit_figures) {
                const auto& first = ps.stream.tasks[0];
                const auto heat = prediction_heatmap(model, first.test, log.head_of_task[0]);
                write_heatmap_csv(
                    (dir / ("heatmap_task1_after" + std::to_string(t + 1) + ".csv")).string(),
                    heat);
                if (t + 1 == log.n_tasks) {
                    auto [means, stds] = logit_stats(model, first.test, log.head_of_task[0]);
                    write_logit_stats_csv((dir / "logit_stats_task1.csv").string(), means,
                                          stds);
                }
            }
        };
        const auto log = run_sequence(job.arm.config, job.seed, on_task);
        if (compute_rho) {
            const auto joint = joint_reference(job.arm.config, job.seed);
            const auto rho = forgetting_ratio(log, joint, chance_accuracies(log));
            write_rho_csv((dir / "rho.csv").string(), rho);
        }
        write_manifest(dir, job.arm.json, job.seed, job.arm.name, log, "ok");
        const auto avg = average_accuracy(log);
        std::ostringstream ss;
        ss << job.arm.name << " seed " << job.seed << ": avg acc " << std::fixed
           << std::setprecision(4) << avg.back();
        say(ss.str());
        return 0;
    } catch (const std::exception& e) {
        write_metrics_csvs(dir.string(), partial);
        write_manifest(dir, job.arm.json, job.seed, job.arm.name, partial,
                       std::string("failed: ") + e.what());
        say(job.arm.name + " seed " + std::to_string(job.seed) + " FAILED: " + e.what());
        return kExitRuntime;
    }
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& out_dir, int jobs) {
    Json config;
    RunSpec spec;
    try {
        config = load_config_file(config_path);
        for (const auto& o : overrides) apply_override(config, o);
        spec = run_spec_from_json(config);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return kExitUsage;
    }

    const fs::path out_root = out_dir;
    fs::create_directories(out_root);

    std::vector<Job> queue;
    for (const auto& arm : spec.arms)
        for (auto seed : spec.seeds) queue.push_back(Job{arm, seed});

    std::atomic<std::size_t> next{0};
    std::atomic<int> failures{0};
    const int nthreads = std::max(1, std::min<int>(jobs, int(queue.size())));
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= queue.size()) return;
            if (run_one(queue[i], out_root, spec.compute_rho, spec.emit_figures) != 0)
                ++failures;
        }
    };
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return failures.load() == 0 ? 0 : kExitRuntime;
}

int cmd_budget(const std::string& spec, bool include_bias, std::size_t d, std::size_t K,
               int n_tasks) {
    std::size_t p = 0;
    try {
        p = parse_param_spec(spec, include_bias);
    } catch (const std::exception& e) {
        std::cerr << "model spec error: " << e.what() << std::endl;
        return kExitUsage;
    }
    const auto rep = ewc_equivalent_budget(p, d, K, n_tasks);
    std::cout << "parameters = " << rep.param_count << "\n";
    std::cout << "ewc_floats = " << rep.ewc_floats << "\n";
    std::cout << "per_image_floats = " << rep.per_image_floats << "\n";
    std::cout << "images_per_task = " << rep.images_per_task << "\n";
    std::cout << "images_per_task_uint8 = " << rep.images_per_task_uint8 << "\n";
    return 0;
}

int cmd_select_demo(const std::string& csv, const std::string& images,
                    const std::string& labels, bool synthetic, const std::string& strategy,
                    std::size_t per_class, std::uint64_t seed, const std::string& out_dir) {
    SelectionKind kind;
    try {
        kind = selection_from_name(strategy);
    } catch (const std::exception& e) {
        std::cerr << e.what() << std::endl;
        return kExitUsage;
    }
    LabeledDataset ds;
    try {
        if (synthetic) {
            SyntheticSpec sp;
            sp.seed = seed;
            ds = make_synthetic_digits(sp).first;
        } else if (!csv.empty()) {
            ds = load_csv(csv);
        } else if (!images.empty() && !labels.empty()) {
            ds = load_idx(images, labels);
        } else {
            std::cerr << "select-demo needs --csv, --images + --labels, or --synthetic"
                      << std::endl;
            return kExitUsage;
        }
    } catch (const std::exception& e) {
        std::cerr << "dataset error: " << e.what() << std::endl;
        return kExitUsage;
    }

    try {
        Rng rng = Rng(seed).stream("select-demo");
        Mlp probe = build_mlp<float>(ds.input_dim(), {64}, {std::size_t(ds.class_count)},
                                     Activation::LeakyRelu, 0.2f, Rng(seed).stream("init"));
        OptimizerConfig opt;
        opt.kind = OptKind::Adam;
        opt.lr = 1e-4f;
        const auto idx = select_indices(kind, probe, ds, per_class, 1, opt, 0, 128, rng);

        fs::create_directories(out_dir);
        {
            std::ofstream out(fs::path(out_dir) / "selected_indices.csv");
            out << "index,class\n";
            for (auto i : idx) out << i << "," << ds.labels[i] << "\n";
        }
        {
            // per-class count plus how close the picks sit to the class mean
            std::map<int, std::vector<std::size_t>> by_class, picked;
            for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
            for (auto i : idx) picked[ds.labels[i]].push_back(i);
            std::ofstream out(fs::path(out_dir) / "selection_summary.csv");
            out << "class,selected,mean_dist_to_class_mean\n";
            for (const auto& [cls, all] : by_class) {
                const std::size_t d = ds.input_dim();
                std::vector<double> mean(d, 0.0);
                for (auto i : all)
                    for (std::size_t k = 0; k < d; ++k) mean[k] += double(ds.row(i)[k]);
                for (auto& v : mean) v /= double(all.size());
                double dist = 0.0;
                for (auto i : picked[cls]) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < d; ++k) {
                        const double diff = double(ds.row(i)[k]) - mean[k];
                        s += diff * diff;
                    }
                    dist += std::sqrt(s);
                }
                out << cls << "," << picked[cls].size() << ","
                    << (picked[cls].empty() ? 0.0 : dist / double(picked[cls].size())) << "\n";
            }
        }
        std::cout << "selected " << idx.size() << " indices -> " << out_dir << std::endl;
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "selection failed: " << e.what() << std::endl;
        return kExitRuntime;
    }
}

// (t, value) columns of a two-column csv with a header line
std::vector<double> read_curve_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing " + path.string());
    std::string line;
    std::getline(in, line); // header
    std::vector<double> vals;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        vals.push_back(std::stod(line.substr(comma + 1)));
    }
    return vals;
}

int cmd_report(const std::string& run_dir) {
    const fs::path root = run_dir;
    if (!fs::is_directory(root)) {
        std::cerr << "not a directory: " << run_dir << std::endl;
        return kExitUsage;
    }
    struct ArmData {
        std::string name;
        std::vector<std::vector<double>> avg, first, rho; // per seed
    };
    std::vector<ArmData> arms;
    std::vector<std::string> missing;

    for (const auto& arm_entry : fs::directory_iterator(root)) {
        if (!arm_entry.is_directory() || arm_entry.path().filename() == "report") continue;
        ArmData arm;
        arm.name = arm_entry.path().filename().string();
        for (const auto& seed_entry : fs::directory_iterator(arm_entry.path())) {
            if (!seed_entry.is_directory()) continue;
            const auto avg_path = seed_entry.path() / "avg_accuracy.csv";
            if (!fs::exists(avg_path)) {
                missing.push_back(seed_entry.path().string());
                continue;
            }
            arm.avg.push_back(read_curve_csv(avg_path));
            arm.first.push_back(read_curve_csv(seed_entry.path() / "first_task.csv"));
            const auto rho_path = seed_entry.path() / "rho.csv";
            if (fs::exists(rho_path)) arm.rho.push_back(read_curve_csv(rho_path));
        }
        if (!arm.avg.empty()) arms.push_back(std::move(arm));
    }
    if (arms.empty()) {
        std::cerr << "no completed runs under " << run_dir << std::endl;
        return kExitRuntime;
    }
    std::sort(arms.begin(), arms.end(),
              [](const ArmData& a, const ArmData& b) { return a.name < b.name; });

    const fs::path rep = root / "report";
    fs::create_directories(rep);

    auto aggregate = [&](const std::string& tag,
                         std::vector<std::vector<double>> ArmData::*member,
                         const std::string& ylab) {
        std::vector<SvgSeries> series;
        for (const auto& arm : arms) {
            const auto& runs = arm.*member;
            if (runs.empty()) continue;
            const std::size_t T = runs[0].size();
            SvgSeries s;
            s.label = arm.name;
            std::ofstream out(rep / (arm.name + "_" + tag + ".csv"));
            out << std::setprecision(10) << "t,mean,stderr\n";
            for (std::size_t t = 0; t < T; ++t) {
                double sum = 0.0;
                for (const auto& r : runs) sum += r[t];
                const double mean = sum / double(runs.size());
                double var = 0.0;
                for (const auto& r : runs) var += (r[t] - mean) * (r[t] - mean);
                const double stderr_v =
                    runs.size() > 1
                        ? std::sqrt(var / double(runs.size() - 1)) /
                              std::sqrt(double(runs.size()))
                        : 0.0;
                out << (t + 1) << "," << mean << "," << stderr_v << "\n";
                s.x.push_back(double(t + 1));
                s.y.push_back(mean);
                s.yerr.push_back(stderr_v);
            }
            series.push_back(std::move(s));
        }
        if (!series.empty())
            write_line_svg((rep / (tag + ".svg")).string(), tag, "task", ylab, series);
    };
    aggregate("avg_accuracy", &ArmData::avg, "average accuracy");
    aggregate("first_task", &ArmData::first, "first-task accuracy");
    aggregate("rho", &ArmData::rho, "forgetting ratio");

    // final prediction heatmaps, first seed of each arm
    for (const auto& arm : arms) {
        for (const auto& seed_entry : fs::directory_iterator(root / arm.name)) {
            if (!seed_entry.is_directory()) continue;
            std::vector<fs::path> heatmaps;
            for (const auto& f : fs::directory_iterator(seed_entry.path()))
                if (f.path().filename().string().rfind("heatmap_", 0) == 0 &&
                    f.path().extension() == ".csv")
                    heatmaps.push_back(f.path());
            if (heatmaps.empty()) continue;
            std::sort(heatmaps.begin(), heatmaps.end());
            const auto& last = heatmaps.back();
            std::ifstream in(last);
            std::vector<float> vals;
            std::size_t rows = 0, cols = 0;
            std::string line;
            while (std::getline(in, line)) {
                std::stringstream ss(line);
                std::string cell;
                std::size_t c = 0;
                while (std::getline(ss, cell, ',')) {
                    vals.push_back(std::stof(cell));
                    ++c;
                }
                cols = c;
                ++rows;
            }
            Tensor m = Tensor::zeros({rows, cols});
            m.data = vals;
            write_heatmap_svg((rep / (arm.name + "_" + last.stem().string() + ".svg")).string(),
                              arm.name, m);
            break;
        }
    }

    if (!missing.empty()) {
        std::cerr << "missing/partial runs:" << std::endl;
        for (const auto& m : missing) std::cerr << "  " << m << std::endl;
        return kExitRuntime;
    }
    std::cout << "report written to " << rep.string() << std::endl;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"continual-learning benchmark lab"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "execute experiment arms from a config file");
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = default_out_root();
    int jobs = 1;
    run->add_option("config", config_path, "config file (json or key = value lines)")
        ->required();
    run->add_option("--override,-O", overrides, "key.path=value override (repeatable)");
    run->add_option("--out,-o", out_dir, "output root (default $FSRLAB_OUT or ./runs)");
    run->add_option("--jobs,-j", jobs, "parallel arms")->check(CLI::PositiveNumber);

    auto* budget = app.add_subcommand("budget", "EWC-equivalent memory budget arithmetic");
    std::string model_spec;
    bool include_bias = false;
    std::size_t budget_d = 784, budget_k = 10;
    int budget_tasks = 20;
    budget->add_option("--spec,-s", model_spec,
                       "layers: mlp:784-1024-10, fc:AxB, conv:KHxKWxCINxCOUT, or a count")
        ->required();
    budget->add_flag("--include-bias", include_bias, "count biases too");
    budget->add_option("--dim,-d", budget_d, "input floats per image");
    budget->add_option("--classes,-k", budget_k, "logits per image");
    budget->add_option("--tasks,-t", budget_tasks, "task count");

    auto* sel = app.add_subcommand("select-demo", "run one selection strategy standalone");
    std::string sel_csv, sel_images, sel_labels, sel_strategy = "stratified_random";
    bool sel_synthetic = false;
    std::size_t sel_m = 1;
    std::uint64_t sel_seed = 1;
    std::string sel_out = "selection";
    sel->add_option("--csv", sel_csv, "flat csv dataset");
    sel->add_option("--images", sel_images, "idx image file");
    sel->add_option("--labels", sel_labels, "idx label file");
    sel->add_flag("--synthetic", sel_synthetic, "use the built-in synthetic dataset");
    sel->add_option("--strategy", sel_strategy, "stratified_random|herding|gradient");
    sel->add_option("--per-class,-m", sel_m, "selections per class");
    sel->add_option("--seed", sel_seed, "selection seed");
    sel->add_option("--out,-o", sel_out, "output directory");

    auto* rep = app.add_subcommand("report", "aggregate seeds and render svg plots");
    std::string report_dir;
    rep->add_option("run_dir", report_dir, "directory written by `run`")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, overrides, out_dir, jobs);
        if (budget->parsed())
            return cmd_budget(model_spec, include_bias, budget_d, budget_k, budget_tasks);
        if (sel->parsed())
            return cmd_select_demo(sel_csv, sel_images, sel_labels, sel_synthetic,
                                   sel_strategy, sel_m, sel_seed, sel_out);
        if (rep->parsed()) return cmd_report(report_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << std::endl;
        return kExitRuntime;
    }
    return kExitUsage;
}
