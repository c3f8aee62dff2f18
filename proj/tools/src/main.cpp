#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <alc/dataset.hpp>
#include <alc/format.hpp>
#include <alc/metrics.hpp>
#include <alc/refine.hpp>
#include <alc/selection.hpp>
#include <alc/synthgen.hpp>
#include <alc/trainer.hpp>
#include <alc/version.hpp>

#include "manifest.hpp"
#include "pgm.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Documented precedence: flag > ALC_SEED environment variable > default.
std::uint64_t pick_seed(const CLI::Option* opt, std::uint64_t flag_value,
                        std::uint64_t fallback) {
    if (opt->count() > 0) return flag_value;
    if (const char* env = std::getenv("ALC_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0')
            throw CLI::ValidationError("ALC_SEED", "ALC_SEED is not an unsigned integer");
        return v;
    }
    return fallback;
}

struct SweepAxis {
    std::string param;  // k, alpha or beta
    std::vector<double> values;
};

SweepAxis parse_sweep(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos)
        throw CLI::ValidationError("--sweep", "expected param=start:end:step");
    SweepAxis axis;
    axis.param = text.substr(0, eq);
    if (axis.param != "k" && axis.param != "alpha" && axis.param != "beta")
        throw CLI::ValidationError("--sweep", "sweepable params: k, alpha, beta");
    double start, end, step;
    char c1, c2;
    std::istringstream is(text.substr(eq + 1));
    if (!(is >> start >> c1 >> end >> c2 >> step) || c1 != ':' || c2 != ':' ||
        is.peek() != EOF)
        throw CLI::ValidationError("--sweep", "expected param=start:end:step");
    if (step <= 0.0 || end < start)
        throw CLI::ValidationError("--sweep", "need step > 0 and end >= start");
    const int count = static_cast<int>(std::floor((end - start) / step + 1e-9)) + 1;
    for (int i = 0; i < count; ++i) {
        const double v = start + step * i;
        axis.values.push_back(std::round(v * 1e9) / 1e9);
    }
    return axis;
}

void write_grid_csv(const fs::path& file, const alc::Tensor& plane) {
    std::ofstream f(file, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + file.string());
    for (int y = 0; y < plane.dim(0); ++y) {
        for (int x = 0; x < plane.dim(1); ++x) {
            if (x) f << ',';
            f << alc::fmt_double(plane.at(y, x));
        }
        f << '\n';
    }
}

void write_label_csv(const fs::path& file, const alc::LabelGrid& label) {
    std::ofstream f(file, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + file.string());
    for (int y = 0; y < label.h; ++y) {
        for (int x = 0; x < label.w; ++x) {
            if (x) f << ',';
            f << static_cast<int>(label.at(y, x));
        }
        f << '\n';
    }
}

alc::Tensor channel_plane(const alc::Tensor& hwc, int c) {
    alc::Tensor plane = alc::Tensor::zeros({hwc.dim(0), hwc.dim(1)});
    for (int y = 0; y < hwc.dim(0); ++y)
        for (int x = 0; x < hwc.dim(1); ++x) plane.at(y, x) = hwc.at(y, x, c);
    return plane;
}

// ---- gen ----------------------------------------------------------------

struct GenArgs {
    std::uint64_t seed = 1;
    int n = 100;
    int size = 32;
    int classes = 2;
    double hq_ratio = 0.1;
    int noise_min = 3;
    int noise_max = 15;
    std::string out;
    bool no_clobber = false;
};

int run_gen(const GenArgs& a, const std::string& cmdline) {
    if (!alc::tools::prepare_out_dir(a.out, a.no_clobber)) return 1;
    const json cfg{{"seed", a.seed},        {"n", a.n},
                   {"size", a.size},        {"classes", a.classes},
                   {"hq_ratio", a.hq_ratio}, {"noise_min", a.noise_min},
                   {"noise_max", a.noise_max}};
    alc::tools::write_run_manifest(a.out, cmdline, cfg, "");

    alc::Dataset ds = alc::make_shapes_dataset(a.seed, a.n, a.size, a.size, a.classes);
    alc::split_hq_lq(ds, a.hq_ratio, a.noise_min, a.noise_max, a.seed);
    alc::save_dataset(ds, a.out);
    const std::string fp = alc::tools::fingerprint_hex(alc::dataset_fingerprint(ds));
    alc::tools::write_run_manifest(a.out, cmdline, cfg, fp);

    int hq = 0;
    for (const auto& s : ds.samples) hq += s.quality == alc::Quality::kHq ? 1 : 0;
    std::cout << "wrote " << ds.samples.size() << " samples (" << hq << " hq, "
              << ds.samples.size() - hq << " lq) to " << a.out << "\n";
    std::cout << "fingerprint " << fp << "\n";
    return 0;
}

// ---- train --------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string out;
    std::string mode = "alc";
    alc::TrainConfig cfg;
    std::vector<std::string> sweeps;
    bool no_clobber = false;
};

void apply_mode(alc::TrainConfig& cfg, const std::string& mode) {
    cfg.mt_baseline = mode == "mt";
    cfg.disable_ls = mode == "alc-no-ls";
    cfg.disable_lr = mode == "alc-no-lr";
}

int train_one(const alc::Dataset& ds, const alc::TrainConfig& cfg, const fs::path& out,
              const std::string& cmdline, const std::string& fp, bool no_clobber) {
    if (!alc::tools::prepare_out_dir(out, no_clobber)) return 1;
    alc::tools::write_run_manifest(out, cmdline,
                                   json::parse(alc::config_json_string(cfg.normalized())),
                                   fp);
    const alc::RunResult res = alc::run_training(ds, cfg, out);
    for (const auto& ev : res.evals)
        std::cout << "step " << ev.step << "  dice " << alc::fmt_double(ev.dice)
                  << "  refined " << alc::fmt_double(ev.refined_dice) << "  noisy "
                  << alc::fmt_double(ev.noisy_dice) << "\n";
    std::cout << "run complete: " << out.string() << "\n";
    return 0;
}

int run_train(const TrainArgs& a, const std::string& cmdline) {
    const alc::Dataset ds = alc::load_dataset(a.data);
    alc::TrainConfig cfg = a.cfg;
    cfg.arch.n_classes = ds.n_classes;
    cfg.arch.dropout_rate = cfg.dropout_rate;
    apply_mode(cfg, a.mode);
    const std::string fp = alc::tools::fingerprint_hex(alc::dataset_fingerprint(ds));

    if (a.sweeps.empty())
        return train_one(ds, cfg, a.out, cmdline, fp, a.no_clobber);

    std::vector<SweepAxis> axes;
    for (const auto& s : a.sweeps) axes.push_back(parse_sweep(s));
    if (!alc::tools::prepare_out_dir(a.out, a.no_clobber)) return 1;
    json sweep_cfg = json::parse(alc::config_json_string(cfg.normalized()));
    for (const auto& ax : axes) sweep_cfg["sweep_" + ax.param] = ax.values;
    alc::tools::write_run_manifest(a.out, cmdline, sweep_cfg, fp);

    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
        alc::TrainConfig sub = cfg;
        std::string name;
        for (std::size_t i = 0; i < axes.size(); ++i) {
            const double v = axes[i].values[idx[i]];
            if (axes[i].param == "k") sub.k_ratio = v;
            else if (axes[i].param == "alpha") sub.alpha = v;
            else sub.beta = v;
            if (i) name += '_';
            name += axes[i].param + "_" + alc::fmt_double(v);
        }
        std::cout << "sweep " << name << "\n";
        const int rc = train_one(ds, sub, fs::path(a.out) / name, cmdline, fp, a.no_clobber);
        if (rc != 0) return rc;
        std::size_t i = 0;
        for (; i < axes.size(); ++i) {
            if (++idx[i] < axes[i].values.size()) break;
            idx[i] = 0;
        }
        if (i == axes.size()) break;
    }
    return 0;
}

// ---- eval ---------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::string net = "student";
    bool no_clobber = false;
};

int run_eval(const EvalArgs& a, const std::string& cmdline) {
    const alc::Checkpoint ck = alc::load_checkpoint(a.checkpoint);
    const alc::Dataset ds = alc::load_dataset(a.data);
    if (!alc::tools::prepare_out_dir(a.out, a.no_clobber)) return 1;
    alc::tools::write_run_manifest(
        a.out, cmdline, json{{"checkpoint", a.checkpoint}, {"net", a.net}},
        alc::tools::fingerprint_hex(alc::dataset_fingerprint(ds)));

    const alc::ModelState& model = a.net == "teacher" ? ck.teacher : ck.student;
    const alc::EvalOutput eo = alc::evaluate_model(model, ds);
    alc::write_metrics_csv(fs::path(a.out) / "metrics.csv", eo.rows);
    std::cout << "mean dice " << alc::fmt_double(eo.mean.dice) << ", jaccard "
              << alc::fmt_double(eo.mean.jaccard) << ", hd95 " << alc::fmt_opt(eo.mean.hd95)
              << ", asd " << alc::fmt_opt(eo.mean.asd) << " over " << eo.rows.size()
              << " samples\n";
    return 0;
}

// ---- refine-inspect -----------------------------------------------------

struct InspectArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::vector<std::string> ids;
    int limit = 8;
    int m = 8;
    double sigma = 0.05;
    double dropout = 0.1;
    std::string kl_form = "summed";
    std::string net = "teacher";
    std::uint64_t seed = 1;
    bool no_clobber = false;
};

int run_inspect(const InspectArgs& a, const std::string& cmdline) {
    const alc::Checkpoint ck = alc::load_checkpoint(a.checkpoint);
    const alc::Dataset ds = alc::load_dataset(a.data);
    if (!alc::tools::prepare_out_dir(a.out, a.no_clobber)) return 1;
    alc::tools::write_run_manifest(
        a.out, cmdline,
        json{{"checkpoint", a.checkpoint},
             {"m", a.m},
             {"sigma", a.sigma},
             {"dropout", a.dropout},
             {"kl_form", a.kl_form},
             {"net", a.net},
             {"seed", a.seed}},
        alc::tools::fingerprint_hex(alc::dataset_fingerprint(ds)));

    std::vector<std::string> ids = a.ids;
    if (ids.empty())
        for (const auto& s : ds.samples) {
            if (s.quality != alc::Quality::kLq) continue;
            ids.push_back(s.id);
            if (static_cast<int>(ids.size()) >= a.limit) break;
        }

    const alc::KlForm form =
        a.kl_form == "printed" ? alc::KlForm::kPrinted : alc::KlForm::kSummed;
    const alc::ModelState& model = a.net == "student" ? ck.student : ck.teacher;
    alc::ForwardMode pert;
    pert.kind = alc::ForwardKind::kStochastic;
    pert.input_noise_sigma = a.sigma;
    pert.dropout_rate = a.dropout;

    std::ofstream csv(fs::path(a.out) / "inspect.csv", std::ios::trunc);
    csv << "id,noisy_dice,pseudo_dice,refined_dice,uncertainty\n";
    const fs::path outp(a.out);
    std::size_t done = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const alc::Sample* s = ds.find(ids[i]);
        if (!s) {
            std::cerr << "warning: no sample " << ids[i] << ", skipped\n";
            continue;
        }
        if (s->quality == alc::Quality::kHq) {
            std::cerr << "warning: " << ids[i] << " is a hq sample, skipped\n";
            continue;
        }
        const alc::ProbStack stack = alc::perturbed_stack(
            model, s->image, a.m, pert, alc::mix_seed(a.seed, i), s->id);
        const alc::UncertaintyMaps maps = alc::uncertainty_maps(stack, form);
        const alc::LabelGrid pseudo = alc::argmax_label(stack.slice(0));
        const alc::LabelGrid refined = alc::refine_label(stack, form);
        const alc::LabelGrid& clean = ds.clean_labels.at(s->id);
        const double uncertainty = alc::sample_uncertainty(stack);

        const double noisy_d = alc::compare_labels(s->label, clean, ds.n_classes).overall.dice;
        const double pseudo_d = alc::compare_labels(pseudo, clean, ds.n_classes).overall.dice;
        const double refined_d =
            alc::compare_labels(refined, clean, ds.n_classes).overall.dice;
        csv << s->id << ',' << alc::fmt_double(noisy_d) << ',' << alc::fmt_double(pseudo_d)
            << ',' << alc::fmt_double(refined_d) << ',' << alc::fmt_double(uncertainty)
            << '\n';

        alc::Tensor img = alc::Tensor::zeros({ds.h, ds.w});
        img.data = s->image.data;
        alc::tools::write_plane_pgm(outp / (s->id + "_image.pgm"), img);
        for (int c = 0; c < ds.n_classes; ++c) {
            const alc::Tensor plane = channel_plane(maps.mean, c);
            const std::string base = s->id + "_psi_avg_c" + std::to_string(c);
            write_grid_csv(outp / (base + ".csv"), plane);
            alc::tools::write_plane_pgm(outp / (base + ".pgm"), plane);
        }
        for (int j = 0; j < a.m; ++j) {
            alc::Tensor plane = alc::Tensor::zeros({ds.h, ds.w});
            for (int y = 0; y < ds.h; ++y)
                for (int x = 0; x < ds.w; ++x) plane.at(y, x) = maps.kl.at(j, y, x);
            const std::string base = s->id + "_kl_" + std::to_string(j);
            write_grid_csv(outp / (base + ".csv"), plane);
            alc::tools::write_plane_pgm(outp / (base + ".pgm"), plane);
        }
        write_label_csv(outp / (s->id + "_refined.csv"), refined);
        alc::tools::write_label_pgm(outp / (s->id + "_refined.pgm"), refined, ds.n_classes);
        alc::tools::write_label_pgm(outp / (s->id + "_noisy.pgm"), s->label, ds.n_classes);
        alc::tools::write_label_pgm(outp / (s->id + "_pseudo.pgm"), pseudo, ds.n_classes);
        alc::tools::write_label_pgm(outp / (s->id + "_clean.pgm"), clean, ds.n_classes);
        ++done;
    }
    std::cout << "inspected " << done << " samples into " << a.out << "\n";
    return 0;
}

// ---- report -------------------------------------------------------------

struct RunData {
    std::string name;
    json config;
    std::string fingerprint;
    std::vector<std::map<std::string, double>> evals;  // parsed evallog rows
    std::vector<double> steps, totals;                 // from runlog
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

RunData read_run(const fs::path& dir) {
    RunData rd;
    rd.name = dir.filename().string();
    const json man = alc::tools::read_run_manifest(dir);
    rd.config = man.at("config");
    rd.fingerprint = man.at("dataset_fingerprint").get<std::string>();

    std::ifstream ev(dir / "evallog.csv");
    if (!ev) throw std::runtime_error("no evallog.csv in " + dir.string());
    std::string line;
    std::getline(ev, line);
    const std::vector<std::string> header = split_csv_line(line);
    while (std::getline(ev, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        std::map<std::string, double> row;
        for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i)
            row[header[i]] = alc::parse_double(cells[i]);
        rd.evals.push_back(std::move(row));
    }
    if (rd.evals.empty()) throw std::runtime_error("empty evallog in " + dir.string());

    std::ifstream rl(dir / "runlog.csv");
    if (!rl) throw std::runtime_error("no runlog.csv in " + dir.string());
    std::getline(rl, line);
    while (std::getline(rl, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        rd.steps.push_back(alc::parse_double(cells[0]));
        rd.totals.push_back(alc::parse_double(cells[6]));
    }
    return rd;
}

struct ReportArgs {
    std::vector<std::string> runs;
    std::string out;
    bool no_clobber = false;
};

int run_report(const ReportArgs& a, const std::string& cmdline) {
    std::vector<RunData> runs;
    for (const auto& r : a.runs) runs.push_back(read_run(r));
    for (const auto& r : runs)
        if (r.fingerprint != runs[0].fingerprint)
            throw std::runtime_error("run " + r.name + " used a different dataset (" +
                                     r.fingerprint + " vs " + runs[0].fingerprint + ")");
    if (!alc::tools::prepare_out_dir(a.out, a.no_clobber)) return 1;
    alc::tools::write_run_manifest(a.out, cmdline, json{{"runs", a.runs}},
                                   runs[0].fingerprint);
    const fs::path outp(a.out);

    std::ofstream table(outp / "summary.csv", std::ios::trunc);
    table << "# hd95 and asd are in pixel units\n";
    table << "run,mode,k_ratio,alpha,beta,dice,jaccard,hd95,asd\n";
    for (const auto& r : runs) {
        const auto& last = r.evals.back();
        table << r.name << ',' << r.config.value("mode", "?") << ','
              << alc::fmt_double(r.config.value("k_ratio", 0.0)) << ','
              << alc::fmt_double(r.config.value("alpha", 0.0)) << ','
              << alc::fmt_double(r.config.value("beta", 0.0)) << ','
              << alc::fmt_double(last.at("dice")) << ',' << alc::fmt_double(last.at("jaccard"))
              << ',' << alc::fmt_double(last.at("hd95")) << ','
              << alc::fmt_double(last.at("asd")) << '\n';
    }
    table.close();

    std::vector<alc::tools::Series> loss;
    for (const auto& r : runs) loss.push_back({r.name, r.steps, r.totals});
    alc::tools::write_line_chart(outp / "loss_curves.svg", "Training loss", "step",
                                 "total loss", loss);

    std::vector<alc::tools::Series> lq;
    auto eval_series = [](const RunData& r, const char* key) {
        alc::tools::Series s;
        for (const auto& row : r.evals) {
            s.x.push_back(row.at("step"));
            s.y.push_back(row.at(key));
        }
        return s;
    };
    {
        alc::tools::Series noisy = eval_series(runs[0], "noisy_dice");
        noisy.label = "noisy";
        lq.push_back(std::move(noisy));
        alc::tools::Series pseudo = eval_series(runs[0], "pseudo_dice");
        pseudo.label = runs.size() == 1 ? "pseudo" : "pseudo (" + runs[0].name + ")";
        lq.push_back(std::move(pseudo));
        for (const auto& r : runs) {
            alc::tools::Series ref = eval_series(r, "refined_dice");
            ref.label = runs.size() == 1 ? "refined" : "refined (" + r.name + ")";
            lq.push_back(std::move(ref));
        }
        alc::tools::write_line_chart(outp / "label_quality.svg",
                                     "Label quality on lq training samples", "step",
                                     "dice vs clean", lq);
    }

    std::map<double, double> by_k;
    for (const auto& r : runs) by_k[r.config.value("k_ratio", 0.0)] = r.evals.back().at("dice");
    if (by_k.size() >= 2) {
        alc::tools::Series s;
        s.label = "held-out dice";
        for (const auto& [k, d] : by_k) {
            s.x.push_back(k);
            s.y.push_back(d);
        }
        alc::tools::write_line_chart(outp / "dice_vs_k.svg", "Sensitivity to k", "k",
                                     "held-out dice", {s});
    }

    std::set<double> alphas, betas;
    std::map<std::pair<double, double>, double> by_ab;
    for (const auto& r : runs) {
        const double av = r.config.value("alpha", 0.0), bv = r.config.value("beta", 0.0);
        alphas.insert(av);
        betas.insert(bv);
        by_ab[{av, bv}] = r.evals.back().at("dice");
    }
    if (by_ab.size() >= 2) {
        std::vector<std::string> xt, yt;
        for (double v : alphas) xt.push_back(alc::fmt_double(v));
        for (double v : betas) yt.push_back(alc::fmt_double(v));
        std::vector<double> cells(alphas.size() * betas.size(),
                                  std::numeric_limits<double>::quiet_NaN());
        std::size_t iy = 0;
        for (double bv : betas) {
            std::size_t ix = 0;
            for (double av : alphas) {
                const auto it = by_ab.find({av, bv});
                if (it != by_ab.end()) cells[iy * alphas.size() + ix] = it->second;
                ++ix;
            }
            ++iy;
        }
        alc::tools::write_heatmap(outp / "alpha_beta_heatmap.svg",
                                  "Held-out dice over (alpha, beta)", "alpha", "beta", xt, yt,
                                  cells);
    }
    std::cout << "report for " << runs.size() << " runs in " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-ensembling segmentation trainer for noisy-label experiments"};
    app.set_version_flag("--version", alc::kVersion);
    app.require_subcommand(1);
    const std::string cmdline = alc::tools::command_line_string(argc, argv);

    GenArgs g;
    CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic shapes dataset");
    CLI::Option* g_seed = gen->add_option("--seed", g.seed, "Generator seed");
    gen->add_option("--n", g.n, "Sample count")->check(CLI::PositiveNumber);
    gen->add_option("--size", g.size, "Grid side length")->check(CLI::Range(16, 4096));
    gen->add_option("--classes", g.classes, "Class count incl. background")
        ->check(CLI::Range(2, 32));
    gen->add_option("--hq-ratio", g.hq_ratio, "Fraction kept clean")
        ->check(CLI::Range(1e-9, 1.0));
    gen->add_option("--noise-min", g.noise_min, "Min boundary shift (px)")
        ->check(CLI::PositiveNumber);
    gen->add_option("--noise-max", g.noise_max, "Max boundary shift (px)")
        ->check(CLI::PositiveNumber);
    gen->add_option("--out", g.out, "Output dataset directory")->required();
    gen->add_flag("--no-clobber", g.no_clobber, "Refuse to write into a non-empty directory");

    TrainArgs t;
    CLI::App* train = app.add_subcommand("train", "Train on a generated dataset");
    train->add_option("--data", t.data, "Dataset directory")->required();
    train->add_option("--out", t.out, "Run output directory")->required();
    train->add_option("--mode", t.mode, "Training variant")
        ->check(CLI::IsMember({"alc", "alc-no-ls", "alc-no-lr", "mt"}));
    train->add_option("--steps", t.cfg.steps, "Optimization steps")->check(CLI::PositiveNumber);
    train->add_option("--k", t.cfg.k_ratio, "Selected fraction of each lq batch")
        ->check(CLI::Range(0.0, 1.0));
    train->add_option("--alpha", t.cfg.alpha, "Weight of the selected-label loss");
    train->add_option("--beta", t.cfg.beta, "Weight of the residual-label loss");
    train->add_option("--gamma", t.cfg.gamma, "Teacher EMA decay");
    train->add_option("--lr", t.cfg.lr, "Learning rate");
    train->add_option("--momentum", t.cfg.momentum, "SGD momentum");
    train->add_option("--weight-decay", t.cfg.weight_decay, "L2 coefficient");
    train->add_option("--m", t.cfg.m, "Perturbed teacher passes per sample")
        ->check(CLI::Range(2, 64));
    train->add_option("--sigma", t.cfg.sigma, "Input noise sigma");
    train->add_option("--dropout", t.cfg.dropout_rate, "Dropout rate");
    train->add_option("--t-ramp", t.cfg.t_ramp, "Ramp-up steps (0 = 40% of steps)");
    train->add_option("--hq-batch", t.cfg.hq_batch, "Hq samples per step");
    train->add_option("--lq-batch", t.cfg.lq_batch, "Lq samples per step");
    train->add_option("--eval-every", t.cfg.eval_every, "Eval cadence in steps");
    train->add_option("--eval-samples", t.cfg.eval_samples, "Held-out split size");
    CLI::Option* t_seed = train->add_option("--seed", t.cfg.master_seed, "Training seed");
    std::string t_klform = "summed", t_residual = "refined";
    train->add_option("--kl-form", t_klform, "Per-pass divergence form")
        ->check(CLI::IsMember({"summed", "printed"}));
    train->add_option("--residual-target", t_residual, "Label for non-selected lq samples")
        ->check(CLI::IsMember({"refined", "original"}));
    train->add_option("--sweep", t.sweeps,
                      "Sweep a parameter, e.g. k=0.1:0.9:0.2 (repeatable)");
    train->add_flag("--no-clobber", t.no_clobber,
                    "Refuse to write into a non-empty directory");

    EvalArgs e;
    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint against clean labels");
    eval->add_option("--checkpoint", e.checkpoint, "Checkpoint directory")->required();
    eval->add_option("--data", e.data, "Dataset directory")->required();
    eval->add_option("--out", e.out, "Output directory")->required();
    eval->add_option("--net", e.net, "Which network to evaluate")
        ->check(CLI::IsMember({"student", "teacher"}));
    eval->add_flag("--no-clobber", e.no_clobber, "Refuse to write into a non-empty directory");

    InspectArgs ins;
    CLI::App* inspect =
        app.add_subcommand("refine-inspect", "Dump refinement internals for lq samples");
    inspect->add_option("--checkpoint", ins.checkpoint, "Checkpoint directory")->required();
    inspect->add_option("--data", ins.data, "Dataset directory")->required();
    inspect->add_option("--out", ins.out, "Output directory")->required();
    inspect->add_option("--ids", ins.ids, "Sample ids (default: first lq samples)");
    inspect->add_option("--limit", ins.limit, "Max samples when --ids is empty")
        ->check(CLI::PositiveNumber);
    inspect->add_option("--m", ins.m, "Perturbed passes")->check(CLI::Range(2, 64));
    inspect->add_option("--sigma", ins.sigma, "Input noise sigma");
    inspect->add_option("--dropout", ins.dropout, "Dropout rate");
    inspect->add_option("--kl-form", ins.kl_form, "Per-pass divergence form")
        ->check(CLI::IsMember({"summed", "printed"}));
    inspect->add_option("--net", ins.net, "Which network to probe")
        ->check(CLI::IsMember({"student", "teacher"}));
    CLI::Option* i_seed = inspect->add_option("--seed", ins.seed, "Perturbation seed");
    inspect->add_flag("--no-clobber", ins.no_clobber,
                      "Refuse to write into a non-empty directory");

    ReportArgs r;
    CLI::App* report = app.add_subcommand("report", "Summarize one or more runs");
    report->add_option("runs", r.runs, "Run directories")->required();
    report->add_option("--out", r.out, "Output directory")->required();
    report->add_flag("--no-clobber", r.no_clobber,
                     "Refuse to write into a non-empty directory");

    try {
        app.parse(argc, argv);
        g.seed = pick_seed(g_seed, g.seed, g.seed);
        t.cfg.master_seed = pick_seed(t_seed, t.cfg.master_seed, t.cfg.master_seed);
        ins.seed = pick_seed(i_seed, ins.seed, ins.seed);
        t.cfg.kl_form = t_klform == "printed" ? alc::KlForm::kPrinted : alc::KlForm::kSummed;
        t.cfg.residual_targets = t_residual == "original" ? alc::ResidualTargets::kOriginal
                                                          : alc::ResidualTargets::kRefined;
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        std::cout << alc::kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& err) {
        std::cerr << "error: " << err.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 2;
    }

    try {
        if (gen->parsed()) return run_gen(g, cmdline);
        if (train->parsed()) return run_train(t, cmdline);
        if (eval->parsed()) return run_eval(e, cmdline);
        if (inspect->parsed()) return run_inspect(ins, cmdline);
        if (report->parsed()) return run_report(r, cmdline);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
