#include "alc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "alc/format.hpp"
#include "alc/synthgen.hpp"

namespace alc {
namespace {

using nlohmann::json;

// Sub-stream tags deriving every rng in the run from master_seed.
constexpr std::uint64_t kStreamInit = 11;
constexpr std::uint64_t kStreamHqPool = 12;
constexpr std::uint64_t kStreamLqPool = 13;
constexpr std::uint64_t kStreamTeacher = 14;
constexpr std::uint64_t kStreamStudent = 15;
constexpr std::uint64_t kStreamQuality = 16;
constexpr std::uint64_t kStreamEval = 17;

// LQ training samples inspected per label-quality probe.
constexpr int kQualityProbeLimit = 32;

json arch_to_json(const Arch& a) {
    return json{{"in_channels", a.in_channels},
                {"widths", a.widths},
                {"n_classes", a.n_classes},
                {"dropout_rate", a.dropout_rate}};
}

Arch arch_from_json(const json& j) {
    Arch a;
    a.in_channels = j.at("in_channels").get<int>();
    a.widths = j.at("widths").get<std::vector<int>>();
    a.n_classes = j.at("n_classes").get<int>();
    a.dropout_rate = j.at("dropout_rate").get<double>();
    return a;
}

std::string step_dir_name(int step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "step_%06d", step);
    return buf;
}

std::string mode_name(const TrainConfig& c) {
    if (c.mt_baseline) return "mt";
    if (c.disable_ls && c.disable_lr) return "custom";
    if (c.disable_ls) return "alc-no-ls";
    if (c.disable_lr) return "alc-no-lr";
    return "alc";
}

std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ';';
        out += ids[i];
    }
    return out;
}

}  // namespace

int TrainConfig::ramp_steps() const {
    if (t_ramp > 0) return t_ramp;
    return std::max(1, steps * 2 / 5);
}

void TrainConfig::validate() const {
    if (hq_batch < 1 || lq_batch < 1) throw std::invalid_argument("config: batch sizes < 1");
    if (steps < 1) throw std::invalid_argument("config: steps < 1");
    if (lr <= 0.0) throw std::invalid_argument("config: lr <= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("config: momentum");
    if (weight_decay < 0.0) throw std::invalid_argument("config: weight_decay < 0");
    if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("config: gamma outside [0,1)");
    if (m < 2) throw std::invalid_argument("config: m < 2");
    if (sigma < 0.0) throw std::invalid_argument("config: sigma < 0");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("config: dropout_rate outside [0,1)");
    if (k_ratio < 0.0 || k_ratio > 1.0) throw std::invalid_argument("config: k_ratio");
    if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("config: negative loss weight");
    if (eval_every < 1 || eval_samples < 1) throw std::invalid_argument("config: eval params");
    arch.validate();
}

TrainConfig TrainConfig::normalized() const {
    TrainConfig c = *this;
    if (c.mt_baseline) {
        c.disable_ls = true;
        c.disable_lr = true;
        c.alpha = 0.0;
        c.beta = 0.0;
    }
    return c;
}

ModelState ema_update(const ModelState& teacher, const ModelState& student, double gamma) {
    if (!(teacher.arch == student.arch) || teacher.params.size() != student.params.size())
        throw std::invalid_argument("ema_update: arch mismatch");
    if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("ema_update: bad gamma");
    ModelState out = teacher;
    for (std::size_t p = 0; p < out.params.size(); ++p) {
        auto& t = out.params[p].value.data;
        const auto& s = student.params[p].value.data;
        if (t.size() != s.size()) throw std::invalid_argument("ema_update: shape mismatch");
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = gamma * t[i] + (1.0 - gamma) * s[i];
    }
    return out;
}

void sgd_step(ModelState& params, const ModelState& grads, OptState& opt, double lr,
              double momentum, double weight_decay) {
    if (params.params.size() != grads.params.size())
        throw std::invalid_argument("sgd_step: param/grad mismatch");
    if (opt.velocity.params.empty()) opt.velocity = zeros_like(params);
    for (std::size_t p = 0; p < params.params.size(); ++p) {
        auto& th = params.params[p].value.data;
        const auto& g = grads.params[p].value.data;
        auto& v = opt.velocity.params[p].value.data;
        if (th.size() != g.size()) throw std::invalid_argument("sgd_step: shape mismatch");
        for (std::size_t i = 0; i < th.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw std::runtime_error("sgd_step: non-finite gradient, step aborted");
            v[i] = momentum * v[i] + g[i] + weight_decay * th[i];
            th[i] -= lr * v[i];
        }
    }
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json man;
    man["arch"] = arch_to_json(ck.student.arch);
    man["step"] = ck.step;
    man["rng_state"] = ck.rng_state;
    man["params"] = json::array();
    for (const auto& p : ck.student.params)
        man["params"].push_back({{"name", p.name}, {"shape", p.value.shape}});
    man["blobs"] = {{"student", "student.bin"}, {"teacher", "teacher.bin"}};
    std::ofstream f(dir / "manifest.json", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint manifest in " + dir.string());
    f << man.dump(2) << '\n';
    save_model_blob(ck.student, dir / "student.bin");
    save_model_blob(ck.teacher, dir / "teacher.bin");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream f(dir / "manifest.json");
    if (!f) throw std::runtime_error("no checkpoint manifest in " + dir.string());
    json man = json::parse(f);

    Checkpoint ck;
    const Arch arch = arch_from_json(man.at("arch"));
    Rng dummy(0);
    ck.student = init_params(arch, dummy);
    ck.step = man.at("step").get<int>();
    ck.rng_state = man.at("rng_state").get<std::string>();

    const auto& listed = man.at("params");
    if (listed.size() != ck.student.params.size())
        throw std::runtime_error("checkpoint manifest: wrong parameter count");
    for (std::size_t i = 0; i < ck.student.params.size(); ++i) {
        const auto& p = ck.student.params[i];
        if (listed[i].at("name").get<std::string>() != p.name ||
            listed[i].at("shape").get<std::vector<int>>() != p.value.shape)
            throw std::runtime_error("checkpoint manifest: parameter list mismatch at " + p.name);
    }
    ck.teacher = ck.student;
    load_model_blob(ck.student, dir / man.at("blobs").at("student").get<std::string>());
    load_model_blob(ck.teacher, dir / man.at("blobs").at("teacher").get<std::string>());
    return ck;
}

Dataset make_eval_split(const Dataset& train_ds, int n_samples) {
    return make_shapes_dataset(mix_seed(train_ds.seed, kStreamEval), n_samples, train_ds.h,
                               train_ds.w, train_ds.n_classes);
}

EvalOutput evaluate_model(const ModelState& model, const Dataset& ds) {
    EvalOutput out;
    ForwardMode det;
    double dsum = 0.0, jsum = 0.0, hsum = 0.0, asum = 0.0;
    std::size_t nh = 0, na = 0;
    for (const auto& s : ds.samples) {
        const Tensor prob = forward(model, s.image, det);
        const LabelGrid pred = argmax_label(prob);
        MetricsReport rep = compare_labels(pred, ds.clean_labels.at(s.id), ds.n_classes);
        dsum += rep.overall.dice;
        jsum += rep.overall.jaccard;
        if (rep.overall.hd95) { hsum += *rep.overall.hd95; ++nh; }
        if (rep.overall.asd) { asum += *rep.overall.asd; ++na; }
        out.rows.push_back({s.id, std::move(rep)});
    }
    const double n = ds.samples.empty() ? 1.0 : static_cast<double>(ds.samples.size());
    out.mean.dice = dsum / n;
    out.mean.jaccard = jsum / n;
    if (nh > 0) out.mean.hd95 = hsum / static_cast<double>(nh);
    if (na > 0) out.mean.asd = asum / static_cast<double>(na);
    return out;
}

void Trainer::PoolStream::reset(std::vector<int> pool, std::uint64_t seed) {
    ids = std::move(pool);
    order.clear();
    pos = 0;
    epoch = -1;
    rng = Rng(seed);
}

int Trainer::PoolStream::next() {
    if (ids.empty()) throw std::logic_error("PoolStream: empty pool");
    if (pos >= order.size()) {
        order = ids;
        rng.shuffle(order);
        pos = 0;
        ++epoch;
    }
    return order[pos++];
}

std::vector<int> Trainer::draw_batch(PoolStream& pool, int want) const {
    const int take = std::min(want, static_cast<int>(pool.ids.size()));
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(take));
    while (static_cast<int>(out.size()) < take) {
        const int v = pool.next();
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
}

Trainer::Trainer(const Dataset& ds, const TrainConfig& cfg)
    : ds_(ds), cfg_(cfg.normalized()) {
    cfg_.validate();
    if (ds_.n_classes != cfg_.arch.n_classes)
        throw std::invalid_argument("trainer: dataset classes != arch classes");

    std::vector<int> hq, lq;
    for (std::size_t i = 0; i < ds_.samples.size(); ++i) {
        if (ds_.samples[i].quality == Quality::kHq)
            hq.push_back(static_cast<int>(i));
        else
            lq.push_back(static_cast<int>(i));
    }
    if (hq.empty()) throw std::invalid_argument("trainer: no HQ samples");
    if (lq.empty() && !cfg_.mt_baseline)
        throw std::invalid_argument("trainer: no LQ samples");

    Rng init_rng(mix_seed(cfg_.master_seed, kStreamInit));
    student_ = init_params(cfg_.arch, init_rng);
    teacher_ = student_;  // teacher starts as a copy
    hq_pool_.reset(std::move(hq), mix_seed(cfg_.master_seed, kStreamHqPool));
    lq_pool_.reset(std::move(lq), mix_seed(cfg_.master_seed, kStreamLqPool));
}

std::string Trainer::rng_state() const {
    json j;
    j["hq_engine"] = hq_pool_.rng.state_string();
    j["hq_pos"] = hq_pool_.pos;
    j["hq_epoch"] = hq_pool_.epoch;
    j["hq_order"] = hq_pool_.order;
    j["lq_engine"] = lq_pool_.rng.state_string();
    j["lq_pos"] = lq_pool_.pos;
    j["lq_epoch"] = lq_pool_.epoch;
    j["lq_order"] = lq_pool_.order;
    return j.dump();
}

std::vector<SelectionRow> Trainer::drain_selection_rows() {
    std::vector<SelectionRow> out;
    out.swap(pending_rows_);
    return out;
}

StepRecord Trainer::step() {
    const int t = step_;
    const double lambda = lambda_ramp(t, cfg_.ramp_steps());

    const std::vector<int> hq = draw_batch(hq_pool_, cfg_.hq_batch);
    std::vector<int> lq;
    if (!lq_pool_.ids.empty()) lq = draw_batch(lq_pool_, cfg_.lq_batch);
    const int lq_epoch = std::max(lq_pool_.epoch, 0);

    ForwardMode pert;
    pert.kind = ForwardKind::kStochastic;
    pert.input_noise_sigma = cfg_.sigma;
    pert.dropout_rate = cfg_.dropout_rate;

    std::vector<ProbStack> stacks;
    std::vector<LabelGrid> refined;
    std::map<std::string, double> scores;
    std::map<std::string, std::size_t> slot;
    stacks.reserve(lq.size());
    refined.reserve(lq.size());
    for (std::size_t i = 0; i < lq.size(); ++i) {
        const Sample& s = ds_.samples[static_cast<std::size_t>(lq[i])];
        stacks.push_back(perturbed_stack(
            teacher_, s.image, cfg_.m, pert,
            mix_seed(cfg_.master_seed, kStreamTeacher, static_cast<std::uint64_t>(t), i),
            s.id));
        refined.push_back(cfg_.disable_lr ? argmax_label(stacks.back().slice(0))
                                          : refine_label(stacks.back(), cfg_.kl_form));
        scores[s.id] = sample_uncertainty(stacks.back());
        slot[s.id] = i;
    }

    SelectionResult sel;
    if (!lq.empty()) sel = select_top_k(scores, cfg_.disable_ls ? 1.0 : cfg_.k_ratio);

    std::vector<LossItem> items;
    items.reserve(hq.size() + lq.size());
    auto item_seed = [&](std::size_t ordinal) {
        return mix_seed(cfg_.master_seed, kStreamStudent, static_cast<std::uint64_t>(t),
                        ordinal);
    };
    for (int idx : hq) {
        const Sample& s = ds_.samples[static_cast<std::size_t>(idx)];
        items.push_back({s.image, s.label, LossTerm::kHs, nullptr, item_seed(items.size())});
    }
    for (const auto& id : sel.selected) {
        const std::size_t i = slot.at(id);
        const Sample& s = ds_.samples[static_cast<std::size_t>(lq[i])];
        items.push_back(
            {s.image, refined[i], LossTerm::kLs, &stacks[i].probs, item_seed(items.size())});
    }
    for (const auto& id : sel.residual) {
        const std::size_t i = slot.at(id);
        const Sample& s = ds_.samples[static_cast<std::size_t>(lq[i])];
        const LabelGrid& target =
            cfg_.residual_targets == ResidualTargets::kRefined ? refined[i] : s.label;
        items.push_back(
            {s.image, target, LossTerm::kN, &stacks[i].probs, item_seed(items.size())});
    }

    LossSpec spec;
    spec.alpha = cfg_.alpha;
    spec.beta = cfg_.beta;
    spec.lambda_now = lambda;

    ForwardMode smode;
    smode.kind = ForwardKind::kStochastic;
    smode.input_noise_sigma = cfg_.sigma;
    smode.dropout_rate = cfg_.dropout_rate;

    ModelState grads;
    LossBreakdown bd;
    try {
        bd = loss_and_grad(student_, items, spec, smode, &grads);
    } catch (const std::exception& e) {
        std::string ids;
        for (int idx : hq) ids += ds_.samples[static_cast<std::size_t>(idx)].id + " ";
        for (int idx : lq) ids += ds_.samples[static_cast<std::size_t>(idx)].id + " ";
        throw std::runtime_error(std::string("train step ") + std::to_string(t) +
                                 " failed (batch: " + ids + "): " + e.what());
    }

    sgd_step(student_, grads, opt_, cfg_.lr, cfg_.momentum, cfg_.weight_decay);
    teacher_ = ema_update(teacher_, student_, cfg_.gamma);

    for (const auto& id : sel.selected)
        pending_rows_.push_back({lq_epoch, id, scores.at(id), true});
    for (const auto& id : sel.residual)
        pending_rows_.push_back({lq_epoch, id, scores.at(id), false});

    ++step_;
    StepRecord rec;
    rec.step = t;
    rec.lambda = lambda;
    rec.l_hs = bd.hs;
    rec.l_ls = bd.ls;
    rec.l_n = bd.n;
    rec.l_c = bd.c;
    rec.l_total = bd.total;
    rec.selected = sel.selected;
    return rec;
}

Trainer::LabelQuality Trainer::label_quality(int limit) const {
    ForwardMode pert;
    pert.kind = ForwardKind::kStochastic;
    pert.input_noise_sigma = cfg_.sigma;
    pert.dropout_rate = cfg_.dropout_rate;

    LabelQuality q;
    int n = 0;
    for (std::size_t i = 0; i < ds_.samples.size() && n < limit; ++i) {
        const Sample& s = ds_.samples[i];
        if (s.quality != Quality::kLq) continue;
        const LabelGrid& clean = ds_.clean_labels.at(s.id);
        const ProbStack stack = perturbed_stack(
            teacher_, s.image, cfg_.m, pert,
            mix_seed(cfg_.master_seed, kStreamQuality, static_cast<std::uint64_t>(step_), i),
            s.id);
        const LabelGrid pseudo = argmax_label(stack.slice(0));
        const LabelGrid ref =
            cfg_.disable_lr ? pseudo : refine_label(stack, cfg_.kl_form);
        q.noisy += compare_labels(s.label, clean, ds_.n_classes).overall.dice;
        q.pseudo += compare_labels(pseudo, clean, ds_.n_classes).overall.dice;
        q.refined += compare_labels(ref, clean, ds_.n_classes).overall.dice;
        ++n;
    }
    if (n > 0) {
        q.noisy /= n;
        q.pseudo /= n;
        q.refined /= n;
    }
    return q;
}

std::string config_json_string(const TrainConfig& cfg) {
    json j;
    j["mode"] = mode_name(cfg);
    j["hq_batch"] = cfg.hq_batch;
    j["lq_batch"] = cfg.lq_batch;
    j["steps"] = cfg.steps;
    j["lr"] = cfg.lr;
    j["momentum"] = cfg.momentum;
    j["weight_decay"] = cfg.weight_decay;
    j["gamma"] = cfg.gamma;
    j["m"] = cfg.m;
    j["sigma"] = cfg.sigma;
    j["dropout_rate"] = cfg.dropout_rate;
    j["k_ratio"] = cfg.k_ratio;
    j["alpha"] = cfg.alpha;
    j["beta"] = cfg.beta;
    j["t_ramp"] = cfg.ramp_steps();
    j["disable_ls"] = cfg.disable_ls;
    j["disable_lr"] = cfg.disable_lr;
    j["mt_baseline"] = cfg.mt_baseline;
    j["residual_targets"] =
        cfg.residual_targets == ResidualTargets::kRefined ? "refined" : "original";
    j["kl_form"] = cfg.kl_form == KlForm::kSummed ? "summed" : "printed";
    j["master_seed"] = cfg.master_seed;
    j["eval_every"] = cfg.eval_every;
    j["eval_samples"] = cfg.eval_samples;
    j["arch"] = arch_to_json(cfg.arch);
    return j.dump(2);
}

void write_config_json(const TrainConfig& cfg, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << config_json_string(cfg) << '\n';
}

TrainConfig read_config_json(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    json j = json::parse(f);
    TrainConfig c;
    c.hq_batch = j.at("hq_batch").get<int>();
    c.lq_batch = j.at("lq_batch").get<int>();
    c.steps = j.at("steps").get<int>();
    c.lr = j.at("lr").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.m = j.at("m").get<int>();
    c.sigma = j.at("sigma").get<double>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.k_ratio = j.at("k_ratio").get<double>();
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
    c.t_ramp = j.at("t_ramp").get<int>();
    c.disable_ls = j.at("disable_ls").get<bool>();
    c.disable_lr = j.at("disable_lr").get<bool>();
    c.mt_baseline = j.at("mt_baseline").get<bool>();
    c.residual_targets = j.at("residual_targets").get<std::string>() == "original"
                             ? ResidualTargets::kOriginal
                             : ResidualTargets::kRefined;
    c.kl_form =
        j.at("kl_form").get<std::string>() == "printed" ? KlForm::kPrinted : KlForm::kSummed;
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.eval_every = j.at("eval_every").get<int>();
    c.eval_samples = j.at("eval_samples").get<int>();
    c.arch = arch_from_json(j.at("arch"));
    return c;
}

RunResult run_training(const Dataset& ds, const TrainConfig& raw_cfg,
                       const std::filesystem::path& out_dir) {
    const TrainConfig cfg = raw_cfg.normalized();
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    std::filesystem::create_directories(out_dir / "checkpoints");
    std::filesystem::create_directories(out_dir / "evals");
    write_config_json(cfg, out_dir / "config.json");

    const Dataset eval_ds = make_eval_split(ds, cfg.eval_samples);
    Trainer trainer(ds, cfg);

    std::ofstream runlog(out_dir / "runlog.csv", std::ios::trunc);
    runlog << "step,lambda,l_hs,l_ls,l_n,l_c,l_total,selected\n";
    std::ofstream sellog(out_dir / "selection.csv", std::ios::trunc);
    sellog << "epoch,sample_id,score,selected\n";
    std::ofstream evallog(out_dir / "evallog.csv", std::ios::trunc);
    evallog << "step,dice,jaccard,hd95,asd,noisy_dice,pseudo_dice,refined_dice\n";

    RunResult result;
    for (int t = 0; t < cfg.steps; ++t) {
        StepRecord rec = trainer.step();
        runlog << rec.step << ',' << fmt_double(rec.lambda) << ',' << fmt_double(rec.l_hs)
               << ',' << fmt_double(rec.l_ls) << ',' << fmt_double(rec.l_n) << ','
               << fmt_double(rec.l_c) << ',' << fmt_double(rec.l_total) << ','
               << join_ids(rec.selected) << '\n';
        for (const auto& row : trainer.drain_selection_rows())
            sellog << row.epoch << ',' << row.sample_id << ',' << fmt_double(row.score) << ','
                   << (row.selected ? 1 : 0) << '\n';

        const int done = t + 1;
        if (done % cfg.eval_every == 0 || done == cfg.steps) {
            const EvalOutput eo = evaluate_model(trainer.student(), eval_ds);
            const auto lq = trainer.label_quality(kQualityProbeLimit);
            EvalRecord er;
            er.step = done;
            er.dice = eo.mean.dice;
            er.jaccard = eo.mean.jaccard;
            er.hd95 = eo.mean.hd95;
            er.asd = eo.mean.asd;
            er.noisy_dice = lq.noisy;
            er.pseudo_dice = lq.pseudo;
            er.refined_dice = lq.refined;
            evallog << er.step << ',' << fmt_double(er.dice) << ',' << fmt_double(er.jaccard)
                    << ',' << fmt_opt(er.hd95) << ',' << fmt_opt(er.asd) << ','
                    << fmt_double(er.noisy_dice) << ',' << fmt_double(er.pseudo_dice) << ','
                    << fmt_double(er.refined_dice) << '\n';
            write_metrics_csv(out_dir / "evals" / (step_dir_name(done) + ".csv"), eo.rows);
            Checkpoint ck{trainer.student(), trainer.teacher(), done, trainer.rng_state()};
            save_checkpoint(ck, out_dir / "checkpoints" / step_dir_name(done));
            result.evals.push_back(er);
        }
        result.steps.push_back(std::move(rec));
    }

    result.final_checkpoint =
        Checkpoint{trainer.student(), trainer.teacher(), cfg.steps, trainer.rng_state()};
    save_checkpoint(result.final_checkpoint, out_dir / "checkpoints" / "final");
    return result;
}

}  // namespace alc
