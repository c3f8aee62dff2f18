#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alc/dataset.hpp"
#include "alc/losses.hpp"
#include "alc/metrics.hpp"
#include "alc/net.hpp"
#include "alc/refine.hpp"
#include "alc/selection.hpp"

namespace alc {

// Targets for the residual (non-selected) LQ samples.
enum class ResidualTargets { kRefined, kOriginal };

struct TrainConfig {
    int hq_batch = 4;
    int lq_batch = 8;
    int steps = 2000;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double gamma = 0.99;  // EMA decay
    int m = 8;            // perturbed teacher passes per LQ sample
    double sigma = 0.05;  // input noise of the perturbations
    double dropout_rate = 0.1;
    double k_ratio = 0.5;
    double alpha = 3.0;
    double beta = 2.0;
    int t_ramp = 0;  // 0 picks 40% of steps
    bool disable_ls = false;   // selection off: every LQ sample is trusted
    bool disable_lr = false;   // refinement off: single-pass argmax labels
    bool mt_baseline = false;  // plain mean teacher: HQ loss + consistency
    ResidualTargets residual_targets = ResidualTargets::kRefined;
    KlForm kl_form = KlForm::kSummed;
    std::uint64_t master_seed = 1;
    int eval_every = 200;
    int eval_samples = 32;
    Arch arch;

    int ramp_steps() const;
    void validate() const;
    // mt_baseline folds into the other knobs: selection and
    // refinement off, alpha = beta = 0 (LQ seg terms zero-weighted).
    TrainConfig normalized() const;
};

struct StepRecord {
    int step = 0;
    double lambda = 0.0;
    double l_hs = 0.0;
    double l_ls = 0.0;
    double l_n = 0.0;
    double l_c = 0.0;
    double l_total = 0.0;
    std::vector<std::string> selected;
};

struct EvalRecord {
    int step = 0;
    double dice = 0.0;
    double jaccard = 0.0;
    std::optional<double> hd95;
    std::optional<double> asd;
    // label quality on LQ training samples, mean Dice vs clean
    double noisy_dice = 0.0;
    double pseudo_dice = 0.0;
    double refined_dice = 0.0;
};

struct SelectionRow {
    int epoch = 0;
    std::string sample_id;
    double score = 0.0;
    bool selected = false;
};

ModelState ema_update(const ModelState& teacher, const ModelState& student, double gamma);

struct OptState {
    ModelState velocity;
};

// v <- momentum v + g + weight_decay p; p <- p - lr v
void sgd_step(ModelState& params, const ModelState& grads, OptState& opt, double lr,
              double momentum, double weight_decay);

struct Checkpoint {
    ModelState student;
    ModelState teacher;
    int step = 0;
    std::string rng_state;
};

// Directory with manifest.json plus float32 parameter blobs
// (student.bin, teacher.bin) in manifest order.
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Held-out split: same generator distribution, fresh derived seed,
// never corrupted.
Dataset make_eval_split(const Dataset& train_ds, int n_samples);

struct EvalOutput {
    std::vector<SampleMetricsRow> rows;
    ClassMetrics mean;  // over samples; distances over computable ones
};

// Deterministic forward + argmax against the clean labels.
EvalOutput evaluate_model(const ModelState& model, const Dataset& ds);

class Trainer {
  public:
    Trainer(const Dataset& ds, const TrainConfig& cfg);

    StepRecord step();
    int current_step() const { return step_; }
    const ModelState& student() const { return student_; }
    const ModelState& teacher() const { return teacher_; }
    const TrainConfig& config() const { return cfg_; }
    std::string rng_state() const;

    // Selection rows accumulated since the last drain.
    std::vector<SelectionRow> drain_selection_rows();

    struct LabelQuality {
        double noisy = 0.0;
        double pseudo = 0.0;
        double refined = 0.0;
    };
    // Mean Dice of the noisy labels, single-pass pseudo labels and
    // refined labels against the clean labels, over up to `limit` LQ
    // training samples (teacher-based, read-only).
    LabelQuality label_quality(int limit) const;

  private:
    struct PoolStream {
        std::vector<int> ids;
        std::vector<int> order;
        std::size_t pos = 0;
        int epoch = -1;
        Rng rng;

        PoolStream() : rng(0) {}
        void reset(std::vector<int> pool, std::uint64_t seed);
        int next();
    };

    std::vector<int> draw_batch(PoolStream& pool, int want) const;

    const Dataset& ds_;
    TrainConfig cfg_;
    ModelState student_;
    ModelState teacher_;
    OptState opt_;
    PoolStream hq_pool_;
    PoolStream lq_pool_;
    int step_ = 0;
    std::vector<SelectionRow> pending_rows_;
};

struct RunResult {
    Checkpoint final_checkpoint;
    std::vector<StepRecord> steps;
    std::vector<EvalRecord> evals;
};

// Full loop with logging: config.json, runlog.csv, evallog.csv,
// selection.csv, per-eval metrics CSVs and checkpoints under out_dir.
RunResult run_training(const Dataset& ds, const TrainConfig& cfg,
                       const std::filesystem::path& out_dir);

std::string config_json_string(const TrainConfig& cfg);
void write_config_json(const TrainConfig& cfg, const std::filesystem::path& path);
TrainConfig read_config_json(const std::filesystem::path& path);

}  // namespace alc
