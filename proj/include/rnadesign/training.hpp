#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rnadesign/model.hpp"
#include "rnadesign/sampling.hpp"
#include "rnadesign/splits.hpp"

namespace rnadesign {

struct TrainConfig {
    double lr = 1e-4;
    int max_epochs = 50;
    double plateau_factor = 0.9;
    int plateau_patience = 5;
    double label_smoothing = 0.05;
    double noise_sigma = 0.1;
    int max_states = 1;
    std::size_t max_train_len = 5000;
    std::uint64_t seed = 0;
    int val_samples = 4;         // designs per validation ensemble
    double val_temperature = 0.1;
    int val_every = 1;           // epochs between validations (0: never)
    ModelConfig model;           // decoder kind, dims, dropout

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m, v;  // first/second moments per parameter
};

AdamState adam_init(const std::vector<std::pair<std::string, Tensor*>>& params);

// Standard bias-corrected update; throws on non-finite gradients, naming the
// offending parameter.
void adam_step(std::vector<std::pair<std::string, Tensor*>>& params, AdamState& state,
               double lr);

// Reduce-on-plateau for a maximized metric: after `patience` consecutive
// epochs without improvement the rate shrinks by `factor` and the counter
// resets.
struct PlateauScheduler {
    double lr;
    double factor;
    int patience;
    double best = -std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    PlateauScheduler(double lr0, double factor_, int patience_)
        : lr(lr0), factor(factor_), patience(patience_) {}

    // Returns true when this step improved the best metric.
    bool step(double metric) {
        if (metric > best) {
            best = metric;
            bad_epochs = 0;
            return true;
        }
        if (++bad_epochs >= patience) {
            lr *= factor;
            bad_epochs = 0;
        }
        return false;
    }
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_recovery = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_val_recovery = -1.0;
    Model best_model;   // checkpoint of the best validation epoch
    Model final_model;

    std::string history_json() const;
};

// Deep copy: same config/seed, parameter values copied.
Model clone_model(const Model& m);

// Mean teacher-forced loss of one ensemble batch (used by the epoch loop and
// the loss-band tests).
double train_loss_on(Model& model, const MultiGraph& mg, double label_smoothing,
                     RngStream* dropout_rng, bool do_backward);

// The optimization loop: per epoch, shuffled single-ensemble batches with
// fresh featurization noise; validation recovery at low temperature drives
// the plateau scheduler and best-checkpoint selection. Interrupting after an
// epoch and resuming from saved state continues bit-identically, provided
// the same split and corpus are supplied.
class Trainer {
public:
    Trainer(const TrainConfig& cfg, const SplitManifest& split,
            const std::vector<Ensemble>& corpus);

    void run_epoch(std::ostream* log = nullptr);
    bool done() const { return epoch_ >= cfg_.max_epochs; }
    int epoch() const { return epoch_; }

    const TrainConfig& config() const { return cfg_; }
    // Extends (or shortens) a resumed run.
    void set_max_epochs(int n) { cfg_.max_epochs = n; }
    const Model& model() const { return model_; }
    const Model& best_model() const { return best_model_; }
    const std::vector<EpochStats>& history() const { return history_; }

    TrainResult result() const;

    // Resumable state: config, epoch counter, parameters, Adam moments,
    // scheduler, and every rng stream. Split and corpus are inputs, not
    // state.
    void save_state(const std::string& path) const;
    static Trainer load_state(const std::string& path, const SplitManifest& split,
                              const std::vector<Ensemble>& corpus);

private:
    Trainer(const TrainConfig& cfg, const SplitManifest& split,
            const std::vector<Ensemble>& corpus, bool fresh);
    void bind_corpus(const SplitManifest& split, const std::vector<Ensemble>& corpus);

    TrainConfig cfg_;
    std::vector<const Ensemble*> train_set_, val_set_;
    Model model_, best_model_;
    AdamState adam_;
    PlateauScheduler sched_{0, 0, 1};
    RngStream shuffle_rng_{0}, select_rng_{0}, noise_rng_{0}, dropout_rng_{0};
    std::uint64_t root_seed_ = 0;
    int epoch_ = 0;
    int best_epoch_ = -1;
    double best_val_recovery_ = -1.0;
    std::vector<EpochStats> history_;
};

TrainResult train(const TrainConfig& cfg, const SplitManifest& split,
                  const std::vector<Ensemble>& corpus, std::ostream* log = nullptr);

}  // namespace rnadesign
