#include "rnadesign/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace rnadesign {

using Json = nlohmann::json;

void TrainConfig::validate() const {
    if (lr <= 0 || max_epochs <= 0 || plateau_factor <= 0 || plateau_factor > 1 ||
        plateau_patience <= 0 || noise_sigma < 0 || max_states < 1 || val_samples < 1 ||
        val_temperature <= 0)
        throw std::invalid_argument("train config: fields must be positive");
    if (label_smoothing < 0 || label_smoothing >= 1)
        throw std::invalid_argument("train config: label smoothing in [0, 1)");
}

std::string TrainConfig::to_json() const {
    Json j;
    j["lr"] = lr;
    j["max_epochs"] = max_epochs;
    j["plateau_factor"] = plateau_factor;
    j["plateau_patience"] = plateau_patience;
    j["label_smoothing"] = label_smoothing;
    j["noise_sigma"] = noise_sigma;
    j["max_states"] = max_states;
    j["max_train_len"] = max_train_len;
    j["seed"] = seed;
    j["val_samples"] = val_samples;
    j["val_temperature"] = val_temperature;
    j["val_every"] = val_every;
    j["model"] = Json::parse(model.to_json());
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    Json j = Json::parse(text);
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
    c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
    c.label_smoothing = j.value("label_smoothing", c.label_smoothing);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.max_states = j.value("max_states", c.max_states);
    c.max_train_len = j.value("max_train_len", c.max_train_len);
    c.seed = j.value("seed", c.seed);
    c.val_samples = j.value("val_samples", c.val_samples);
    c.val_temperature = j.value("val_temperature", c.val_temperature);
    c.val_every = j.value("val_every", c.val_every);
    if (j.contains("model")) c.model = ModelConfig::from_json(j["model"].dump());
    c.validate();
    return c;
}

AdamState adam_init(const std::vector<std::pair<std::string, Tensor*>>& params) {
    AdamState st;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const auto& [name, t] : params) {
        st.m.emplace_back(t->data().size(), 0.0);
        st.v.emplace_back(t->data().size(), 0.0);
    }
    return st;
}

void adam_step(std::vector<std::pair<std::string, Tensor*>>& params, AdamState& st, double lr) {
    if (st.m.size() != params.size())
        throw std::invalid_argument("adam_step: state does not match parameter list");
    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& [name, t] = params[p];
        auto& data = t->data();
        const auto& grad = t->grad();
        auto& m = st.m[p];
        auto& v = st.v[p];
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = grad[i];
            if (!std::isfinite(g))
                throw std::runtime_error("adam_step: non-finite gradient in " + name +
                                         " at index " + std::to_string(i));
            m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g;
            v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            data[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
        }
    }
}

Model clone_model(const Model& m) {
    Model out(m.config(), m.init_seed());
    auto dst = out.params();
    auto src = m.params();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i].second->data() = src[i].second->data();
    return out;
}

double train_loss_on(Model& model, const MultiGraph& mg, double label_smoothing,
                     RngStream* dropout_rng, bool do_backward) {
    std::vector<int> bases;
    bases.reserve(mg.sequence.size());
    for (char c : mg.sequence) bases.push_back(base_index(c));
    Tape tape;
    TapeScope scope(tape);
    const bool training = do_backward;
    Tensor logits = model.logits(mg, bases, training, dropout_rng);
    Tensor loss = softmax_cross_entropy(logits, bases, label_smoothing);
    const double value = loss.value();
    if (do_backward) tape.backward(loss);
    return value;
}

namespace {

double validation_recovery(const Model& model, const std::vector<const Ensemble*>& val,
                           const TrainConfig& cfg, const FeaturizerConfig& fcfg,
                           RngStream& rng) {
    if (val.empty()) return 0.0;
    SampleOptions opt;
    opt.temperature = cfg.val_temperature;
    double total = 0.0;
    for (const Ensemble* e : val) {
        const Ensemble sel = select_states(*e, cfg.max_states, false, nullptr);
        const MultiGraph mg = featurize_ensemble(sel, fcfg, nullptr);
        std::string native;
        for (int oi : mg.orig_index) native.push_back(sel.sequence[static_cast<std::size_t>(oi)]);
        double rec = 0.0;
        RngStream erng = rng.child(e->id);
        for (int s = 0; s < cfg.val_samples; ++s) {
            RngStream srng = erng.child(static_cast<std::uint64_t>(s));
            rec += recovery(sample(model, mg, opt, srng).sequence, native);
        }
        total += rec / cfg.val_samples;
    }
    return total / static_cast<double>(val.size());
}

void write_f64_block(std::ofstream& out, const std::vector<double>& v) {
    for (double x : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

void read_f64_block(std::ifstream& in, std::vector<double>& v) {
    for (double& x : v) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (!in) throw std::invalid_argument("truncated trainer state");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        std::memcpy(&x, &bits, 8);
    }
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg, const SplitManifest& split,
                 const std::vector<Ensemble>& corpus)
    : Trainer(cfg, split, corpus, true) {}

Trainer::Trainer(const TrainConfig& cfg, const SplitManifest& split,
                 const std::vector<Ensemble>& corpus, bool fresh)
    : cfg_(cfg),
      sched_(cfg.lr, cfg.plateau_factor, cfg.plateau_patience),
      shuffle_rng_(0),
      select_rng_(0),
      noise_rng_(0),
      dropout_rng_(0) {
    cfg_.validate();
    bind_corpus(split, corpus);
    if (!fresh) return;
    RngStream root(cfg_.seed);
    root_seed_ = cfg_.seed;
    shuffle_rng_ = root.child("shuffle");
    select_rng_ = root.child("select");
    noise_rng_ = root.child("noise");
    dropout_rng_ = root.child("dropout");
    model_ = Model(cfg_.model, root.child("init").seed());
    best_model_ = clone_model(model_);
    adam_ = adam_init(model_.params());
}

void Trainer::bind_corpus(const SplitManifest& split, const std::vector<Ensemble>& corpus) {
    std::map<std::string, const Ensemble*> by_id;
    for (const auto& e : corpus) by_id[e.id] = &e;
    train_set_.clear();
    val_set_.clear();
    for (const auto& id : split.train) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw std::invalid_argument("train: unknown ensemble " + id);
        if (it->second->length() <= cfg_.max_train_len) train_set_.push_back(it->second);
    }
    for (const auto& id : split.val) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw std::invalid_argument("train: unknown ensemble " + id);
        val_set_.push_back(it->second);
    }
    if (train_set_.empty()) throw std::invalid_argument("train: empty training split");
}

void Trainer::run_epoch(std::ostream* log) {
    if (done()) throw std::logic_error("run_epoch: training already finished");
    FeaturizerConfig fcfg;
    fcfg.noise_sigma = cfg_.noise_sigma;
    auto params = model_.params();

    std::vector<const Ensemble*> order = train_set_;
    shuffle_rng_.shuffle(order);
    double loss_sum = 0.0;
    for (const Ensemble* e : order) {
        const Ensemble sel = select_states(*e, cfg_.max_states, true, &select_rng_);
        const MultiGraph mg = featurize_ensemble(sel, fcfg, &noise_rng_);
        model_.zero_grad();
        loss_sum += train_loss_on(model_, mg, cfg_.label_smoothing, &dropout_rng_, true);
        adam_step(params, adam_, sched_.lr);
    }

    const bool validate =
        cfg_.val_every > 0 && !val_set_.empty() &&
        ((epoch_ + 1) % cfg_.val_every == 0 || epoch_ + 1 == cfg_.max_epochs);
    double val_rec = -1.0;
    if (validate) {
        RngStream val_rng = RngStream(root_seed_).child("val").child(
            static_cast<std::uint64_t>(epoch_));
        val_rec = validation_recovery(model_, val_set_, cfg_, fcfg, val_rng);
    }

    EpochStats st;
    st.epoch = epoch_;
    st.train_loss = loss_sum / static_cast<double>(order.size());
    st.val_recovery = val_rec;
    st.lr = sched_.lr;
    history_.push_back(st);
    if (log)
        (*log) << "epoch " << epoch_ << " loss " << st.train_loss << " val_recovery "
               << val_rec << " lr " << sched_.lr << "\n";

    if (validate && sched_.step(val_rec)) {
        best_val_recovery_ = val_rec;
        best_epoch_ = epoch_;
        best_model_ = clone_model(model_);
    }
    // With no validation signal the best checkpoint degenerates to the final.
    if (cfg_.val_every == 0 || val_set_.empty()) best_model_ = clone_model(model_);
    ++epoch_;
}

TrainResult Trainer::result() const {
    TrainResult res;
    res.history = history_;
    res.best_epoch = best_epoch_;
    res.best_val_recovery = best_val_recovery_;
    res.best_model = clone_model(best_model_);
    res.final_model = clone_model(model_);
    return res;
}

namespace {
constexpr char kTrainerMagic[9] = "RNADTRST";
}

void Trainer::save_state(const std::string& path) const {
    Json j;
    j["config"] = Json::parse(cfg_.to_json());
    j["epoch"] = epoch_;
    j["root_seed"] = root_seed_;
    j["model_init_seed"] = model_.init_seed();
    j["best_init_seed"] = best_model_.init_seed();
    j["lr"] = sched_.lr;
    j["sched_best"] = sched_.best;
    j["sched_bad_epochs"] = sched_.bad_epochs;
    j["best_epoch"] = best_epoch_;
    j["best_val_recovery"] = best_val_recovery_;
    j["adam_step"] = adam_.step;
    j["rng"] = {{"shuffle", shuffle_rng_.state_string()},
                {"select", select_rng_.state_string()},
                {"noise", noise_rng_.state_string()},
                {"dropout", dropout_rng_.state_string()}};
    Json hist = Json::array();
    for (const auto& h : history_)
        hist.push_back({{"epoch", h.epoch},
                        {"train_loss", h.train_loss},
                        {"val_recovery", h.val_recovery},
                        {"lr", h.lr}});
    j["history"] = hist;
    const std::string header = j.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trainer state: " + path);
    out.write(kTrainerMagic, 8);
    const std::uint64_t hlen = header.size();
    unsigned char lenbuf[8];
    for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<unsigned char>((hlen >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(lenbuf), 8);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& [name, t] : const_cast<Model&>(model_).params()) write_f64_block(out, t->data());
    for (const auto& [name, t] : const_cast<Model&>(best_model_).params())
        write_f64_block(out, t->data());
    for (const auto& m : adam_.m) write_f64_block(out, m);
    for (const auto& v : adam_.v) write_f64_block(out, v);
}

Trainer Trainer::load_state(const std::string& path, const SplitManifest& split,
                            const std::vector<Ensemble>& corpus) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open trainer state: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kTrainerMagic, 8) != 0)
        throw std::invalid_argument("not a trainer state file: " + path);
    unsigned char lenbuf[8];
    in.read(reinterpret_cast<char*>(lenbuf), 8);
    std::uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i) hlen |= static_cast<std::uint64_t>(lenbuf[i]) << (8 * i);
    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::invalid_argument("truncated trainer state: " + path);
    Json j = Json::parse(header);

    TrainConfig cfg = TrainConfig::from_json(j.at("config").dump());
    Trainer t(cfg, split, corpus, false);
    t.root_seed_ = j.at("root_seed").get<std::uint64_t>();
    t.epoch_ = j.at("epoch").get<int>();
    t.model_ = Model(cfg.model, j.at("model_init_seed").get<std::uint64_t>());
    t.best_model_ = Model(cfg.model, j.at("best_init_seed").get<std::uint64_t>());
    t.sched_ = PlateauScheduler(cfg.lr, cfg.plateau_factor, cfg.plateau_patience);
    t.sched_.lr = j.at("lr").get<double>();
    t.sched_.best = j.at("sched_best").get<double>();
    t.sched_.bad_epochs = j.at("sched_bad_epochs").get<int>();
    t.best_epoch_ = j.at("best_epoch").get<int>();
    t.best_val_recovery_ = j.at("best_val_recovery").get<double>();
    t.shuffle_rng_.set_state_string(j.at("rng").at("shuffle").get<std::string>());
    t.select_rng_.set_state_string(j.at("rng").at("select").get<std::string>());
    t.noise_rng_.set_state_string(j.at("rng").at("noise").get<std::string>());
    t.dropout_rng_.set_state_string(j.at("rng").at("dropout").get<std::string>());
    for (const auto& h : j.at("history")) {
        EpochStats st;
        st.epoch = h.at("epoch").get<int>();
        st.train_loss = h.at("train_loss").get<double>();
        st.val_recovery = h.at("val_recovery").get<double>();
        st.lr = h.at("lr").get<double>();
        t.history_.push_back(st);
    }
    for (auto& [name, tensor] : t.model_.params()) read_f64_block(in, tensor->data());
    for (auto& [name, tensor] : t.best_model_.params()) read_f64_block(in, tensor->data());
    t.adam_ = adam_init(t.model_.params());
    t.adam_.step = j.at("adam_step").get<std::int64_t>();
    for (auto& m : t.adam_.m) read_f64_block(in, m);
    for (auto& v : t.adam_.v) read_f64_block(in, v);
    return t;
}

TrainResult train(const TrainConfig& cfg, const SplitManifest& split,
                  const std::vector<Ensemble>& corpus, std::ostream* log) {
    Trainer trainer(cfg, split, corpus);
    while (!trainer.done()) trainer.run_epoch(log);
    return trainer.result();
}

std::string TrainResult::history_json() const {
    Json arr = Json::array();
    for (const auto& h : history) {
        arr.push_back({{"epoch", h.epoch},
                       {"train_loss", h.train_loss},
                       {"val_recovery", h.val_recovery},
                       {"lr", h.lr}});
    }
    Json j;
    j["history"] = arr;
    j["best_epoch"] = best_epoch;
    j["best_val_recovery"] = best_val_recovery;
    return j.dump(2) + "\n";
}

}  // namespace rnadesign
