#include "rnadesign/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "rnadesign/clustering.hpp"
#include "rnadesign/fitness.hpp"
#include "rnadesign/pdb.hpp"
#include "rnadesign/secondary.hpp"
#include "rnadesign/splits.hpp"
#include "rnadesign/training.hpp"

namespace rnadesign {

namespace fs = std::filesystem;
using Json = nlohmann::json;

std::vector<Ensemble> load_corpus_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pdb")
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::invalid_argument("no .pdb files in " + dir);
    std::vector<RnaStructure> structures;
    for (const auto& f : files) {
        auto parsed = parse_pdb_file(f);
        structures.insert(structures.end(), parsed.begin(), parsed.end());
    }
    return group_into_ensembles(structures);
}

namespace {

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Ensemble ensemble_from_pdbs(const std::vector<std::string>& paths) {
    std::vector<RnaStructure> states;
    for (const auto& p : paths) {
        auto parsed = parse_pdb_file(p);
        states.insert(states.end(), parsed.begin(), parsed.end());
    }
    if (states.empty()) throw std::invalid_argument("no structures parsed");
    for (const auto& s : states) {
        if (s.sequence != states.front().sequence)
            throw std::invalid_argument(
                "input structures disagree on the sequence; states of one ensemble must "
                "share it");
    }
    Ensemble e;
    e.id = states.front().id;
    e.sequence = states.front().sequence;
    e.states = std::move(states);
    return e;
}

std::vector<std::size_t> parse_budget_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(static_cast<std::size_t>(std::stoull(tok)));
    }
    if (out.empty()) throw std::invalid_argument("empty budget list");
    return out;
}

// {"positions": [1-based...], "ranges": [[lo, hi], ...]} -> keep-native mask.
std::vector<int> parse_fixed_positions(const std::string& path, const std::string& native) {
    Json j = Json::parse(read_text_file(path));
    std::vector<int> fixed(native.size(), -1);
    auto pin = [&](std::size_t pos1) {
        if (pos1 < 1 || pos1 > native.size())
            throw std::invalid_argument("fixed position out of range: " + std::to_string(pos1));
        const char c = native[pos1 - 1];
        if (c == 'N')
            throw std::invalid_argument("cannot fix a position with unknown native base");
        fixed[pos1 - 1] = base_index(c);
    };
    if (j.contains("positions"))
        for (const auto& p : j["positions"]) pin(p.get<std::size_t>());
    if (j.contains("ranges"))
        for (const auto& r : j["ranges"]) {
            const std::size_t lo = r.at(0).get<std::size_t>(), hi = r.at(1).get<std::size_t>();
            if (lo > hi) throw std::invalid_argument("fixed range with lo > hi");
            for (std::size_t p = lo; p <= hi; ++p) pin(p);
        }
    return fixed;
}

int cmd_featurize(const std::string& out_path, const std::vector<std::string>& pdbs,
                  int max_states, std::ostream& err) {
    Ensemble e = ensemble_from_pdbs(pdbs);
    if (max_states > 0) e = select_states(e, max_states, false, nullptr);
    FeaturizerConfig fc;
    const MultiGraph mg = featurize_ensemble(e, fc, nullptr);
    write_text_file(out_path, multigraph_to_json(mg));
    err << "featurized " << e.states.size() << " state(s), n=" << mg.n
        << ", union edges=" << mg.edges.size() << "\n";
    return 0;
}

int cmd_split(const std::string& corpus_dir, const std::string& kind,
              const std::string& out_path, std::uint64_t seed,
              const std::vector<std::string>& test_ids, std::size_t test_cap,
              std::size_t val_cap, std::ostream& err) {
    auto ensembles = load_corpus_dir(corpus_dir);
    auto clusters = cluster_structures(ensembles);
    SplitManifest m;
    if (kind == "single_state") {
        if (test_ids.empty())
            throw std::invalid_argument("single_state split needs --test-ids");
        m = make_single_state_split(ensembles, clusters, test_ids, seed, val_cap);
    } else if (kind == "multi_state") {
        m = make_multi_state_split(ensembles, clusters, seed, test_cap, val_cap);
    } else {
        throw std::invalid_argument("unknown split kind: " + kind);
    }
    write_manifest_file(out_path, m);
    err << "split " << kind << ": train=" << m.train.size() << " val=" << m.val.size()
        << " test=" << m.test.size() << " clusters=" << clusters.n_clusters << "\n";
    return 0;
}

int cmd_train(const std::string& corpus_dir, const std::string& manifest_path,
              const std::string& out_dir, const std::string& resume_path, TrainConfig cfg,
              int epochs_override, std::ostream& err) {
    auto corpus = load_corpus_dir(corpus_dir);
    auto manifest = read_manifest_file(manifest_path);
    fs::create_directories(out_dir);

    Trainer trainer = resume_path.empty()
                          ? Trainer(cfg, manifest, corpus)
                          : Trainer::load_state(resume_path, manifest, corpus);
    if (!resume_path.empty() && epochs_override > 0) trainer.set_max_epochs(epochs_override);
    while (!trainer.done()) trainer.run_epoch(&err);

    const TrainResult res = trainer.result();
    Json meta;
    meta["best_epoch"] = res.best_epoch;
    meta["best_val_recovery"] = res.best_val_recovery;
    meta["seed"] = trainer.config().seed;
    meta["epochs"] = trainer.epoch();
    save_checkpoint(out_dir + "/checkpoint.bin", res.best_model, meta.dump());
    save_checkpoint(out_dir + "/final_checkpoint.bin", res.final_model, meta.dump());
    trainer.save_state(out_dir + "/trainer_state.bin");
    write_text_file(out_dir + "/history.json", res.history_json());
    write_text_file(out_dir + "/train_config.json", trainer.config().to_json() + "\n");
    err << "done: best val recovery " << res.best_val_recovery << " at epoch "
        << res.best_epoch << "\n";
    return 0;
}

int cmd_design(const std::string& checkpoint, const std::vector<std::string>& pdbs,
               const std::string& out_dir, int n_samples, double temperature,
               std::uint64_t seed, const std::string& fixed_path,
               const std::string& secondary_path, int max_states, int jobs,
               std::ostream& err) {
    Model model = load_checkpoint(checkpoint);
    Ensemble e = ensemble_from_pdbs(pdbs);
    if (max_states > 0) e = select_states(e, max_states, false, nullptr);
    FeaturizerConfig fc;
    const MultiGraph mg = featurize_ensemble(e, fc, nullptr);

    std::string native = mg.sequence;
    std::vector<int> fixed;
    SampleOptions opt;
    opt.temperature = temperature;
    if (!fixed_path.empty()) {
        // Fixed positions are 1-based over the full chain; remap onto graph
        // nodes.
        std::string full_native;
        for (std::size_t i = 0; i < e.sequence.size(); ++i) full_native.push_back(e.sequence[i]);
        auto full_fixed = parse_fixed_positions(fixed_path, full_native);
        fixed.resize(static_cast<std::size_t>(mg.n), -1);
        for (std::size_t g = 0; g < mg.orig_index.size(); ++g)
            fixed[g] = full_fixed[static_cast<std::size_t>(mg.orig_index[g])];
        opt.fixed = &fixed;
    }

    // Ground-truth pairings for the self-consistency column.
    std::vector<SecondaryStructure> truths;
    if (!secondary_path.empty()) {
        std::istringstream is(read_text_file(secondary_path));
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '>' || line[0] == '#') continue;
            truths.push_back(parse_dot_bracket(line));
        }
        if (truths.empty()) throw std::invalid_argument("no dot-bracket lines in " + secondary_path);
    } else {
        for (const auto& st : e.states) truths.push_back(pairs_from_structure(st));
    }
    // Restrict truths to the graph's node set when residues were masked out.
    std::vector<int> remap(e.sequence.size(), -1);
    for (std::size_t g = 0; g < mg.orig_index.size(); ++g)
        remap[static_cast<std::size_t>(mg.orig_index[g])] = static_cast<int>(g);
    for (auto& t : truths) {
        if (t.n == static_cast<int>(mg.n)) continue;
        if (t.n != static_cast<int>(e.sequence.size()))
            throw std::invalid_argument("secondary structure length mismatch");
        SecondaryStructure r;
        r.n = static_cast<int>(mg.n);
        for (auto& [i, j] : t.pairs) {
            const int a = remap[static_cast<std::size_t>(i)], b = remap[static_cast<std::size_t>(j)];
            if (a >= 0 && b >= 0 && b - a >= kMinLoopLen + 1) r.pairs.emplace_back(a, b);
        }
        t = r;
    }

    const bool native_known = native.find('N') == std::string::npos;
    fs::create_directories(out_dir);

    // Designs are independent: each draws from its own child stream, so the
    // output is the same for any --jobs value.
    std::vector<DesignResult> results(static_cast<std::size_t>(n_samples));
    RngStream rng = RngStream(seed).child("design");
    auto worker = [&](int begin, int step) {
        for (int s = begin; s < n_samples; s += step) {
            RngStream srng = rng.child(static_cast<std::uint64_t>(s));
            results[static_cast<std::size_t>(s)] = sample(model, mg, opt, srng);
        }
    };
    if (jobs <= 1) {
        worker(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker, j, jobs);
        for (auto& t : pool) t.join();
    }

    std::vector<std::pair<std::string, std::string>> fasta;
    Json rows = Json::array();
    for (int s = 0; s < n_samples; ++s) {
        const DesignResult& d = results[static_cast<std::size_t>(s)];
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "design_%03d", s);

        fasta.emplace_back(idbuf, d.sequence);
        Json row;
        row["id"] = idbuf;
        row["sequence"] = d.sequence;
        row["perplexity"] = d.perplexity;
        if (native_known) {
            std::vector<bool> designed(d.sequence.size(), true);
            if (opt.fixed)
                for (std::size_t i = 0; i < designed.size(); ++i) designed[i] = fixed[i] < 0;
            row["recovery"] = recovery(d.sequence, native, &designed);
        }
        SecondaryStructure folded = nussinov_fold(d.sequence);
        double m = 0;
        for (const auto& t : truths) m += mcc(folded, t);
        row["mcc"] = m / static_cast<double>(truths.size());
        rows.push_back(row);
    }
    write_text_file(out_dir + "/designs.fasta", write_fasta(fasta));
    write_text_file(out_dir + "/designs.json", rows.dump(2) + "\n");
    err << "wrote " << n_samples << " designs to " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& corpus_dir,
             const std::string& manifest_path, const std::string& out_dir,
             const std::string& which, int n_samples, double temperature, int max_states,
             std::uint64_t seed, std::ostream& err) {
    Model model = load_checkpoint(checkpoint);
    auto corpus = load_corpus_dir(corpus_dir);
    auto manifest = read_manifest_file(manifest_path);
    const std::vector<std::string>* ids;
    if (which == "test") ids = &manifest.test;
    else if (which == "val") ids = &manifest.val;
    else if (which == "train") ids = &manifest.train;
    else throw std::invalid_argument("unknown eval split: " + which);

    std::map<std::string, const Ensemble*> by_id;
    for (const auto& e : corpus) by_id[e.id] = &e;
    std::vector<Ensemble> list;
    for (const auto& id : *ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw std::invalid_argument("manifest id not in corpus: " + id);
        list.push_back(*it->second);
    }
    if (list.empty()) throw std::invalid_argument("selected split is empty");

    FeaturizerConfig fc;
    RngStream rng = RngStream(seed).child("eval");
    auto rows = evaluate_ensembles(model, list, fc, n_samples, temperature, max_states, rng);

    fs::create_directories(out_dir);
    std::ostringstream csv;
    csv.precision(12);
    csv << "id,recovery,perplexity,mcc\n";
    Json jrows = Json::array();
    double mr = 0, mp = 0, mm = 0;
    for (const auto& r : rows) {
        csv << r.id << "," << r.recovery << "," << r.perplexity << "," << r.mcc << "\n";
        jrows.push_back({{"id", r.id},
                         {"recovery", r.recovery},
                         {"perplexity", r.perplexity},
                         {"mcc", r.mcc}});
        mr += r.recovery;
        mp += r.perplexity;
        mm += r.mcc;
    }
    write_text_file(out_dir + "/metrics.csv", csv.str());
    Json summary;
    summary["rows"] = jrows;
    summary["mean_recovery"] = mr / rows.size();
    summary["mean_perplexity"] = mp / rows.size();
    summary["mean_mcc"] = mm / rows.size();
    summary["secondary_structure_oracle"] = "internal max-pairing fold";
    write_text_file(out_dir + "/metrics.json", summary.dump(2) + "\n");
    err << which << " n=" << rows.size() << " recovery=" << mr / rows.size()
        << " perplexity=" << mp / rows.size() << " mcc=" << mm / rows.size() << "\n";
    return 0;
}

int cmd_rank(const std::string& checkpoint, const std::vector<std::string>& pdbs,
             const std::string& landscape_path, const std::string& budgets_text,
             const std::string& out_dir, std::size_t n_sims, int max_states,
             std::uint64_t seed, std::ostream& err) {
    Model model = load_checkpoint(checkpoint);
    Ensemble e = ensemble_from_pdbs(pdbs);
    if (max_states > 0) e = select_states(e, max_states, false, nullptr);
    FeaturizerConfig fc;
    const MultiGraph mg = featurize_ensemble(e, fc, nullptr);
    if (mg.sequence.find('N') != std::string::npos)
        throw std::invalid_argument("rank: wild-type backbone must have known bases");
    if (mg.sequence.size() != e.sequence.size())
        throw std::invalid_argument("rank: backbone has unresolved residues");

    auto records = read_landscape_file(landscape_path, mg.sequence);
    const auto budgets = parse_budget_list(budgets_text);
    RngStream rng = RngStream(seed).child("rank");
    auto reports = evaluate_strategies(records, model, mg, mg.sequence, budgets, n_sims, rng);

    fs::create_directories(out_dir);
    write_text_file(out_dir + "/budget_report.csv", budget_reports_to_csv(reports));
    write_text_file(out_dir + "/budget_report.json", budget_reports_to_json(reports));
    err << "ranked " << records.size() << " records across " << budgets.size()
        << " budget(s)\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& err) {
    CLI::App app{"geometric RNA inverse folding toolkit"};
    app.require_subcommand(1);

    // featurize
    auto* feat = app.add_subcommand("featurize", "dump a featurized multigraph as JSON");
    std::vector<std::string> feat_pdbs;
    std::string feat_out;
    int feat_max_states = 0;
    feat->add_option("--pdb", feat_pdbs, "input PDB file(s), one per state")->required();
    feat->add_option("--out", feat_out, "output JSON path")->required();
    feat->add_option("--max-states", feat_max_states, "keep at most this many states (0 = all)");

    // split
    auto* split = app.add_subcommand("split", "build train/val/test split manifests");
    std::string split_corpus, split_kind = "multi_state", split_out;
    std::uint64_t split_seed = 0;
    std::vector<std::string> split_test_ids;
    std::size_t split_test_cap = 100, split_val_cap = 100;
    split->add_option("--corpus", split_corpus, "directory of PDB files")->required();
    split->add_option("--kind", split_kind, "single_state | multi_state");
    split->add_option("--out", split_out, "manifest output path")->required();
    split->add_option("--seed", split_seed, "split seed");
    split->add_option("--test-ids", split_test_ids,
                      "ensemble ids whose clusters form the test set (single_state)");
    split->add_option("--test-cap", split_test_cap, "test set size cap");
    split->add_option("--val-cap", split_val_cap, "validation set size cap");

    // train
    auto* tr = app.add_subcommand("train", "train a model on a split");
    std::string tr_corpus, tr_manifest, tr_out = "run", tr_config, tr_resume, tr_decoder;
    TrainConfig tr_cfg;
    double tr_dropout = -1.0;
    tr->add_option("--corpus", tr_corpus, "directory of PDB files")->required();
    tr->add_option("--manifest", tr_manifest, "split manifest")->required();
    tr->add_option("--out", tr_out, "output directory");
    tr->add_option("--config", tr_config, "training config JSON");
    tr->add_option("--resume", tr_resume, "trainer state to resume from");
    tr->add_option("--seed", tr_cfg.seed, "training seed");
    tr->add_option("--epochs", tr_cfg.max_epochs, "max epochs");
    tr->add_option("--lr", tr_cfg.lr, "initial learning rate");
    tr->add_option("--max-states", tr_cfg.max_states, "conformations per ensemble");
    tr->add_option("--max-train-len", tr_cfg.max_train_len, "max training RNA length");
    tr->add_option("--noise-sigma", tr_cfg.noise_sigma, "coordinate noise (A)");
    tr->add_option("--label-smoothing", tr_cfg.label_smoothing, "cross-entropy smoothing");
    tr->add_option("--val-samples", tr_cfg.val_samples, "designs per validation ensemble");
    tr->add_option("--decoder", tr_decoder, "AR | NAR");
    tr->add_option("--dropout", tr_dropout, "dropout probability");

    // design
    auto* de = app.add_subcommand("design", "sample sequences for a backbone");
    std::string de_ckpt, de_out = "designs", de_fixed, de_secondary;
    std::vector<std::string> de_pdbs;
    int de_n = 16, de_max_states = 0, de_jobs = 1;
    double de_temp = 0.1;
    std::uint64_t de_seed = 0;
    de->add_option("--checkpoint", de_ckpt, "model checkpoint")->required();
    de->add_option("--pdb", de_pdbs, "backbone PDB file(s)")->required();
    de->add_option("--out", de_out, "output directory");
    de->add_option("--n-samples", de_n, "designs to sample");
    de->add_option("--temperature", de_temp, "sampling temperature");
    de->add_option("--seed", de_seed, "sampling seed");
    de->add_option("--fixed", de_fixed, "JSON file of 1-based positions to keep native");
    de->add_option("--secondary", de_secondary, "dot-bracket ground truth (overrides geometry)");
    de->add_option("--max-states", de_max_states, "keep at most this many states (0 = all)");
    de->add_option("--jobs", de_jobs, "parallel sampling threads (outputs are identical)");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string ev_ckpt, ev_corpus, ev_manifest, ev_out = "eval", ev_split = "test";
    int ev_n = 16, ev_max_states = 1;
    double ev_temp = 0.1;
    std::uint64_t ev_seed = 0;
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
    ev->add_option("--corpus", ev_corpus, "directory of PDB files")->required();
    ev->add_option("--manifest", ev_manifest, "split manifest")->required();
    ev->add_option("--out", ev_out, "output directory");
    ev->add_option("--split", ev_split, "test | val | train");
    ev->add_option("--n-samples", ev_n, "designs per ensemble");
    ev->add_option("--temperature", ev_temp, "sampling temperature");
    ev->add_option("--max-states", ev_max_states, "conformations per ensemble");
    ev->add_option("--seed", ev_seed, "sampling seed");

    // rank
    auto* rk = app.add_subcommand("rank", "rank a mutant fitness landscape");
    std::string rk_ckpt, rk_landscape, rk_budgets = "10,100,1000", rk_out = "rank";
    std::vector<std::string> rk_pdbs;
    std::size_t rk_sims = 10000;
    int rk_max_states = 0;
    std::uint64_t rk_seed = 0;
    rk->add_option("--checkpoint", rk_ckpt, "model checkpoint")->required();
    rk->add_option("--pdb", rk_pdbs, "wild-type backbone PDB file(s)")->required();
    rk->add_option("--landscape", rk_landscape, "CSV of sequence,fitness")->required();
    rk->add_option("--budgets", rk_budgets, "comma-separated design budgets");
    rk->add_option("--out", rk_out, "output directory");
    rk->add_option("--n-sims", rk_sims, "simulations per baseline");
    rk->add_option("--max-states", rk_max_states, "states used for perplexity (0 = all)");
    rk->add_option("--seed", rk_seed, "simulation seed");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            err << app.help();
            return 0;
        }
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*feat) return cmd_featurize(feat_out, feat_pdbs, feat_max_states, err);
        if (*split)
            return cmd_split(split_corpus, split_kind, split_out, split_seed, split_test_ids,
                             split_test_cap, split_val_cap, err);
        if (*tr) {
            TrainConfig cfg = tr_cfg;
            if (!tr_config.empty()) {
                cfg = TrainConfig::from_json(read_text_file(tr_config));
                // Re-apply explicit flag overrides on top of the file.
                for (const auto* opt : tr->get_options()) {
                    if (opt->count() == 0) continue;
                    const std::string name = opt->get_name();
                    if (name == "--seed") cfg.seed = tr_cfg.seed;
                    else if (name == "--epochs") cfg.max_epochs = tr_cfg.max_epochs;
                    else if (name == "--lr") cfg.lr = tr_cfg.lr;
                    else if (name == "--max-states") cfg.max_states = tr_cfg.max_states;
                    else if (name == "--max-train-len") cfg.max_train_len = tr_cfg.max_train_len;
                    else if (name == "--noise-sigma") cfg.noise_sigma = tr_cfg.noise_sigma;
                    else if (name == "--label-smoothing")
                        cfg.label_smoothing = tr_cfg.label_smoothing;
                    else if (name == "--val-samples") cfg.val_samples = tr_cfg.val_samples;
                }
            }
            if (!tr_decoder.empty()) cfg.model.decoder_kind = decoder_kind_from_name(tr_decoder);
            if (tr_dropout >= 0.0) cfg.model.dropout = tr_dropout;
            const int epochs_override =
                tr->count("--epochs") ? tr_cfg.max_epochs : -1;
            return cmd_train(tr_corpus, tr_manifest, tr_out, tr_resume, cfg, epochs_override,
                             err);
        }
        if (*de)
            return cmd_design(de_ckpt, de_pdbs, de_out, de_n, de_temp, de_seed, de_fixed,
                              de_secondary, de_max_states, de_jobs, err);
        if (*ev)
            return cmd_eval(ev_ckpt, ev_corpus, ev_manifest, ev_out, ev_split, ev_n, ev_temp,
                            ev_max_states, ev_seed, err);
        if (*rk)
            return cmd_rank(rk_ckpt, rk_pdbs, rk_landscape, rk_budgets, rk_out, rk_sims,
                            rk_max_states, rk_seed, err);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace rnadesign
