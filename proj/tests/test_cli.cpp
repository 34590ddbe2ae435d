#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "rnadesign/cli.hpp"
#include "rnadesign/model.hpp"
#include "rnadesign/pdb.hpp"
#include "rnadesign/splits.hpp"
#include "rnadesign/synthetic.hpp"
#include "rnadesign/training.hpp"

using namespace rnadesign;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(const std::vector<std::string>& args) {
    std::ostringstream err;
    const int code = run_cli(args, err);
    INFO(err.str());
    return code;
}

struct TmpDir {
    fs::path path;
    explicit TmpDir(const std::string& name) : path(fs::path("cli_tmp") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

// Writes a corpus of hairpin ensembles as one PDB file per state. Stems
// cycle through distinct lengths so the corpus clusters into several small
// groups (equal-length idealized hairpins always share a cluster).
void write_corpus(const fs::path& dir, std::size_t count, std::uint64_t seed,
                  std::size_t n_states = 1) {
    fs::create_directories(dir);
    RngStream rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        HairpinSpec hs;
        hs.stem = 3 + i % 6;
        char id[16];
        std::snprintf(id, sizeof(id), "hp%03zu", i);
        std::string stem_seq;
        for (std::size_t k = 0; k < hs.stem; ++k)
            stem_seq.push_back(base_char(static_cast<int>(rng.uniform_int(4))));
        for (std::size_t s = 0; s < n_states; ++s) {
            hs.hinge_angle = n_states > 1 ? 0.25 * static_cast<double>(s) : 0.0;
            auto hp = make_hairpin(hs, stem_seq, std::string(id) + "_s" + std::to_string(s));
            write_pdb_file((dir / (hp.structure.id + ".pdb")).string(), hp.structure);
        }
    }
}

std::string tiny_train_config_json(int epochs, std::uint64_t seed) {
    ModelConfig mc;
    mc.node_s_dim = 12;
    mc.node_v_dim = 4;
    mc.edge_s_dim = 8;
    mc.edge_v_dim = 2;
    mc.encoder_layers = 1;
    mc.decoder_layers = 1;
    mc.dropout = 0.0;
    TrainConfig tc;
    tc.model = mc;
    tc.lr = 1e-3;
    tc.max_epochs = epochs;
    tc.seed = seed;
    tc.val_samples = 1;
    return tc.to_json();
}

}  // namespace

TEST_CASE("split: manifest validates, reruns are byte-identical, bad dir exits 2") {
    TmpDir dir("split");
    write_corpus(dir.path / "corpus", 8, 3);
    fs::create_directories(dir.path / "corpus2");  // empty

    const std::string out1 = (dir.path / "m1.json").string();
    const std::string out2 = (dir.path / "m2.json").string();
    CHECK(cli({"split", "--corpus", (dir.path / "corpus").string(), "--kind", "multi_state",
               "--out", out1, "--seed", "7", "--test-cap", "2", "--val-cap", "2"}) == 0);
    CHECK(cli({"split", "--corpus", (dir.path / "corpus").string(), "--kind", "multi_state",
               "--out", out2, "--seed", "7", "--test-cap", "2", "--val-cap", "2"}) == 0);
    CHECK(slurp(out1) == slurp(out2));

    auto manifest = read_manifest_file(out1);
    auto corpus = load_corpus_dir((dir.path / "corpus").string());
    manifest.validate(corpus);  // disjointness + coverage oracle

    CHECK(cli({"split", "--corpus", (dir.path / "missing").string(), "--kind", "multi_state",
               "--out", out1}) == 2);
    CHECK(cli({"split", "--corpus", (dir.path / "corpus2").string(), "--kind", "multi_state",
               "--out", out1}) == 2);
    // single_state without --test-ids is a validation failure.
    CHECK(cli({"split", "--corpus", (dir.path / "corpus").string(), "--kind", "single_state",
               "--out", out1}) == 2);
}

TEST_CASE("featurize dumps a graph json") {
    TmpDir dir("feat");
    write_corpus(dir.path, 1, 5, 2);
    std::vector<std::string> args = {"featurize", "--out", (dir.path / "g.json").string()};
    for (const auto& entry : fs::directory_iterator(dir.path))
        if (entry.path().extension() == ".pdb") {
            args.push_back("--pdb");
            args.push_back(entry.path().string());
        }
    CHECK(cli(args) == 0);
    auto j = nlohmann::json::parse(slurp((dir.path / "g.json").string()));
    CHECK(j["k"] == 2);
    CHECK(j["node_s"]["shape"].size() == 3);
}

TEST_CASE("train + eval + design + rank round trip") {
    TmpDir dir("pipeline");
    const auto corpus_dir = dir.path / "corpus";
    write_corpus(corpus_dir, 8, 11);

    // Split.
    const std::string manifest = (dir.path / "manifest.json").string();
    REQUIRE(cli({"split", "--corpus", corpus_dir.string(), "--kind", "multi_state", "--out",
                 manifest, "--seed", "1", "--test-cap", "2", "--val-cap", "2"}) == 0);

    // Train, twice with the same seed: byte-identical machine outputs.
    const std::string cfg_path = (dir.path / "train.json").string();
    {
        std::ofstream out(cfg_path);
        out << tiny_train_config_json(2, 5);
    }
    const auto run1 = dir.path / "run1";
    const auto run2 = dir.path / "run2";
    REQUIRE(cli({"train", "--corpus", corpus_dir.string(), "--manifest", manifest, "--out",
                 run1.string(), "--config", cfg_path}) == 0);
    REQUIRE(cli({"train", "--corpus", corpus_dir.string(), "--manifest", manifest, "--out",
                 run2.string(), "--config", cfg_path}) == 0);
    CHECK(slurp((run1 / "checkpoint.bin").string()) == slurp((run2 / "checkpoint.bin").string()));
    CHECK(slurp((run1 / "history.json").string()) == slurp((run2 / "history.json").string()));

    // Resume: train 1 epoch, resume to 2, history matches the straight run.
    {
        std::ofstream out(cfg_path);
        out << tiny_train_config_json(1, 5);
    }
    const auto short_run = dir.path / "short";
    REQUIRE(cli({"train", "--corpus", corpus_dir.string(), "--manifest", manifest, "--out",
                 short_run.string(), "--config", cfg_path}) == 0);
    const auto resumed = dir.path / "resumed";
    {
        std::ofstream out(cfg_path);
        out << tiny_train_config_json(2, 5);
    }
    REQUIRE(cli({"train", "--corpus", corpus_dir.string(), "--manifest", manifest, "--out",
                 resumed.string(), "--config", cfg_path, "--resume",
                 (short_run / "trainer_state.bin").string(), "--epochs", "2"}) == 0);
    // The resumed run must reproduce epoch 2 of the straight run bit for bit.
    auto h1 = nlohmann::json::parse(slurp((run1 / "history.json").string()));
    auto h2 = nlohmann::json::parse(slurp((resumed / "history.json").string()));
    REQUIRE(h2["history"].size() == 2);
    CHECK(h1["history"][1]["train_loss"] == h2["history"][1]["train_loss"]);

    // Eval: one row per test ensemble with the three metric columns; an
    // untrained-ish model scores in the chance band.
    const auto eval_dir = dir.path / "eval";
    REQUIRE(cli({"eval", "--checkpoint", (run1 / "checkpoint.bin").string(), "--corpus",
                 corpus_dir.string(), "--manifest", manifest, "--out", eval_dir.string(),
                 "--split", "test", "--n-samples", "4", "--seed", "3"}) == 0);
    const std::string csv = slurp((eval_dir / "metrics.csv").string());
    CHECK(csv.rfind("id,recovery,perplexity,mcc\n", 0) == 0);
    auto mj = nlohmann::json::parse(slurp((eval_dir / "metrics.json").string()));
    const auto split_manifest = read_manifest_file(manifest);
    CHECK(mj["rows"].size() == split_manifest.test.size());
    CHECK(mj["mean_recovery"].get<double>() > 0.10);
    CHECK(mj["mean_recovery"].get<double>() < 0.45);

    // Design: 16 designs, 16 metric rows, fixed positions pinned, seed
    // reproducibility.
    const auto des1 = dir.path / "des1";
    const auto des2 = dir.path / "des2";
    std::vector<std::string> state_pdbs;
    // Ensemble ids carry the parser's chain suffix; the file stem is a prefix.
    const std::string target = split_manifest.test.front();
    for (const auto& entry : fs::directory_iterator(corpus_dir)) {
        const std::string stem = entry.path().stem().string();
        if (target.rfind(stem, 0) == 0) state_pdbs.push_back(entry.path().string());
    }
    REQUIRE(state_pdbs.size() == 1);
    const std::string fixed_path = (dir.path / "fixed.json").string();
    {
        std::ofstream out(fixed_path);
        out << R"({"ranges": [[1, 5]]})";
    }
    auto design_args = [&](const fs::path& out) {
        return std::vector<std::string>{
            "design", "--checkpoint", (run1 / "checkpoint.bin").string(),
            "--pdb", state_pdbs[0], "--out", out.string(), "--n-samples", "16",
            "--temperature", "0.5", "--seed", "9", "--fixed", fixed_path};
    };
    REQUIRE(cli(design_args(des1)) == 0);
    REQUIRE(cli(design_args(des2)) == 0);
    CHECK(slurp((des1 / "designs.fasta").string()) == slurp((des2 / "designs.fasta").string()));
    auto dj = nlohmann::json::parse(slurp((des1 / "designs.json").string()));
    REQUIRE(dj.size() == 16);
    const auto native = parse_pdb_file(state_pdbs[0])[0].sequence;
    for (const auto& row : dj) {
        const std::string seq = row["sequence"].get<std::string>();
        CHECK(seq.substr(0, 5) == native.substr(0, 5));  // pinned prefix
        CHECK(row.contains("perplexity"));
        CHECK(row.contains("recovery"));
        CHECK(row.contains("mcc"));
    }

    // Rank: landscape of single mutants; 2 budgets x 4 strategies.
    const std::string landscape = (dir.path / "landscape.csv").string();
    {
        std::ofstream out(landscape);
        out << "sequence,fitness\n" << native << ",1.0\n";
        RngStream mrng(5);
        for (int m = 0; m < 12; ++m) {
            std::string mut = native;
            const std::size_t pos = mrng.uniform_int(mut.size());
            char c;
            do {
                c = base_char(static_cast<int>(mrng.uniform_int(4)));
            } while (c == mut[pos]);
            mut[pos] = c;
            out << mut << "," << 1.0 + 0.1 * m << "\n";
        }
    }
    const auto rank_dir = dir.path / "rank";
    REQUIRE(cli({"rank", "--checkpoint", (run1 / "checkpoint.bin").string(), "--pdb",
                 state_pdbs[0], "--landscape", landscape, "--budgets", "3,10", "--out",
                 rank_dir.string(), "--n-sims", "500", "--seed", "2"}) == 0);
    auto rj = nlohmann::json::parse(slurp((rank_dir / "budget_report.json").string()));
    CHECK(rj.size() == 8);
    for (const auto& row : rj) {
        if (row["strategy"] == "model_perplexity") {
            CHECK_FALSE(row.contains("q25"));  // deterministic rows carry no iqr
        } else {
            CHECK(row.contains("q25"));
        }
    }

    // Bad checkpoint path is a validation failure.
    CHECK(cli({"eval", "--checkpoint", (dir.path / "nope.bin").string(), "--corpus",
               corpus_dir.string(), "--manifest", manifest, "--out",
               (dir.path / "x").string()}) == 2);
}
