#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <iostream>
#include <sstream>

#include "rnadesign/align.hpp"
#include "rnadesign/cli.hpp"
#include "rnadesign/featurizer.hpp"
#include "rnadesign/fitness.hpp"
#include "rnadesign/model.hpp"
#include "rnadesign/pdb.hpp"
#include "rnadesign/secondary.hpp"
#include "rnadesign/synthetic.hpp"
#include "rnadesign/training.hpp"

namespace py = pybind11;
using namespace rnadesign;

namespace {

std::vector<std::vector<double>> tensor_rows(const Tensor& t) {
    const std::int64_t cols = t.dim(-1);
    const std::int64_t rows = t.numel() / cols;
    std::vector<std::vector<double>> out(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r)
        out[static_cast<std::size_t>(r)] = {t.data().begin() + r * cols,
                                            t.data().begin() + (r + 1) * cols};
    return out;
}

Coords to_coords(const std::vector<std::array<double, 3>>& pts) {
    Coords c;
    c.reserve(pts.size());
    for (const auto& p : pts) c.push_back({p[0], p[1], p[2]});
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "geometric RNA inverse folding: C++ core bindings";

    py::class_<RnaStructure>(m, "RnaStructure")
        .def_readonly("id", &RnaStructure::id)
        .def_readonly("sequence", &RnaStructure::sequence)
        .def_property_readonly("length", &RnaStructure::length)
        .def_property_readonly("beads",
                               [](const RnaStructure& s) {
                                   std::vector<std::vector<std::array<double, 3>>> out;
                                   for (const auto& b : s.beads)
                                       out.push_back({{b[0][0], b[0][1], b[0][2]},
                                                      {b[1][0], b[1][1], b[1][2]},
                                                      {b[2][0], b[2][1], b[2][2]}});
                                   return out;
                               })
        .def_property_readonly("mask", [](const RnaStructure& s) {
            return std::vector<bool>(s.mask.begin(), s.mask.end());
        });

    py::class_<Ensemble>(m, "Ensemble")
        .def(py::init([](std::string id, std::string sequence,
                         std::vector<RnaStructure> states) {
                 Ensemble e{std::move(id), std::move(sequence), std::move(states)};
                 e.validate();
                 return e;
             }),
             py::arg("id"), py::arg("sequence"), py::arg("states"))
        .def_readonly("id", &Ensemble::id)
        .def_readonly("sequence", &Ensemble::sequence)
        .def_readonly("states", &Ensemble::states);

    py::class_<MultiGraph>(m, "MultiGraph")
        .def_readonly("n", &MultiGraph::n)
        .def_readonly("k", &MultiGraph::k)
        .def_readonly("sequence", &MultiGraph::sequence)
        .def_readonly("edges", &MultiGraph::edges)
        .def_property_readonly("node_s_shape",
                               [](const MultiGraph& g) { return g.node_s.shape(); })
        .def_property_readonly("node_v_shape",
                               [](const MultiGraph& g) { return g.node_v.shape(); })
        .def_property_readonly("edge_s_shape",
                               [](const MultiGraph& g) { return g.edge_s.shape(); })
        .def("to_json", &multigraph_to_json);

    py::class_<Model>(m, "Model")
        .def_property_readonly("param_count", &Model::param_count)
        .def_property_readonly("config_json",
                               [](const Model& mm) { return mm.config().to_json(); })
        .def("logits",
             [](const Model& mm, const MultiGraph& mg, const std::vector<int>& bases) {
                 return tensor_rows(mm.logits(mg, bases));
             },
             py::arg("graph"), py::arg("bases"));

    m.def("parse_pdb", &parse_pdb, py::arg("text"), py::arg("name_hint") = "pdb");
    m.def("parse_pdb_file", &parse_pdb_file, py::arg("path"));
    m.def("emit_pdb", &emit_pdb, py::arg("structure"));

    m.def("featurize",
          [](const Ensemble& e, int max_states) {
              const Ensemble sel =
                  max_states > 0 ? select_states(e, max_states, false, nullptr) : e;
              FeaturizerConfig fc;
              return featurize_ensemble(sel, fc, nullptr);
          },
          py::arg("ensemble"), py::arg("max_states") = 0);

    m.def("kabsch_rmsd",
          [](const std::vector<std::array<double, 3>>& a,
             const std::vector<std::array<double, 3>>& b) {
              return kabsch_rmsd(to_coords(a), to_coords(b));
          });
    m.def("tm_score", [](const std::vector<std::array<double, 3>>& a,
                         const std::vector<std::array<double, 3>>& b) {
        return tm_score(to_coords(a), to_coords(b));
    });

    m.def("nussinov_fold", [](const std::string& seq) {
        const SecondaryStructure s = nussinov_fold(seq);
        return py::make_tuple(s.dot_bracket(), s.pairs);
    });
    m.def("pairs_from_structure", [](const RnaStructure& s) {
        return pairs_from_structure(s).pairs;
    });
    m.def("mcc",
          [](int n, const std::vector<std::pair<int, int>>& pred,
             const std::vector<std::pair<int, int>>& truth) {
              SecondaryStructure p, t;
              p.n = t.n = n;
              p.pairs = pred;
              t.pairs = truth;
              p.validate();
              t.validate();
              return mcc(p, t);
          },
          py::arg("n"), py::arg("pred_pairs"), py::arg("true_pairs"));

    m.def("recovery",
          [](const std::string& designed, const std::string& native) {
              return recovery(designed, native);
          });
    m.def("perplexity", [](const Model& mm, const MultiGraph& mg, const std::string& seq) {
        return perplexity(mm, mg, seq);
    });

    m.def("sample",
          [](const Model& mm, const MultiGraph& mg, double temperature, std::uint64_t seed) {
              SampleOptions opt;
              opt.temperature = temperature;
              RngStream rng(seed);
              const DesignResult d = sample(mm, mg, opt, rng);
              py::dict out;
              out["sequence"] = d.sequence;
              out["perplexity"] = d.perplexity;
              out["per_position_logprob"] = d.per_position_logprob;
              return out;
          },
          py::arg("model"), py::arg("graph"), py::arg("temperature") = 0.1,
          py::arg("seed") = 0);

    m.def("make_model",
          [](const std::string& config_json, std::uint64_t seed) {
              return Model(ModelConfig::from_json(config_json), seed);
          },
          py::arg("config_json") = "{}", py::arg("seed") = 0);
    m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path); });
    m.def("save_checkpoint", [](const std::string& path, const Model& mm) {
        save_checkpoint(path, mm);
    });

    m.def("make_random_hairpin",
          [](std::size_t stem, std::uint64_t seed, const std::string& id) {
              RngStream rng(seed);
              HairpinSpec spec;
              spec.stem = stem;
              auto hp = make_random_hairpin(spec, rng, id);
              return py::make_tuple(hp.structure, hp.pairs);
          },
          py::arg("stem") = 6, py::arg("seed") = 0, py::arg("id") = "hairpin");
    m.def("make_random_coil", [](std::size_t n, std::uint64_t seed, const std::string& id) {
        RngStream rng(seed);
        return make_random_coil(n, rng, id);
    }, py::arg("n"), py::arg("seed") = 0, py::arg("id") = "coil");

    // Full pipeline access; arguments exactly as the command line tool takes
    // them, return value is the exit code.
    m.def("run_cli", [](const std::vector<std::string>& args) {
        return run_cli(args, std::cerr);
    });
}
