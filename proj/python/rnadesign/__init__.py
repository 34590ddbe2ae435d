"""Geometric RNA inverse folding: python bindings over the C++ core."""

from ._core import (
    Ensemble,
    Model,
    MultiGraph,
    RnaStructure,
    emit_pdb,
    featurize,
    kabsch_rmsd,
    load_checkpoint,
    make_model,
    make_random_coil,
    make_random_hairpin,
    mcc,
    nussinov_fold,
    pairs_from_structure,
    parse_pdb,
    parse_pdb_file,
    perplexity,
    recovery,
    run_cli,
    sample,
    save_checkpoint,
    tm_score,
)

__all__ = [
    "Ensemble",
    "Model",
    "MultiGraph",
    "RnaStructure",
    "emit_pdb",
    "featurize",
    "kabsch_rmsd",
    "load_checkpoint",
    "make_model",
    "make_random_coil",
    "make_random_hairpin",
    "mcc",
    "nussinov_fold",
    "pairs_from_structure",
    "parse_pdb",
    "parse_pdb_file",
    "perplexity",
    "recovery",
    "run_cli",
    "sample",
    "save_checkpoint",
    "tm_score",
]
