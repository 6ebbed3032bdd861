"""Phase-transition measurements for lattice spin models and sampled text."""


class OnphaseError(RuntimeError):
    """Raised for every library failure; ``kind`` names the failure class."""

    def __init__(self, message, kind=""):
        super().__init__(message)
        self.kind = kind


from ._core import (  # noqa: E402
    EmbeddingTable,
    alpha_of_dimension,
    analyze_run,
    diagnose_capacity,
    dominance_threshold,
    enumerate_exact,
    fit_critical,
    interaction_edges,
    internal_dimension,
    load_embedding_table,
    nu_of_dimension,
    potts_basis,
    read_token_dump,
    render_report,
    sequence_energy,
    simulate,
    transition_gap,
    twonn_dimension,
    write_embedding_table,
    write_token_dump,
)

__all__ = [
    "OnphaseError",
    "EmbeddingTable",
    "alpha_of_dimension",
    "analyze_run",
    "diagnose_capacity",
    "dominance_threshold",
    "enumerate_exact",
    "fit_critical",
    "interaction_edges",
    "internal_dimension",
    "load_embedding_table",
    "nu_of_dimension",
    "potts_basis",
    "read_token_dump",
    "render_report",
    "sequence_energy",
    "simulate",
    "transition_gap",
    "twonn_dimension",
    "write_embedding_table",
    "write_token_dump",
]
