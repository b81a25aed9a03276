"""bibmap: a workbench for bibliometric systematic mapping studies.

Ingests RIS exports from reference databases, runs boolean keyword queries
over them, curates the collection through ledgered dedup/exclusion stages
with human-in-the-loop sampling sessions, fits per-year publication trends
with stepwise polynomial regression, and emits CSV/SVG reports. A CLI and a
local HTTP service expose the same operations.
"""

from bibmap.errors import (BibmapError, CurationError, LedgerError, PipelineError,
                           QuerySyntaxError, RegressionError, ReviewRequired,
                           RisParseError, SamplingError, ServiceError, SessionError,
                           SidecarError)
from bibmap.records import (Corpus, LedgerEntry, ProvenanceLedger, Reference,
                            load_corpus, save_corpus)
from bibmap.ingest import (attach_citations, load_citation_sidecar, merge_corpora,
                           parse_ris, write_ris)
from bibmap.queries import (ALL_FIELDS, FieldMask, format_query, match_reference,
                            parse_query, run_query)
from bibmap.curation import (DedupPolicy, ExclusionRule, apply_exclusions, dedup,
                             remove_authorless)
from bibmap.stats import (draw_sample, margin_of_error, normal_quantile,
                          sample_size)
from bibmap.sessions import ReviewSession, advance_session, load_session, record_verdict
from bibmap.trends import (CategorySpec, RegressionModel, TimeSeries,
                           category_counts, counts_per_year,
                           cumulative_citations_per_year, fit_stepwise, predict)

__version__ = "0.1.0"

__all__ = [
    "BibmapError", "RisParseError", "SidecarError", "QuerySyntaxError",
    "LedgerError", "CurationError", "SamplingError", "SessionError",
    "RegressionError", "PipelineError", "ReviewRequired", "ServiceError",
    "Reference", "LedgerEntry", "ProvenanceLedger", "Corpus",
    "load_corpus", "save_corpus",
    "parse_ris", "write_ris", "merge_corpora", "load_citation_sidecar",
    "attach_citations",
    "FieldMask", "ALL_FIELDS", "parse_query", "format_query",
    "match_reference", "run_query",
    "DedupPolicy", "ExclusionRule", "dedup", "remove_authorless",
    "apply_exclusions",
    "normal_quantile", "sample_size", "margin_of_error", "draw_sample",
    "ReviewSession", "advance_session", "record_verdict", "load_session",
    "TimeSeries", "RegressionModel", "CategorySpec", "counts_per_year",
    "cumulative_citations_per_year", "fit_stepwise", "predict",
    "category_counts",
    "__version__",
]
