"""Customer segmentation and churn profiling from telecom billing records.

Pipeline: parse raw billing CSVs into typed records, derive behavioural
attributes, segment accounts with the euro-threshold rule set, train
decision-tree or naive-Bayes classifiers on the result, and evaluate them
with seeded holdouts, cross-validation, and a full metric report.
"""

from .bayes import NaiveBayesClassifier
from .evaluation import (
    ConfusionMatrix,
    CrossValidationResult,
    EmptyEvaluationError,
    EvaluationReport,
    FoldTooSmallError,
    LengthMismatchError,
    PerClassMetrics,
    ProtocolConfig,
    SplitProtocolResult,
    compute_report,
    cross_validation_protocol,
    format_report,
    full_trainingset_protocol,
    kappa_statistic,
    percentage_split_protocol,
    prc_area,
    report_to_dict,
    roc_area,
)
from .features import (
    DerivedProfile,
    NegativeServiceError,
    ProfileDeriver,
    derive_age_group,
    derive_county,
    derive_frame,
    derive_invoice_aggregates,
    derive_length_of_service,
    derive_profile,
    derive_sale_day,
    derive_time_of_day,
)
from .ingest import (
    DatasetSchema,
    Gender,
    MonthlyInvoice,
    NetworkStatus,
    PaymentStatus,
    RawCustomerRecord,
    RowError,
    SchemaError,
    Violation,
    parse_csv,
    raw_billing_schema,
    validate,
    write_csv,
)
from .modelio import load_model, save_model
from .rules import (
    AccountClass,
    InvestigateNotClassifiable,
    RuleSegmenter,
    SegmentResult,
    SpenderStatus,
    classify_account,
    segment_dataset,
    segment_frame,
    spender_status,
)
from .synth import GeneratorConfig, GroundTruth, InfeasibleConfigError, generate
from .tabular import DegenerateDataError
from .tree import DecisionTreeClassifier, TreeStats, tree_stats

__version__ = "0.1.0"

__all__ = [
    "AccountClass",
    "ConfusionMatrix",
    "CrossValidationResult",
    "DatasetSchema",
    "DegenerateDataError",
    "DerivedProfile",
    "DecisionTreeClassifier",
    "EmptyEvaluationError",
    "EvaluationReport",
    "FoldTooSmallError",
    "Gender",
    "GeneratorConfig",
    "GroundTruth",
    "InfeasibleConfigError",
    "InvestigateNotClassifiable",
    "LengthMismatchError",
    "MonthlyInvoice",
    "NaiveBayesClassifier",
    "NegativeServiceError",
    "NetworkStatus",
    "PaymentStatus",
    "PerClassMetrics",
    "ProfileDeriver",
    "ProtocolConfig",
    "RawCustomerRecord",
    "RowError",
    "RuleSegmenter",
    "SchemaError",
    "SegmentResult",
    "SpenderStatus",
    "SplitProtocolResult",
    "TreeStats",
    "Violation",
    "classify_account",
    "compute_report",
    "cross_validation_protocol",
    "derive_age_group",
    "derive_county",
    "derive_frame",
    "derive_invoice_aggregates",
    "derive_length_of_service",
    "derive_profile",
    "derive_sale_day",
    "derive_time_of_day",
    "format_report",
    "full_trainingset_protocol",
    "generate",
    "kappa_statistic",
    "load_model",
    "parse_csv",
    "percentage_split_protocol",
    "prc_area",
    "raw_billing_schema",
    "report_to_dict",
    "roc_area",
    "save_model",
    "segment_dataset",
    "segment_frame",
    "spender_status",
    "tree_stats",
    "validate",
    "write_csv",
    "__version__",
]
