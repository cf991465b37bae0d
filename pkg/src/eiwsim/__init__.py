"""eiwsim: deterministic link-level simulator and learning harness for
map-aided MCS adaptation with a cost-gated mixture of experts and a
wireless world model."""

__version__ = "0.1.0"
